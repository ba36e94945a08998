"""Generic stochastic Frank-Wolfe engine over an abstract convex set.

Each step of the loop:

1. blends the incoming mini-batch gradient into a running estimate
   ``G_t = (1 - rho_t) G_{t-1} + rho_t * mean-batch-gradient``,
2. calls the problem's linear minimization oracle on ``G_t``,
3. forms the convex combination ``(1 - gamma_t) x + gamma_t s`` and applies
   the problem's update map (identity unless the problem supplies a
   feasibility-preserving, objective-nonincreasing operator).

The default schedules are ``rho_t = 4 (t+1)^(-1/2)`` and
``gamma_t = 2 (t+2)^(-3/4)``. The raw rho exceeds 1 for t <= 14, which would
make the blend leave the convex hull of the observed gradients; by default
rho is clamped to 1, so the early estimate is just the latest mini-batch
gradient. Set ``clamp_rho=False`` to use the raw weight.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .stream import MiniBatch


class FeasibilityError(RuntimeError):
    """An iterate or oracle output fell outside the feasible set."""


def _identity(x: np.ndarray) -> np.ndarray:
    return x


def _always_feasible(x: np.ndarray) -> bool:
    return True


@dataclass(frozen=True)
class Schedule:
    """Step-weight and step-size schedules for the Frank-Wolfe loop.

    ``rho_fn``/``gamma_fn`` override the default formulas; clamping (when
    enabled) applies to whichever rho is in effect. gamma(t) must lie in
    (0, 1] for every t >= 1, which holds for the default.
    """

    clamp_rho: bool = True
    rho_fn: Callable[[int], float] | None = None
    gamma_fn: Callable[[int], float] | None = None

    def rho(self, t: int) -> float:
        raw = self.rho_fn(t) if self.rho_fn is not None else 4.0 * (t + 1) ** -0.5
        return min(1.0, raw) if self.clamp_rho else raw

    def gamma(self, t: int) -> float:
        return self.gamma_fn(t) if self.gamma_fn is not None else 2.0 * (t + 2) ** -0.75


@dataclass(frozen=True)
class GradientEstimate:
    """Running gradient estimate with its iteration counter (starts at zero)."""

    g: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class SfwState:
    x: np.ndarray
    grad: GradientEstimate

    @classmethod
    def initial(cls, x0: np.ndarray) -> "SfwState":
        x0 = np.array(x0, dtype=float, copy=True)
        return cls(x=x0, grad=GradientEstimate(np.zeros_like(x0), 0))


@dataclass(frozen=True)
class StepReport:
    t: int
    s: np.ndarray
    gamma: float
    rho: float


@dataclass(frozen=True)
class ProblemOracle:
    """Problem plug-in: sampled gradient/objective, LMO, update map, membership.

    The LMO must return a point of the feasible set; ``contains`` is the
    membership predicate (with the problem's own tolerance) used to enforce
    that contract and to keep iterates feasible.
    """

    sample_gradient: Callable[[np.ndarray, MiniBatch], np.ndarray]
    sample_objective: Callable[[np.ndarray, MiniBatch], float]
    lmo: Callable[[np.ndarray], np.ndarray]
    update_map: Callable[[np.ndarray], np.ndarray] = _identity
    contains: Callable[[np.ndarray], bool] = _always_feasible


def convex_combination(x: np.ndarray, s: np.ndarray, gamma: float) -> np.ndarray:
    return (1.0 - gamma) * x + gamma * s


def sfw_step(
    state: SfwState,
    batch: MiniBatch,
    oracle: ProblemOracle,
    sched: Schedule,
) -> tuple[SfwState, StepReport]:
    """One Frank-Wolfe step; returns the new state and what the step did.

    The starting point is membership-checked on the first step of a chain;
    subsequent feasibility is guaranteed by each step's own output check.
    """
    t = state.grad.t + 1
    gamma = sched.gamma(t)
    rho = sched.rho(t)
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma({t}) = {gamma} is outside (0, 1]")
    if state.grad.t == 0 and not oracle.contains(state.x):
        raise FeasibilityError("starting point is outside the feasible set")

    batch_grad = oracle.sample_gradient(state.x, batch)
    g = (1.0 - rho) * state.grad.g + rho * batch_grad
    s = oracle.lmo(g)
    if not oracle.contains(s):
        raise FeasibilityError(f"LMO returned an infeasible point at t={t}")
    x_new = oracle.update_map(convex_combination(state.x, s, gamma))
    if not oracle.contains(x_new):
        raise FeasibilityError(f"update map left the feasible set at t={t}")
    return SfwState(x_new, GradientEstimate(g, t)), StepReport(t=t, s=s, gamma=gamma, rho=rho)


def fw_gap_estimate(x: np.ndarray, grad_ref: np.ndarray, oracle: ProblemOracle) -> float:
    """Frank-Wolfe gap max_S <-grad_ref, S - x> evaluated through the LMO.

    Exact for the supplied reference gradient; nonnegative whenever
    ``grad_ref`` is the same gradient the LMO direction is computed from,
    because the maximum includes S = x.
    """
    s = oracle.lmo(grad_ref)
    return float(np.sum(-grad_ref * (s - x)))


@dataclass(frozen=True)
class Probe:
    """Named metric hook evaluated on the iterate at a configurable cadence."""

    name: str
    fn: Callable[[int, np.ndarray], float]
    every: int = 1
    at: tuple[int, ...] | None = None

    def due(self, t: int) -> bool:
        if self.at is not None:
            return t in self.at
        return t % self.every == 0


@dataclass
class IterationRecord:
    t: int
    objective_estimate: float
    fw_gap_estimate: float
    metrics: dict
    elapsed: float


@dataclass
class RunTrace:
    """Per-iteration series produced by ``run``; serializes to CSV and JSON."""

    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def metric_names(self) -> list[str]:
        names = set()
        for rec in self.records:
            names.update(rec.metrics)
        return sorted(names)

    def series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(t, values) for records where the named metric was evaluated."""
        ts, vals = [], []
        for rec in self.records:
            if name in rec.metrics:
                ts.append(rec.t)
                vals.append(rec.metrics[name])
        return np.array(ts, dtype=int), np.array(vals, dtype=float)

    def objective_series(self) -> np.ndarray:
        return np.array([rec.objective_estimate for rec in self.records])

    def gap_series(self) -> np.ndarray:
        return np.array([rec.fw_gap_estimate for rec in self.records])

    def to_csv(self, path) -> None:
        names = self.metric_names()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if self.metadata:
                fh.write(f"# {json.dumps(self.metadata, sort_keys=True)}\n")
            writer = csv.writer(fh)
            writer.writerow(["t", "objective_estimate", "fw_gap_estimate", "elapsed", *names])
            for rec in self.records:
                row = [rec.t, repr(rec.objective_estimate), repr(rec.fw_gap_estimate), repr(rec.elapsed)]
                row.extend(repr(rec.metrics[n]) if n in rec.metrics else "" for n in names)
                writer.writerow(row)

    def to_json(self, path) -> None:
        payload = {
            "metadata": self.metadata,
            "records": [
                {
                    "t": rec.t,
                    "objective_estimate": rec.objective_estimate,
                    "fw_gap_estimate": rec.fw_gap_estimate,
                    "metrics": rec.metrics,
                    "elapsed": rec.elapsed,
                }
                for rec in self.records
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def run(
    stream: Iterable[MiniBatch],
    x0: np.ndarray,
    oracle: ProblemOracle,
    sched: Schedule = Schedule(),
    probes: tuple = (),
    metadata: dict | None = None,
) -> tuple[np.ndarray, RunTrace]:
    """Drive one sequential Frank-Wolfe run over a stream of mini-batches.

    The objective estimate recorded at step t is the sampled objective of the
    previous iterate on the incoming (unseen) batch, so it is an unbiased
    estimate of the objective at that iterate. The gap estimate is the cheap
    one based on the running gradient estimate; expensive reference-gradient
    gaps belong in probes.
    """
    x0 = np.asarray(x0, dtype=float)
    if not oracle.contains(x0):
        raise FeasibilityError("x0 is outside the feasible set")
    state = SfwState.initial(x0)
    records: list[IterationRecord] = []
    started = time.perf_counter()
    for batch in stream:
        x_prev = state.x
        objective = float(oracle.sample_objective(x_prev, batch))
        state, report = sfw_step(state, batch, oracle, sched)
        gap = float(np.sum(-state.grad.g * (report.s - x_prev)))
        metrics = {
            probe.name: float(probe.fn(report.t, state.x))
            for probe in probes
            if probe.due(report.t)
        }
        records.append(
            IterationRecord(
                t=report.t,
                objective_estimate=objective,
                fw_gap_estimate=gap,
                metrics=metrics,
                elapsed=time.perf_counter() - started,
            )
        )
    return state.x, RunTrace(records=records, metadata=dict(metadata or {}))
