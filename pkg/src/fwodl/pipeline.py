"""End-to-end experiment drivers: synthetic recovery benchmark, sensor
compression workflow, and the sparse-PCA study.

Each driver takes a frozen config dataclass, fans trials out over optional
worker processes, reduces results deterministically (sorted by trial id), and
can write traces, averaged curves, and a summary that embeds the resolved
config and a content hash of the inputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import matops, metrics, odl, spca
from .fw_core import Probe, RunTrace, Schedule, SfwState, IterationRecord, run, sfw_step
from .seeding import as_rng, derive_int, subseed
from .stream import (
    MiniBatch,
    SensorDataset,
    SyntheticModel,
    batch_sensor_stream,
    impute_row_mean,
    load_sensor_csv,
    synthetic_stream,
)

KNOWN_METHODS = ("proposed", "l4_baseline", "sfw_baseline")


def method_problem(method: str, n: int, gradient_scale: str = "paper") -> odl.OdlProblem:
    """Map a method name to its problem configuration."""
    if method == "proposed":
        return odl.OdlProblem(n=n, objective="l3", update="polar", gradient_scale=gradient_scale)
    if method == "l4_baseline":
        return odl.OdlProblem(n=n, objective="l4", update="polar", gradient_scale=gradient_scale)
    if method == "sfw_baseline":
        return odl.OdlProblem(n=n, objective="l3", update="plain", gradient_scale=gradient_scale)
    raise ValueError(f"unknown method {method!r}; expected one of {KNOWN_METHODS}")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def _check_methods(methods) -> None:
    _require(len(methods) >= 1, "at least one method is required")
    for m in methods:
        _require(m in KNOWN_METHODS, f"unknown method {m!r}")


@dataclass(frozen=True)
class SyntheticConfig:
    n: int = 10
    theta: float = 0.3
    batch_size: int = 10
    total_batches: int = 3000
    trials: int = 20
    seed: int = 0
    methods: tuple = KNOWN_METHODS
    gradient_scale: str = "paper"
    clamp_rho: bool = True
    error_probe_every: int = 1
    gap_probe_at: tuple = ()
    gap_probe_samples: int = 20_000
    workers: int = 1

    def __post_init__(self):
        _require(self.n >= 2, "n must be at least 2")
        _require(0.0 < self.theta < 1.0, "theta must lie in (0, 1)")
        _require(self.batch_size >= 1 and self.total_batches >= 1, "sizes must be positive")
        _require(self.trials >= 1 and self.workers >= 1, "trials and workers must be positive")
        _require(self.error_probe_every >= 1, "probe cadence must be positive")
        _check_methods(self.methods)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "gap_probe_at", tuple(int(t) for t in self.gap_probe_at))

    @classmethod
    def from_dict(cls, obj: dict) -> "SyntheticConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        _require(not extra, f"unknown synthetic config keys: {sorted(extra)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in obj.items()})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["methods"] = list(self.methods)
        out["gap_probe_at"] = list(self.gap_probe_at)
        return out


@dataclass(frozen=True)
class SensorConfig:
    init_count: int = 100
    batch_size: int = 6
    init_iterations: int = 20
    eta0: tuple = (2, 8, 17, 35)
    methods: tuple = KNOWN_METHODS
    seed: int = 0
    center: bool = False
    hlndm_horizon: int = 4
    gradient_scale: str = "paper"
    clamp_rho: bool = True
    transmission_thresholds: tuple = ()

    def __post_init__(self):
        _require(self.init_count >= 1 and self.batch_size >= 1, "sizes must be positive")
        _require(self.init_iterations >= 0, "init iterations must be nonnegative")
        _require(len(self.eta0) >= 1 and all(e >= 1 for e in self.eta0), "eta0 values must be positive")
        _require(self.hlndm_horizon >= 1, "hlndm horizon must be positive")
        _check_methods(self.methods)
        object.__setattr__(self, "eta0", tuple(int(e) for e in self.eta0))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "transmission_thresholds", tuple(float(v) for v in self.transmission_thresholds))

    @classmethod
    def from_dict(cls, obj: dict) -> "SensorConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        _require(not extra, f"unknown sensor config keys: {sorted(extra)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in obj.items()})

    def to_dict(self) -> dict:
        out = asdict(self)
        out["eta0"] = list(self.eta0)
        out["methods"] = list(self.methods)
        out["transmission_thresholds"] = list(self.transmission_thresholds)
        return out


@dataclass(frozen=True)
class SpcaConfig:
    n: int = 20
    q: int = 3
    batch_size: int = 10
    total_batches: int = 3000
    trials: int = 20
    mu: float = 0.2
    lam: float = 1.0
    seed: int = 0
    error_probe_every: int = 1
    workers: int = 1

    def __post_init__(self):
        _require(self.n >= 2 and 1 <= self.q <= self.n, "need 1 <= q <= n")
        _require(self.batch_size >= 1 and self.total_batches >= 1, "sizes must be positive")
        _require(self.trials >= 1 and self.workers >= 1, "trials and workers must be positive")
        _require(self.mu > 0 and self.lam >= 0, "need mu > 0 and lambda >= 0")

    @classmethod
    def from_dict(cls, obj: dict) -> "SpcaConfig":
        obj = dict(obj)
        if "lambda" in obj:  # JSON uses the literal key "lambda"
            obj["lam"] = obj.pop("lambda")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(obj) - known
        _require(not extra, f"unknown spca config keys: {sorted(extra)}")
        return cls(**obj)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


def input_hash(config_dict: dict, data_path=None) -> str:
    """Content hash binding a run to its resolved config (and data file)."""
    digest = hashlib.sha256(json.dumps(config_dict, sort_keys=True).encode("utf-8"))
    if data_path is not None:
        digest.update(Path(data_path).read_bytes())
    return digest.hexdigest()


@dataclass
class SweepResult:
    """Reduced output of one experiment driver, ready for serialization."""

    kind: str
    config: dict
    input_hash: str
    recovery: dict = field(default_factory=dict)       # method -> RecoveryReport
    gaps: dict = field(default_factory=dict)           # method -> {t: per-trial array}
    compression: dict = field(default_factory=dict)    # method -> {eta0: CompressionReport}
    hlndm_tests: dict = field(default_factory=dict)    # method -> {eta0: HlndmReport}
    transmissions: dict = field(default_factory=dict)  # threshold -> count
    diagnostics: dict = field(default_factory=dict)
    trace_ids: tuple = ()
    timings: dict = field(default_factory=dict)

    def summary_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "config": self.config,
            "input_hash": self.input_hash,
            "trace_ids": list(self.trace_ids),
            "timings_seconds": self.timings,
            "diagnostics": self.diagnostics,
            "methods": {},
        }
        for method, report in self.recovery.items():
            entry = {
                "trials": report.trials,
                "final_error_mean": report.final_mean,
                "final_error_stderr": report.final_stderr,
            }
            if method in self.gaps:
                entry["reference_fw_gap"] = {
                    str(t): {"mean": float(np.mean(v)), "stderr": _stderr(v)}
                    for t, v in sorted(self.gaps[method].items())
                }
            out["methods"][method] = entry
        for method, by_eta in self.compression.items():
            entry = out["methods"].setdefault(method, {})
            entry["compression"] = {str(e): r.to_dict() | {"per_batch_rmse": None} for e, r in by_eta.items()}
            for e, r in by_eta.items():
                entry["compression"][str(e)]["per_batch_rmse_len"] = int(r.per_batch_rmse.size)
        for method, by_eta in self.hlndm_tests.items():
            out["methods"].setdefault(method, {})["hlndm_vs_proposed"] = {
                str(e): r.to_dict() for e, r in by_eta.items()
            }
        if self.transmissions:
            out["transmissions"] = {str(k): v for k, v in self.transmissions.items()}
        return out

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(self.summary_dict(), fh, indent=2, sort_keys=True)
        with open(out_dir / "curves.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# input_hash={self.input_hash}\n")
            writer = csv.writer(fh)
            writer.writerow(["method", "series", "t", "mean", "stderr"])
            for method, report in self.recovery.items():
                mean, err = report.mean, report.stderr
                for i, t in enumerate(report.t):
                    writer.writerow([method, "recovery_error", int(t), repr(float(mean[i])), repr(float(err[i]))])
            for method, by_t in self.gaps.items():
                for t, vals in sorted(by_t.items()):
                    writer.writerow([method, "reference_fw_gap", int(t), repr(float(np.mean(vals))), repr(_stderr(vals))])
            for method, by_eta in self.compression.items():
                for e, report in sorted(by_eta.items()):
                    for i, value in enumerate(report.per_batch_rmse, start=1):
                        writer.writerow([method, f"rmse_eta{e}", i, repr(float(value)), "0.0"])


def _stderr(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(values.size))


def _sha16(a: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:16]


# --------------------------------------------------------------------------
# synthetic benchmark


def _synthetic_trial(cfg_dict: dict, out_dir, trial: int) -> dict:
    config = SyntheticConfig.from_dict(cfg_dict)
    model = SyntheticModel(
        d_true=matops.random_orthogonal(config.n, subseed(config.seed, "dtrue", trial)),
        theta=config.theta,
        n=config.n,
        seed=derive_int(config.seed, "stream", trial),
    )
    d0 = matops.random_orthogonal(config.n, subseed(config.seed, "d0", trial))
    cfg_hash = input_hash(cfg_dict)

    out = {"trial": trial, "methods": {}}
    for method in config.methods:
        problem = method_problem(method, config.n, config.gradient_scale)
        oracle = odl.odl_oracle(problem)
        sched = Schedule(clamp_rho=config.clamp_rho)
        probes = [
            Probe("recovery_error", partial(_recovery_probe, model.d_true), every=config.error_probe_every),
            Probe("orthogonality_defect", _defect_probe, every=config.error_probe_every),
        ]
        if config.gap_probe_at:
            probes.append(
                Probe(
                    "reference_fw_gap",
                    partial(_gap_probe, model, config.gap_probe_samples, config.seed, trial),
                    at=config.gap_probe_at,
                )
            )
        batches = synthetic_stream(model, config.batch_size, config.total_batches)
        first = next(iter(synthetic_stream(model, config.batch_size, 1)))
        started = time.perf_counter()
        _, trace = run(batches, d0, oracle, sched, probes=tuple(probes))
        elapsed = time.perf_counter() - started

        trace_id = f"synthetic-{method}-trial{trial:03d}"
        trace.metadata.update({"kind": "synthetic", "method": method, "trial": trial, "input_hash": cfg_hash})
        if out_dir is not None:
            trace.to_csv(Path(out_dir) / f"trace_{trace_id}.csv")
        err_t, err_vals = trace.series("recovery_error")
        _, defect_vals = trace.series("orthogonality_defect")
        gaps = dict(zip(*trace.series("reference_fw_gap"))) if config.gap_probe_at else {}
        out["methods"][method] = {
            "t": err_t.tolist(),
            "errors": err_vals.tolist(),
            "gaps": {int(t): float(v) for t, v in gaps.items()},
            "max_orthogonality_defect": float(defect_vals.max()) if defect_vals.size else 0.0,
            "d0_sha": _sha16(d0),
            "stream_sha": _sha16(first.samples),
            "trace_id": trace_id,
            "elapsed": elapsed,
        }
    return out


def _recovery_probe(d_true, t, x):
    return metrics.recovery_error(x, d_true)


def _defect_probe(t, x):
    return matops.orthogonality_defect(x)


def _gap_probe(model, samples, seed, trial, t, x):
    return odl.reference_fw_gap(x, model, samples, subseed(seed, "gapref", trial, t))


def run_synthetic(config: SyntheticConfig, out_dir=None) -> SweepResult:
    """Multi-trial synthetic benchmark with shared per-trial initialization.

    Within a trial every method sees the identical random starting dictionary
    and the identical data stream; curves are averaged across trials.
    """
    cfg_dict = config.to_dict()
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    task = partial(_synthetic_trial, cfg_dict, str(out_dir) if out_dir is not None else None)
    started = time.perf_counter()
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            trial_results = list(pool.map(task, range(config.trials)))
    else:
        trial_results = [task(trial) for trial in range(config.trials)]
    trial_results.sort(key=lambda r: r["trial"])

    recovery, gaps, timings, trace_ids, diagnostics = {}, {}, {}, [], {}
    for method in config.methods:
        per_method = [r["methods"][method] for r in trial_results]
        t_grid = np.array(per_method[0]["t"], dtype=int)
        errors = np.array([m["errors"] for m in per_method], dtype=float)
        recovery[method] = metrics.RecoveryReport(t=t_grid, per_trial=errors)
        if config.gap_probe_at:
            gaps[method] = {
                t: np.array([m["gaps"][t] for m in per_method]) for t in config.gap_probe_at
            }
        timings[method] = float(sum(m["elapsed"] for m in per_method))
        trace_ids.extend(m["trace_id"] for m in per_method)
        diagnostics[method] = {
            "max_orthogonality_defect": max(m["max_orthogonality_defect"] for m in per_method),
            "shared_d0": len({m["d0_sha"] for m in per_method}) == config.trials,
        }
    diagnostics["shared_init_across_methods"] = all(
        len({r["methods"][m]["d0_sha"] for m in config.methods}) == 1
        and len({r["methods"][m]["stream_sha"] for m in config.methods}) == 1
        for r in trial_results
    )
    timings["total_wall"] = time.perf_counter() - started

    result = SweepResult(
        kind="synthetic",
        config=cfg_dict,
        input_hash=input_hash(cfg_dict),
        recovery=recovery,
        gaps=gaps,
        diagnostics=diagnostics,
        trace_ids=tuple(trace_ids),
        timings=timings,
    )
    if out_dir is not None:
        result.write(out_dir)
    return result


# --------------------------------------------------------------------------
# sensor compression workflow


def surrogate_sensor_readings(
    n_sensors: int = 56,
    n_rows: int = 4593,
    seed: int = 7,
    missing_rate: float = 0.01,
) -> SensorDataset:
    """Sensor-like temperature field: shared daily/seasonal modes per-sensor
    gains and offsets, a slow common random walk, and idiosyncratic noise."""
    rng = as_rng(subseed(seed, "surrogate"))
    hours = np.arange(n_rows, dtype=float)
    daily = np.sin(2.0 * np.pi * hours / 24.0)
    seasonal = np.sin(2.0 * np.pi * hours / (24.0 * 365.0) + 0.7)
    drift = np.empty(n_rows)
    level = 0.0
    for i in range(n_rows):
        level = 0.98 * level + rng.normal(scale=0.3)
        drift[i] = level
    common = 8.0 * daily + 6.0 * seasonal + drift
    second_mode = np.cos(2.0 * np.pi * hours / 12.0)

    gains = 0.7 + 0.6 * rng.random(n_sensors)
    loadings = rng.normal(scale=0.8, size=n_sensors)
    offsets = rng.normal(loc=10.0, scale=3.0, size=n_sensors)
    readings = (
        offsets[None, :]
        + np.outer(common, gains)
        + np.outer(second_mode, loadings)
        + rng.normal(scale=0.4, size=(n_rows, n_sensors))
    )
    mask = rng.random((n_rows, n_sensors)) < missing_rate
    full_rows = mask.all(axis=1)
    mask[full_rows, 0] = False
    readings = np.where(mask, np.nan, readings)
    return SensorDataset(readings=readings, missing_mask=mask)


def _threshold_columns(z: np.ndarray, eta: int) -> np.ndarray:
    """Columnwise hard threshold keeping the eta largest-magnitude entries."""
    idx = np.argsort(-np.abs(z), axis=0, kind="stable")[:eta, :]
    out = np.zeros_like(z)
    cols = np.arange(z.shape[1])[None, :]
    out[idx, cols] = np.take_along_axis(z, idx, axis=0)
    return out


def run_sensor(
    config: SensorConfig,
    dataset: SensorDataset | None = None,
    dataset_path=None,
    out_dir=None,
) -> SweepResult:
    """Sensor compression: impute, batch-initialize, learn online, code each
    sample at every sparsity level, then compare methods with HLNDM tests."""
    if (dataset is None) == (dataset_path is None):
        raise ValueError("provide exactly one of dataset or dataset_path")
    if dataset is None:
        dataset = load_sensor_csv(dataset_path)
    cfg_dict = config.to_dict()
    run_hash = input_hash(cfg_dict, dataset_path)

    centered_means = None
    if config.center:
        observed = np.where(dataset.missing_mask, np.nan, dataset.readings)
        centered_means = np.nanmean(observed, axis=0)
        dataset = SensorDataset(
            readings=dataset.readings - centered_means[None, :],
            missing_mask=dataset.missing_mask,
            sensor_ids=dataset.sensor_ids,
            timestamps=dataset.timestamps,
        )
    if dataset.missing_mask.any():
        dataset = impute_row_mean(dataset)

    n = dataset.sensor_count
    for eta in config.eta0:
        _require(eta <= n, f"eta0={eta} exceeds sensor count {n}")

    keep_dicts = bool(config.transmission_thresholds)
    compression, hlndm_tests, timings, trace_ids = {}, {}, {}, []
    dict_snapshots: list[np.ndarray] = []
    batch_list: list[MiniBatch] = []
    d0_by_method: dict[str, np.ndarray] = {}
    max_defect = 0.0
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)

    for method in config.methods:
        problem = method_problem(method, n, config.gradient_scale)
        oracle = odl.odl_oracle(problem)
        sched = Schedule(clamp_rho=config.clamp_rho)
        init_block, batches = batch_sensor_stream(dataset, config.init_count, config.batch_size)
        started = time.perf_counter()
        d0 = odl.batch_initialize(init_block, problem, config.init_iterations, derive_int(config.seed, "init"))
        d0_by_method[method] = d0

        num = {eta: 0.0 for eta in config.eta0}
        den = {eta: 0.0 for eta in config.eta0}
        series = {eta: [] for eta in config.eta0}
        state = SfwState.initial(d0)
        records = []
        for batch in batches:
            objective = float(oracle.sample_objective(state.x, batch))
            x_prev = state.x
            state, report = sfw_step(state, batch, oracle, sched)
            gap = float(np.sum(-state.grad.g * (report.s - x_prev)))
            d_t = state.x
            if method == "proposed":
                max_defect = max(max_defect, matops.orthogonality_defect(d_t)
                                 if problem.update == "polar" else 0.0)
            y = batch.samples
            z = d_t.T @ y
            batch_den = float((y ** 2).sum())
            for eta in config.eta0:
                y_hat = d_t @ _threshold_columns(z, eta)
                err = float(((y_hat - y) ** 2).sum())
                num[eta] += err
                den[eta] += batch_den
                series[eta].append(np.sqrt(err / batch_den) if batch_den > 0 else 0.0)
            if keep_dicts and method == "proposed":
                dict_snapshots.append(d_t.copy())
                batch_list.append(batch)
            records.append(IterationRecord(report.t, objective, gap, {}, time.perf_counter() - started))
        timings[method] = time.perf_counter() - started

        compression[method] = {
            eta: metrics.CompressionReport(
                eta0=eta,
                signal_dim=n,
                rmse=float(np.sqrt(num[eta] / den[eta])),
                per_batch_rmse=np.array(series[eta]),
            )
            for eta in config.eta0
        }
        trace = RunTrace(records=records, metadata={
            "kind": "sensor", "method": method, "input_hash": run_hash,
            "center": config.center,
        })
        trace_id = f"sensor-{method}"
        trace_ids.append(trace_id)
        if out_dir is not None:
            trace.to_csv(Path(out_dir) / f"trace_{trace_id}.csv")

    if "proposed" in config.methods:
        for method in config.methods:
            if method == "proposed":
                continue
            hlndm_tests[method] = {
                eta: metrics.hlndm(
                    compression["proposed"][eta].per_batch_rmse,
                    compression[method][eta].per_batch_rmse,
                    h=config.hlndm_horizon,
                )
                for eta in config.eta0
            }

    transmissions = {}
    if keep_dicts and "proposed" in config.methods:
        transmissions = transmission_report(
            d0_by_method["proposed"], dict_snapshots, batch_list,
            eta0=config.eta0[0], thresholds=config.transmission_thresholds,
        )

    diagnostics = {
        "sensor_count": n,
        "batches": int(compression[config.methods[0]][config.eta0[0]].per_batch_rmse.size),
        "max_orthogonality_defect_proposed": max_defect,
        "centered": config.center,
    }
    if centered_means is not None:
        diagnostics["sensor_means"] = [float(v) for v in centered_means]

    result = SweepResult(
        kind="sensor",
        config=cfg_dict,
        input_hash=run_hash,
        compression=compression,
        hlndm_tests=hlndm_tests,
        transmissions=transmissions,
        diagnostics=diagnostics,
        trace_ids=tuple(trace_ids),
        timings=timings,
    )
    if out_dir is not None:
        result.write(out_dir)
    return result


def transmission_report(d0, dict_snapshots, batches, eta0: int, thresholds) -> dict:
    """Count dictionary shipments an edge device would make per error threshold.

    The simulated cloud keeps a stale dictionary copy; a sample whose relative
    reconstruction error through the stale copy exceeds the threshold triggers
    a shipment of the current learned dictionary.
    """
    counts = {}
    for threshold in thresholds:
        cloud = d0
        shipped = 0
        for d_t, batch in zip(dict_snapshots, batches):
            for j in range(batch.samples.shape[1]):
                y = batch.samples[:, j]
                scale = float(np.linalg.norm(y))
                if scale == 0.0:
                    continue
                code = metrics.hard_threshold(cloud.T @ y, eta0)
                err = float(np.linalg.norm(cloud @ code - y)) / scale
                if err > threshold:
                    cloud = d_t
                    shipped += 1
        counts[float(threshold)] = shipped
    return counts


# --------------------------------------------------------------------------
# sparse PCA study


def _spca_trial(cfg_dict: dict, out_dir, trial: int) -> dict:
    config = SpcaConfig.from_dict(cfg_dict)
    model = spca.build_spca_model(config.n, config.q, derive_int(config.seed, "model", trial))
    z0 = spca.random_unit_vector(config.n, subseed(config.seed, "z0", trial))
    oracle = spca.spca_oracle(spca.SpcaProblem(n=config.n, lam=config.lam, mu=config.mu))
    probes = (
        Probe("recovery_error", partial(_spca_probe, model.v1), every=config.error_probe_every),
        Probe("iterate_norm", _norm_probe, every=config.error_probe_every),
    )
    batches = spca.synth_covariance_stream(model, config.batch_size, config.total_batches)
    started = time.perf_counter()
    _, trace = run(batches, z0, oracle, Schedule(), probes=probes)
    elapsed = time.perf_counter() - started

    trace_id = f"spca-trial{trial:03d}"
    trace.metadata.update({"kind": "spca", "trial": trial, "input_hash": input_hash(cfg_dict)})
    if out_dir is not None:
        trace.to_csv(Path(out_dir) / f"trace_{trace_id}.csv")
    err_t, err_vals = trace.series("recovery_error")
    _, norms = trace.series("iterate_norm")
    return {
        "trial": trial,
        "t": err_t.tolist(),
        "errors": err_vals.tolist(),
        "max_iterate_norm": float(norms.max()) if norms.size else 0.0,
        "trace_id": trace_id,
        "elapsed": elapsed,
    }


def _spca_probe(v1, t, x):
    return spca.spca_recovery_error(x, v1)


def _norm_probe(t, x):
    return float(np.linalg.norm(x))


def run_spca(config: SpcaConfig, out_dir=None) -> SweepResult:
    """Multi-trial sparse-PCA study; per-trial model synthesis, averaged curves."""
    cfg_dict = config.to_dict()
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    task = partial(_spca_trial, cfg_dict, str(out_dir) if out_dir is not None else None)
    started = time.perf_counter()
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            trial_results = list(pool.map(task, range(config.trials)))
    else:
        trial_results = [task(trial) for trial in range(config.trials)]
    trial_results.sort(key=lambda r: r["trial"])

    t_grid = np.array(trial_results[0]["t"], dtype=int)
    errors = np.array([r["errors"] for r in trial_results], dtype=float)
    result = SweepResult(
        kind="spca",
        config=cfg_dict,
        input_hash=input_hash(cfg_dict),
        recovery={"spca": metrics.RecoveryReport(t=t_grid, per_trial=errors)},
        diagnostics={"max_iterate_norm": max(r["max_iterate_norm"] for r in trial_results)},
        trace_ids=tuple(r["trace_id"] for r in trial_results),
        timings={"total_wall": time.perf_counter() - started},
    )
    if out_dir is not None:
        result.write(out_dir)
    return result
