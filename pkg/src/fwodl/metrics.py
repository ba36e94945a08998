"""Evaluation metrics: dictionary recovery error, threshold sparse coder,
relative RMSE, and the HLN-corrected Diebold-Mariano statistic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


def recovery_error(d_t, d_true) -> float:
    """|1 - ||d_t^T d_true||_4^4 / n| with the entrywise fourth-power sum.

    Zero exactly when the product is a sign-permutation matrix, i.e. when the
    dictionary is recovered up to the inherent sign/permutation ambiguity.
    """
    d_t = np.asarray(d_t, dtype=float)
    d_true = np.asarray(d_true, dtype=float)
    if d_t.shape != d_true.shape or d_t.ndim != 2 or d_t.shape[0] != d_t.shape[1]:
        raise ValueError(f"expected equal square shapes, got {d_t.shape} and {d_true.shape}")
    w = d_t.T @ d_true
    return float(abs(1.0 - (w ** 4).sum() / w.shape[0]))


def hard_threshold(a, eta: int) -> np.ndarray:
    """Keep the eta largest-magnitude entries (values unchanged), zero the rest.

    Ties are broken by lowest index via a stable sort, so the result is
    deterministic.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"expected a vector, got shape {a.shape}")
    if not 1 <= eta <= a.size:
        raise ValueError(f"eta must lie in [1, {a.size}], got {eta}")
    keep = np.argsort(-np.abs(a), kind="stable")[:eta]
    out = np.zeros_like(a)
    out[keep] = a[keep]
    return out


class SparseCode(NamedTuple):
    code: np.ndarray
    y_hat: np.ndarray


def sparse_code_and_reconstruct(d, y, eta: int) -> SparseCode:
    """Threshold coder for square dictionaries: code = T_eta(d^T y), y_hat = d code."""
    d = np.asarray(d, dtype=float)
    y = np.asarray(y, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"dictionary must be square, got shape {d.shape}")
    if y.shape != (d.shape[0],):
        raise ValueError(f"signal shape {y.shape} does not match dictionary size {d.shape[0]}")
    code = hard_threshold(d.T @ y, eta)
    return SparseCode(code=code, y_hat=d @ code)


def rmse(pairs) -> float:
    """Aggregate relative RMSE sqrt(sum ||y_hat - y||^2 / sum ||y||^2)."""
    num = 0.0
    den = 0.0
    count = 0
    for y_hat, y in pairs:
        y_hat = np.asarray(y_hat, dtype=float)
        y = np.asarray(y, dtype=float)
        num += float(((y_hat - y) ** 2).sum())
        den += float((y ** 2).sum())
        count += 1
    if count == 0:
        raise ValueError("rmse needs at least one pair")
    if den <= 0.0:
        raise ValueError("all reference signals are zero; relative RMSE undefined")
    return math.sqrt(num / den)


@dataclass(frozen=True)
class HlndmReport:
    """Outcome of the corrected Diebold-Mariano comparison of two RMSE series."""

    statistic: float
    h: int
    series_length: int
    reject_at_5pct: bool
    degenerate: bool
    alpha: float = 0.05
    z_crit: float = 1.96

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "h": self.h,
            "series_length": self.series_length,
            "reject_at_5pct": self.reject_at_5pct,
            "degenerate": self.degenerate,
            "alpha": self.alpha,
            "z_crit": self.z_crit,
            "dbar_convention": "mean",
        }


def hlndm(rmse1, rmse2, h: int = 4) -> HlndmReport:
    """HLN-corrected Diebold-Mariano statistic on squared-RMSE differences.

    The loss differential is d_t = rmse1_t^2 - rmse2_t^2 and dbar is its
    sample mean. The long-run variance estimate truncates the autocovariance
    sum with a rectangular kernel of half-width h-1 (at h=1 only lag zero
    contributes). A nonpositive variance estimate is reported as degenerate
    with statistic 0 so downstream pipelines stay numeric. Positive values
    favor the second series (the first is the reference).
    """
    r1 = np.asarray(rmse1, dtype=float)
    r2 = np.asarray(rmse2, dtype=float)
    if r1.shape != r2.shape or r1.ndim != 1:
        raise ValueError(f"series must be 1-d with equal length, got {r1.shape} and {r2.shape}")
    if h < 1:
        raise ValueError(f"horizon must be at least 1, got {h}")
    t_len = r1.size
    if t_len <= 2 * h:
        raise ValueError(f"need series length > 2h = {2 * h}, got {t_len}")

    d = r1 ** 2 - r2 ** 2
    dbar = float(d.mean())
    dev = d - dbar
    f0 = float((dev * dev).sum()) / t_len
    for k in range(1, h):
        f0 += 2.0 * float((dev[k:] * dev[:-k]).sum()) / t_len

    correction = math.sqrt((t_len - 1 - 2 * h + h * (h - 1)) / t_len)
    if f0 <= 0.0:
        return HlndmReport(statistic=0.0, h=h, series_length=t_len,
                           reject_at_5pct=False, degenerate=True)
    statistic = correction * dbar / math.sqrt(f0 / t_len)
    return HlndmReport(
        statistic=statistic,
        h=h,
        series_length=t_len,
        reject_at_5pct=abs(statistic) > 1.96,
        degenerate=False,
    )


@dataclass
class CompressionReport:
    """Compression fidelity at one sparsity level."""

    eta0: int
    signal_dim: int
    rmse: float
    per_batch_rmse: np.ndarray = field(default_factory=lambda: np.array([]))

    @property
    def compression_ratio(self) -> int:
        return self.signal_dim // self.eta0

    def to_dict(self) -> dict:
        return {
            "eta0": self.eta0,
            "signal_dim": self.signal_dim,
            "compression_ratio": self.compression_ratio,
            "rmse": self.rmse,
            "per_batch_rmse": [float(v) for v in self.per_batch_rmse],
        }


@dataclass
class RecoveryReport:
    """Per-trial and trial-averaged recovery-error series on a shared t grid."""

    t: np.ndarray
    per_trial: np.ndarray  # (trials, len(t))

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=int)
        self.per_trial = np.atleast_2d(np.asarray(self.per_trial, dtype=float))
        if self.per_trial.shape[1] != self.t.size:
            raise ValueError("per-trial series length does not match the t grid")

    @property
    def trials(self) -> int:
        return self.per_trial.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.per_trial.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        if self.trials < 2:
            return np.zeros(self.t.size)
        return self.per_trial.std(axis=0, ddof=1) / math.sqrt(self.trials)

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1])

    @property
    def final_stderr(self) -> float:
        return float(self.stderr[-1])
