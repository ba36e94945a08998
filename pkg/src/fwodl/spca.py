"""Single-unit sparse PCA driven by the generic Frank-Wolfe engine.

The problem minimizes ``E[-z^T y y^T z + lambda * H_mu(z)]`` over the unit
l2-ball, where ``H_mu`` is the standard Huber loss (quadratic inside +-mu,
linear outside) acting as a smooth sparsity surrogate. The LMO over the unit
ball is the normalized negated gradient, and no extra update map is needed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import matops
from .fw_core import ProblemOracle
from .seeding import as_rng, subseed
from .stream import MiniBatch

log = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-8


def huber(z, mu: float) -> float:
    """Huber loss sum_i h_mu(z_i): quadratic within +-mu, linear outside."""
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    return float(np.where(a <= mu, z ** 2 / (2.0 * mu), a - mu / 2.0).sum())


def huber_gradient(z, mu: float) -> np.ndarray:
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) <= mu, z / mu, np.sign(z))


@dataclass(frozen=True)
class SpcaProblem:
    n: int
    lam: float = 1.0
    mu: float = 0.2

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"dimension must be at least 2, got {self.n}")
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")


def spca_oracle(problem: SpcaProblem) -> ProblemOracle:
    """Oracle for the Huber-regularized Rayleigh objective over the unit ball."""
    lam, mu = problem.lam, problem.mu

    def sample_gradient(z, batch):
        y = batch.samples
        proj = y.T @ z
        grad = (-2.0 / y.shape[1]) * (y @ proj)
        if lam:
            grad = grad + lam * huber_gradient(z, mu)
        return grad

    def sample_objective(z, batch):
        proj = batch.samples.T @ z
        value = -float((proj ** 2).mean())
        if lam:
            value += lam * huber(z, mu)
        return value

    def lmo(g):
        norm = float(np.linalg.norm(g))
        if norm == 0.0:
            log.warning("zero gradient at unit-ball LMO; returning first basis vector")
            out = np.zeros_like(np.asarray(g, dtype=float))
            out[0] = 1.0
            return out
        return -np.asarray(g, dtype=float) / norm

    def contains(z):
        return float(np.linalg.norm(z)) <= 1.0 + MEMBERSHIP_TOL

    return ProblemOracle(
        sample_gradient=sample_gradient,
        sample_objective=sample_objective,
        lmo=lmo,
        contains=contains,
    )


@dataclass(frozen=True, eq=False)
class SpcaModel:
    """Covariance synthesis model V diag(spectrum) V^T with a sparse leading axis."""

    n: int
    q: int
    seed: int
    v: np.ndarray
    spectrum: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        object.__setattr__(self, "spectrum", np.asarray(self.spectrum, dtype=float))
        if not matops.is_orthogonal(self.v):
            raise ValueError("basis V is not orthogonal within tolerance")
        if np.any(self.spectrum <= 0):
            raise ValueError("spectrum entries must be positive")

    @property
    def v1(self) -> np.ndarray:
        return self.v[:, 0]


def build_spca_model(n: int, q: int, seed: int, leading_var: float = 100.0) -> SpcaModel:
    """Construct the model: first axis has q nonzeros 1/sqrt(q), rest random.

    The remaining axes are random unit vectors redrawn until the stacked basis
    is full rank, then Gram-Schmidt orthogonalized; the first column is kept
    exactly as constructed.
    """
    if not 1 <= q <= n:
        raise ValueError(f"sparsity q must lie in [1, {n}], got {q}")
    rng = as_rng(subseed(seed, "model"))
    v1 = np.zeros(n)
    v1[:q] = 1.0 / np.sqrt(q)
    for _ in range(100):
        basis = np.empty((n, n))
        basis[:, 0] = v1
        for k in range(1, n):
            g = rng.standard_normal(n)
            basis[:, k] = g / np.linalg.norm(g)
        if np.linalg.matrix_rank(basis) == n:
            break
    else:  # pragma: no cover - full rank with probability one
        raise RuntimeError("failed to draw a full-rank basis")

    q_mat = np.empty_like(basis)
    q_mat[:, 0] = v1
    for k in range(1, n):
        v = basis[:, k]
        for _ in range(2):  # re-orthogonalize once for 1e-10-level orthogonality
            v = v - q_mat[:, :k] @ (q_mat[:, :k].T @ v)
        q_mat[:, k] = v / np.linalg.norm(v)

    spectrum = np.ones(n)
    spectrum[0] = leading_var
    return SpcaModel(n=n, q=q, seed=seed, v=q_mat, spectrum=spectrum)


def synth_covariance_stream(model: SpcaModel, batch_size: int, total_batches: int) -> Iterator[MiniBatch]:
    """Stream of zero-mean Gaussian batches with covariance V diag(spectrum) V^T."""
    if batch_size < 1:
        raise ValueError(f"batch size must be at least 1, got {batch_size}")
    if total_batches < 0:
        raise ValueError(f"total batches must be nonnegative, got {total_batches}")
    shaper = model.v * np.sqrt(model.spectrum)

    def generate():
        rng = as_rng(subseed(model.seed, "data"))
        for t in range(1, total_batches + 1):
            yield MiniBatch(t, shaper @ rng.standard_normal((model.n, batch_size)))

    return generate()


def random_unit_vector(n: int, seed) -> np.ndarray:
    if n < 1:
        raise ValueError(f"dimension must be at least 1, got {n}")
    rng = as_rng(seed)
    while True:
        g = rng.standard_normal(n)
        norm = np.linalg.norm(g)
        if norm > 0:
            return g / norm


def spca_recovery_error(z, v1) -> float:
    """|1 - |z^T v1||; zero exactly when z recovers the axis up to sign."""
    z = np.asarray(z, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    norm = np.linalg.norm(v1)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"reference axis must be unit length, got norm {norm}")
    return float(abs(1.0 - abs(float(z @ v1))))
