"""Dense linear-algebra kernel: SVD, polar factor, orthogonal sampling, norms.

All operations are pure functions on plain float ndarrays. Tolerances are
module constants tuned for double precision at dimensions up to ~128.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .seeding import as_rng

ORTHOGONALITY_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-8
SINGULARITY_FLOOR = 1e-12


class SingularMatrixError(ValueError):
    """Operation requires full rank but the input is (numerically) singular."""


def check_finite(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a float ndarray, rejecting NaN/Inf entries."""
    out = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(out)):
        bad = int(out.size - np.isfinite(out).sum())
        raise ValueError(f"{name} has {bad} non-finite entries")
    return out


class SvdFactors(NamedTuple):
    """Thin SVD, singular values sorted nonincreasing."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vt


def svd(a) -> SvdFactors:
    """Thin singular value decomposition of a finite 2-d array."""
    a = check_finite(a, "svd input")
    if a.ndim != 2:
        raise ValueError(f"svd expects a 2-d array, got shape {a.shape}")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    return SvdFactors(u, s, vt)


def polar(a) -> np.ndarray:
    """Orthogonal polar factor U @ Vt of a square full-rank matrix.

    The factor is the closest orthogonal matrix to ``a`` in Frobenius norm.
    Raises SingularMatrixError when the smallest singular value is at or
    below SINGULARITY_FLOOR instead of silently returning a non-orthogonal
    result.
    """
    a = check_finite(a, "polar input")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"polar expects a square matrix, got shape {a.shape}")
    f = svd(a)
    smallest = float(f.sigma[-1]) if f.sigma.size else 0.0
    if smallest <= SINGULARITY_FLOOR:
        raise SingularMatrixError(
            f"polar factor undefined: smallest singular value {smallest:.3e}"
        )
    return f.u @ f.vt


def random_orthogonal(n: int, seed) -> np.ndarray:
    """Haar-uniform n-by-n orthogonal matrix, deterministic per seed.

    A standard Gaussian matrix is orthogonalized by QR; fixing the signs of
    the R diagonal makes the draw Haar-distributed.
    """
    if n < 1:
        raise ValueError(f"dimension must be at least 1, got {n}")
    g = as_rng(seed).standard_normal((n, n))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_sign_permutation(n: int, seed) -> np.ndarray:
    """Random product of a +-1 diagonal and a permutation matrix."""
    if n < 1:
        raise ValueError(f"dimension must be at least 1, got {n}")
    rng = as_rng(seed)
    perm = rng.permutation(n)
    signs = rng.choice((-1.0, 1.0), size=n)
    return signs[:, None] * np.eye(n)[:, perm]


def spectral_norm(a) -> float:
    """Largest singular value."""
    f = svd(a)
    return float(f.sigma[0]) if f.sigma.size else 0.0


def nuclear_norm(a) -> float:
    """Sum of singular values."""
    return float(svd(a).sigma.sum())


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(check_finite(a, "norm input")))


def entrywise_p_norm(a, p: float) -> float:
    """(sum |a_ij|^p)^(1/p); rejects p < 1."""
    if p < 1:
        raise ValueError(f"entrywise p-norm needs p >= 1, got {p}")
    a = check_finite(a, "norm input")
    return float((np.abs(a) ** p).sum() ** (1.0 / p))


def orthogonality_defect(a) -> float:
    """Dimension-relative distance of a^T a from the identity."""
    a = np.asarray(a, dtype=float)
    k = a.shape[1]
    return float(np.linalg.norm(a.T @ a - np.eye(k)) / np.sqrt(k))


def is_orthogonal(a, tol: float = ORTHOGONALITY_TOL) -> bool:
    return orthogonality_defect(a) <= tol
