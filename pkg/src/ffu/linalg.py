"""Dense symmetric and triangular linear-algebra primitives.

Matrices are plain ``numpy`` arrays. The only wrapper type is
:class:`CholeskyFactor`, which carries the lower factor of an SPD matrix so
that repeated solves do not refactorize.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg as sla

from .errors import DimensionMismatch, NotPositiveDefinite

# pivot <= PIVOT_RTOL * max(diag) counts as a failed factorization
PIVOT_RTOL = 1e-12
PINV_RTOL = 1e-12


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the source matrix."""

    lower: np.ndarray

    @property
    def order(self) -> int:
        return self.lower.shape[0]

    def matrix(self) -> np.ndarray:
        return self.lower @ self.lower.T

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


def symmetrize(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def as_symmetric(m) -> np.ndarray:
    """Validate a square matrix and return its exactly-symmetric copy."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    return symmetrize(m)


def cholesky(m) -> CholeskyFactor:
    """Factor a symmetric matrix, raising :class:`NotPositiveDefinite` on failure.

    A pivot ``L[i, i]**2`` at or below ``1e-12 * max(diag(m))`` is treated as
    a failure, so numerically singular matrices are rejected too.
    """
    m = as_symmetric(m)
    if not np.all(np.isfinite(m)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    scale = float(np.max(np.diag(m)))
    if scale <= 0.0:
        raise NotPositiveDefinite("non-positive diagonal")
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(lower) ** 2
    if np.any(~np.isfinite(pivots)) or np.min(pivots) <= PIVOT_RTOL * scale:
        raise NotPositiveDefinite(f"pivot {np.min(pivots):.3e} below tolerance")
    return CholeskyFactor(lower)


def is_positive_definite(m) -> bool:
    try:
        cholesky(m)
    except NotPositiveDefinite:
        return False
    return True


def solve_spd(factor: CholeskyFactor, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` where ``A = factor.lower @ factor.lower.T``."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != factor.order:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, factor has order {factor.order}")
    return sla.cho_solve((factor.lower, True), rhs, check_finite=False)


def inverse_spd(factor: CholeskyFactor) -> np.ndarray:
    return symmetrize(solve_spd(factor, np.eye(factor.order)))


def pseudo_inverse(m) -> np.ndarray:
    """Moore-Penrose inverse via SVD, truncating singular values below 1e-12 * max."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return np.linalg.pinv(m, rcond=PINV_RTOL)


def kron_apply(a, b, c) -> np.ndarray:
    """Compute ``(a ⊗ b) vec(c)`` reshaped, i.e. ``b @ c @ a.T``.

    ``vec`` stacks columns, which is the convention under which the identity
    holds.
    """
    a, b, c = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (a, b, c))
    if b.shape[1] != c.shape[0] or c.shape[1] != a.shape[1]:
        raise DimensionMismatch(
            f"cannot form b @ c @ a.T with a{a.shape}, b{b.shape}, c{c.shape}"
        )
    return b @ c @ a.T


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int | None = None) -> np.ndarray:
    return np.asarray(v).reshape(rows, rows if cols is None else cols, order="F")


# ---------------------------------------------------------------- file format


def write_matrix(path, m) -> None:
    """Write a matrix as header-less CSV with 17 significant digits."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    np.savetxt(Path(path), m, delimiter=",", fmt="%.17g")


def read_matrix(path) -> np.ndarray:
    m = np.loadtxt(Path(path), delimiter=",", dtype=float, ndmin=2)
    return m
