"""Privacy accounting for correlated Gaussian linear-query mechanisms.

A mechanism adds ``N(0, Sigma)`` noise to ``B @ x``. Its privacy profile has
one entry per histogram cell, ``b_i' Sigma^-1 b_i`` for column ``b_i`` of
``B``, and its privacy cost is the square root of the largest entry. The cost
alone pins down the exact (epsilon, delta) trade-off; the squared cost is
twice the zCDP parameter rho.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import optimize, special

from .errors import DimensionMismatch, OutOfRange, SizeLimit
from .linalg import CholeskyFactor, as_symmetric, cholesky, inverse_spd, pseudo_inverse, solve_spd
from .workloads import Decomposition

EPS_SEARCH_MAX = 100.0
LOG_SPACE_EPS = 30.0
COMPARE_RTOL = 1e-9
KRON_MAX_ORDER = 4096

DEFAULT_EPSILONS = (0.1, 0.25, 0.5, 1.0, 2.0, 3.0)


@dataclass(frozen=True)
class Covariance:
    """Symmetric positive-definite noise covariance with its Cholesky factor."""

    sigma: np.ndarray
    chol: CholeskyFactor = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = np.array(as_symmetric(self.sigma))
        factor = cholesky(s)
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "chol", factor)

    @property
    def k(self) -> int:
        return self.sigma.shape[0]

    def scaled(self, factor: float) -> "Covariance":
        return Covariance(self.sigma * factor)

    def inverse(self) -> np.ndarray:
        return inverse_spd(self.chol)


def _basis(dec) -> np.ndarray:
    return dec.basis if isinstance(dec, Decomposition) else np.atleast_2d(np.asarray(dec, float))


def _as_cov(cov) -> Covariance:
    return cov if isinstance(cov, Covariance) else Covariance(cov)


def privacy_profile(dec: Decomposition | np.ndarray, cov: Covariance | np.ndarray) -> np.ndarray:
    """Per-cell quadratic forms ``b_i' Sigma^-1 b_i`` over the columns of the basis."""
    b = _basis(dec)
    cov = _as_cov(cov)
    if cov.k != b.shape[0]:
        raise DimensionMismatch(f"covariance order {cov.k} != basis rows {b.shape[0]}")
    solved = solve_spd(cov.chol, b)
    return np.einsum("ij,ij->j", b, solved)


def squared_cost(dec, cov) -> float:
    return float(np.max(privacy_profile(dec, cov)))


def privacy_cost(dec, cov) -> float:
    return math.sqrt(squared_cost(dec, cov))


def query_variances(dec: Decomposition | np.ndarray, cov: Covariance | np.ndarray) -> np.ndarray:
    """Diagonal of ``L Sigma L'``; ``dec`` may also be the representation matrix itself."""
    rep = dec.representation if isinstance(dec, Decomposition) else np.atleast_2d(np.asarray(dec, float))
    sigma = cov.sigma if isinstance(cov, Covariance) else as_symmetric(cov)
    if rep.shape[1] != sigma.shape[0]:
        raise DimensionMismatch(f"representation has {rep.shape[1]} columns, covariance order {sigma.shape[0]}")
    return np.einsum("ij,ij->i", rep @ sigma, rep)


# ---------------------------------------------------------------- (eps, delta)


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def delta_for_epsilon(cost: float, epsilon: float) -> float:
    """Smallest delta for which the mechanism is (epsilon, delta)-DP."""
    if cost < 0:
        raise ValueError("cost must be non-negative")
    if cost == 0.0:
        return 0.0
    a = cost / 2.0 - epsilon / cost
    b = -cost / 2.0 - epsilon / cost
    first = _norm_cdf(a)
    if epsilon > LOG_SPACE_EPS:
        second = math.exp(epsilon + float(special.log_ndtr(b)))
    else:
        second = math.exp(epsilon) * _norm_cdf(b)
    return max(first - second, 0.0)


def epsilon_for_delta(cost: float, delta: float) -> float:
    """Smallest epsilon >= 0 reaching ``delta``, by bracketed root finding.

    Returns 0 when ``delta`` already holds at epsilon = 0.
    """
    if cost <= 0:
        raise ValueError("cost must be positive")
    if not 0.0 < delta < 1.0:
        raise OutOfRange("delta must lie in (0, 1)")
    if delta_for_epsilon(cost, 0.0) <= delta:
        return 0.0
    if delta_for_epsilon(cost, EPS_SEARCH_MAX) >= delta:
        raise OutOfRange(f"delta={delta:g} needs epsilon above {EPS_SEARCH_MAX:g}")
    return optimize.brentq(
        lambda e: delta_for_epsilon(cost, e) - delta, 0.0, EPS_SEARCH_MAX, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500
    )


def curve(cost: float, epsilons: Sequence[float]) -> list[dict[str, float]]:
    return [{"epsilon": float(e), "delta": delta_for_epsilon(cost, float(e))} for e in epsilons]


# ---------------------------------------------------------------- ordering


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def refined_compare(first, second, rtol: float = COMPARE_RTOL) -> Ordering:
    """Lexicographic comparison of profiles sorted in decreasing order.

    ``LESS`` means the first mechanism leaks less.
    """
    p = np.sort(np.asarray(first, float))[::-1]
    q = np.sort(np.asarray(second, float))[::-1]
    if p.shape != q.shape:
        raise DimensionMismatch(f"profiles of length {p.size} and {q.size}")
    for a, b in zip(p, q):
        if abs(a - b) <= rtol * max(abs(a), abs(b)):
            continue
        return Ordering.LESS if a < b else Ordering.GREATER
    return Ordering.EQUAL


# ---------------------------------------------------------------- constructions


def kron_compose(dec1: Decomposition, cov1, dec2: Decomposition, cov2) -> tuple[Decomposition, Covariance]:
    """Mechanism for ``W1 ⊗ W2`` built from mechanisms for each factor."""
    cov1, cov2 = _as_cov(cov1), _as_cov(cov2)
    order = cov1.k * cov2.k
    if order > KRON_MAX_ORDER:
        raise SizeLimit(f"composed order {order} exceeds {KRON_MAX_ORDER}")
    dec = Decomposition(
        "kronecker",
        np.kron(dec1.basis, dec2.basis),
        np.kron(dec1.representation, dec2.representation),
    )
    return dec, Covariance(np.kron(cov1.sigma, cov2.sigma))


def basis_convert(dec_from: Decomposition, cov_from, dec_to: Decomposition) -> Covariance:
    """Covariance in ``dec_to``'s basis giving the same released distribution.

    Uses the Moore-Penrose right inverse of the source basis.
    """
    cov_from = _as_cov(cov_from)
    if dec_from.d != dec_to.d:
        raise DimensionMismatch("decompositions cover different domains")
    transfer = dec_to.basis @ pseudo_inverse(dec_from.basis)
    return Covariance(transfer @ cov_from.sigma @ transfer.T)


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class PrivacyReport:
    cost: float
    squared_cost: float
    profile: np.ndarray
    epsilon_delta: list[dict[str, float]]
    variances: np.ndarray
    targets: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    @property
    def ratios(self) -> np.ndarray | None:
        return None if self.targets is None else self.variances / self.targets

    @property
    def max_ratio(self) -> float | None:
        r = self.ratios
        return None if r is None else float(np.max(r))

    def to_dict(self) -> dict[str, Any]:
        labels = self.labels or tuple(f"q{j}" for j in range(self.variances.size))
        per_query = []
        for j, v in enumerate(self.variances):
            row: dict[str, Any] = {"label": labels[j], "variance": float(v)}
            if self.targets is not None:
                row["target"] = float(self.targets[j])
                row["ratio"] = float(v / self.targets[j])
            per_query.append(row)
        return {
            "cost": self.cost,
            "squared_cost": self.squared_cost,
            "profile": [float(p) for p in self.profile],
            "epsilon_delta_samples": self.epsilon_delta,
            "per_query": per_query,
        }

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, indent=2)


def privacy_report(dec: Decomposition, cov, targets=None, labels=None, epsilons=DEFAULT_EPSILONS) -> PrivacyReport:
    cov = _as_cov(cov)
    profile = privacy_profile(dec, cov)
    alpha = float(np.max(profile))
    cost = math.sqrt(alpha)
    tvals = None
    if targets is not None:
        tvals = np.asarray(getattr(targets, "values", targets), float)
    return PrivacyReport(
        cost=cost,
        squared_cost=alpha,
        profile=profile,
        epsilon_delta=curve(cost, epsilons),
        variances=query_variances(dec, cov),
        targets=tvals,
        labels=tuple(labels) if labels is not None else None,
    )
