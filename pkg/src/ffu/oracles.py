"""Closed-form optima for two small workload families.

* The 2-D workload ``[[1, 1], [1, 0]]`` expressed with the workload itself as
  the basis, so ``L = I`` and ``Sigma`` is directly the answer covariance.
* The identity-plus-total workload on ``d`` cells, where symmetry forces
  ``Sigma = a I + b 11'``.

Each solver checks the hypotheses under which its formula is optimal and
raises :class:`DomainError` outside them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError, NonPositiveTarget
from .workloads import Decomposition

TWO_D_WORKLOAD = np.array([[1.0, 1.0], [1.0, 0.0]])
FITNESS = "fitness-for-use"
SUM_SQUARED = "sum-squared"


@dataclass(frozen=True)
class TwoDSolution:
    a: float
    c: float
    d_entry: float
    objective: float
    mode: str
    params: dict = field(default_factory=dict)

    @property
    def sigma(self) -> np.ndarray:
        return np.array([[self.a, self.c], [self.c, self.d_entry]])

    def decomposition(self) -> Decomposition:
        return Decomposition("explicit", TWO_D_WORKLOAD.copy(), np.eye(2))

    def sigma_identity_basis(self) -> np.ndarray:
        """Same mechanism with noise added to the raw cells instead."""
        inv = np.linalg.inv(TWO_D_WORKLOAD)
        return inv @ self.sigma @ inv.T


@dataclass(frozen=True)
class IdentitySumSolution:
    d: int
    a: float
    b: float
    squared_cost: float
    mode: str
    params: dict = field(default_factory=dict)

    @property
    def sigma(self) -> np.ndarray:
        return self.a * np.eye(self.d) + self.b * np.ones((self.d, self.d))

    @property
    def cell_variance(self) -> float:
        return self.a + self.b

    @property
    def total_variance(self) -> float:
        return self.d * self.a + self.d**2 * self.b

    def decomposition(self) -> Decomposition:
        w = np.vstack([np.eye(self.d), np.ones((1, self.d))])
        return Decomposition("identity", np.eye(self.d), w)


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise NonPositiveTarget(f"{name} must be positive, got {value}")


def idsum_squared_cost(d: int, a: float, b: float) -> float:
    """Diagonal of ``(a I + b 11')^-1``, identical for every cell."""
    return (a + (d - 1) * b) / (a * a + d * a * b)


def twod_fitness(gamma: float = 1.0) -> TwoDSolution:
    _positive("gamma", gamma)
    return TwoDSolution(gamma, gamma / 2, gamma, 4.0 / (3.0 * gamma), FITNESS, {"gamma": gamma})


def twod_sum_squared(beta: float = 1.0) -> TwoDSolution:
    _positive("beta", beta)
    r5 = math.sqrt(5.0)
    scale = 1.0 / beta**2
    a = (1.0 + 1.0 / r5) * scale
    d = (0.5 + 3.0 * r5 / 10.0) * scale
    return TwoDSolution(a, a / 2, d, (1.5 + r5 / 2) * scale, SUM_SQUARED, {"beta": beta})


def idsum_fitness(d: int, gamma: float = 1.0, k: float = 1.0) -> IdentitySumSolution:
    """Cell targets ``gamma`` and total-query target ``k * gamma``."""
    if d < 5 or not 0 < k < d:
        raise DomainError(f"closed form needs d >= 5 and 0 < k < d (got d={d}, k={k})")
    _positive("gamma", gamma)
    denom = (d - 1) * d
    a = (d * d - k) / denom * gamma
    b = (k - d) / denom * gamma
    cost2 = (2 * k * d - d * d - k * d * d) / (k * (k - d * d)) / gamma
    return IdentitySumSolution(d, a, b, cost2, FITNESS, {"gamma": gamma, "k": k})


def idsum_sum_squared(d: int, beta: float = 1.0, w: float = 1.0) -> IdentitySumSolution:
    """Minimize ``d (a + b) + (d a + d^2 b) / w^2`` at squared cost ``beta^2``."""
    if d < 5 or not w * w >= 1:
        raise DomainError(f"closed form needs d >= 5 and w^2 >= 1 (got d={d}, w={w})")
    _positive("beta", beta)
    root = w * math.sqrt(d + w * w)
    lead = (d - 2) * w * w - 1
    a = lead / ((d - 1) * w * w - root) / beta**2
    b = ((1 + w * w - root) / ((d - 1) * w * w - root)) * (lead / (-d - w * w + (d - 1) * root)) / beta**2
    return IdentitySumSolution(d, a, b, idsum_squared_cost(d, a, b), SUM_SQUARED, {"beta": beta, "w": w})


def idsum_ratio_curve(d_list: Sequence[int], gamma: float = 1.0) -> list[dict]:
    """Worst variance-to-target ratio of both optima at equal privacy cost."""
    rows = []
    for d in d_list:
        fit = idsum_fitness(d, gamma, 1.0)
        ssq = idsum_sum_squared(d, math.sqrt(fit.squared_cost), 1.0)
        cell, total = ssq.cell_variance / gamma, ssq.total_variance / gamma
        # the fitness optimum meets both targets with equality; gamma cancels
        fa, fb = Fraction(d * d - 1, (d - 1) * d), Fraction(1 - d, (d - 1) * d)
        fit_ratio = float(max(fa + fb, d * fa + d * d * fb))
        rows.append({
            "d": d,
            "sum_squared_ratio": max(cell, total),
            "sum_squared_cell_ratio": cell,
            "sum_squared_total_ratio": total,
            "fitness_ratio": fit_ratio,
        })
    return rows
