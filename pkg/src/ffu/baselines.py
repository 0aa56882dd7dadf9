"""Reference mechanisms evaluated at a common privacy cost.

The protocol: solve the fitness-for-use problem once, take its privacy cost,
and give every other method that same cost. Each method is then judged by the
worst ratio of achieved variance to target variance.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .linalg import pseudo_inverse
from .optimizer import OptimizerConfig, preset_weights, solve, solve_sum_squared
from .privacy import query_variances
from .workloads import Decomposition, VarianceTargets, Workload, decompose

HM_BRANCHING = range(2, 17)

SSQ_PRESETS = {
    "ssq-uniform": "uniform",
    "ssq-invvar": "inverse-variance",
    "ssq-invsd": "inverse-sd",
}
METHODS = ("smii", "ip", "gm", "hm", *SSQ_PRESETS)


@dataclass(frozen=True)
class BaselineReport:
    method: str
    cost: float
    per_query_variance: np.ndarray
    max_ratio: float
    details: dict = field(default_factory=dict)

    @classmethod
    def build(cls, method: str, cost: float, variances, targets, **details) -> "BaselineReport":
        v = np.asarray(variances, dtype=float)
        c = np.asarray(getattr(targets, "values", targets), dtype=float)
        return cls(method, float(cost), v, float(np.max(v / c)), details)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "cost": self.cost,
            "max_ratio": self.max_ratio,
            "per_query_variance": [float(v) for v in self.per_query_variance],
            **self.details,
        }


def _matrix(w) -> np.ndarray:
    return w.matrix if isinstance(w, Workload) else np.atleast_2d(np.asarray(w, dtype=float))


def l2_sensitivity(m: np.ndarray) -> float:
    """Largest column norm."""
    return float(np.max(np.linalg.norm(m, axis=0)))


def baseline_ip(w, targets, cost: float) -> BaselineReport:
    """Independent noise of variance ``1 / cost^2`` on every histogram cell."""
    if cost <= 0:
        raise ValueError("cost must be positive")
    m = _matrix(w)
    return BaselineReport.build("ip", cost, np.sum(m * m, axis=1) / cost**2, targets)


def baseline_gm(w, targets, cost: float) -> BaselineReport:
    """Independent noise on each query answer, scaled to the workload's sensitivity."""
    if cost <= 0:
        raise ValueError("cost must be positive")
    m = _matrix(w)
    sigma2 = (l2_sensitivity(m) / cost) ** 2
    return BaselineReport.build("gm", cost, np.full(m.shape[0], sigma2), targets)


def tree_strategy(d: int, branching: int) -> np.ndarray:
    """Subtree-sum indicators of a ``branching``-ary tree over ``d`` leaves.

    Leaves come first, then each coarser level, ending with the root. The last
    group on a level may hold fewer than ``branching`` children.
    """
    if branching < 2:
        raise ValueError("branching factor must be at least 2")
    level = np.eye(d)
    rows = [level]
    while level.shape[0] > 1:
        n = level.shape[0]
        groups = [level[i:i + branching].sum(axis=0) for i in range(0, n, branching)]
        level = np.array(groups)
        rows.append(level)
    return np.vstack(rows)


def hm_variances(m: np.ndarray, strategy: np.ndarray, cost: float) -> np.ndarray:
    sigma2 = (l2_sensitivity(strategy) / cost) ** 2
    recon = m @ pseudo_inverse(strategy)
    return sigma2 * np.sum(recon * recon, axis=1)


def baseline_hm(w, targets, cost: float, branching: Iterable[int] = HM_BRANCHING) -> BaselineReport:
    """Best tree strategy over the branching range, judged by max ratio."""
    if cost <= 0:
        raise ValueError("cost must be positive")
    m = _matrix(w)
    best = None
    for f in branching:
        var = hm_variances(m, tree_strategy(m.shape[1], f), cost)
        rep = BaselineReport.build("hm", cost, var, targets, branching=f)
        if best is None or rep.max_ratio < best.max_ratio:
            best = rep
    return best


def baseline_ssq(dec: Decomposition, targets, cost: float, preset: str = "uniform",
                 config: OptimizerConfig | None = None) -> BaselineReport:
    weights = preset_weights(targets, preset)
    res = solve_sum_squared(dec, weights, budget=cost, config=config)
    name = {v: k for k, v in SSQ_PRESETS.items()}[preset]
    return BaselineReport.build(name, cost, query_variances(dec, res.sigma), targets,
                                converged=res.converged, iterations=res.iterations)


def compare(w: Workload, targets, methods: Sequence[str] = METHODS, dec: Decomposition | None = None,
            config: OptimizerConfig | None = None) -> list[BaselineReport]:
    """Evaluate every method at the privacy cost found by the fitness-for-use solver."""
    unknown = [x for x in methods if x not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; valid methods are {list(METHODS)}")
    c = targets if isinstance(targets, VarianceTargets) else VarianceTargets(targets)
    dec = dec or decompose(w, "identity")
    res = solve(dec, c, config)
    cost = res.cost
    reports = []
    for name in methods:
        if name == "smii":
            reports.append(BaselineReport.build("smii", cost, query_variances(dec, res.sigma), c,
                                                converged=res.converged, iterations=res.iterations))
        elif name == "ip":
            reports.append(baseline_ip(w, c, cost))
        elif name == "gm":
            reports.append(baseline_gm(w, c, cost))
        elif name == "hm":
            reports.append(baseline_hm(w, c, cost))
        else:
            reports.append(baseline_ssq(dec, c, cost, SSQ_PRESETS[name], config))
    return sorted(reports, key=lambda r: r.max_ratio)


def comparison_csv(results: dict[str, list[BaselineReport]]) -> str:
    """Methods as rows, workload instances as columns, max ratios to 2 decimals."""
    instances = list(results)
    methods: list[str] = []
    for reps in results.values():
        methods.extend(r.method for r in reps if r.method not in methods)
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["method", *instances])
    for name in methods:
        row = [name]
        for inst in instances:
            hit = [r for r in results[inst] if r.method == name]
            row.append(f"{hit[0].max_ratio:.2f}" if hit else "")
        out.writerow(row)
    return buf.getvalue()


def comparison_json(results: dict[str, list[BaselineReport]]) -> str:
    return json.dumps({k: [r.to_dict() for r in v] for k, v in results.items()}, indent=2)
