"""Workload matrices, variance targets and basis decompositions.

A workload is an ``m x d`` matrix of linear queries over a histogram of size
``d``. Mechanisms add noise in the coordinates of a basis ``B`` and map back to
query answers with a representation matrix ``L`` so that ``W = L @ B``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch, NonPositiveTarget, NotInRowSpace, ParseError
from .linalg import read_matrix

BASIS_KINDS = ("identity", "prefix", "explicit")
ROWSPACE_TOL = 1e-8
RANK_RTOL = 1e-10

AGES = 116
VOTING_AGE = 18
RACES = 6


@dataclass(frozen=True)
class Workload:
    matrix: np.ndarray
    labels: tuple[str, ...]
    provenance: dict[str, Any] = field(default_factory=lambda: {"kind": "explicit"})

    def __post_init__(self):
        w = np.array(self.matrix, dtype=float, ndmin=2)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise DimensionMismatch(f"workload must be a non-empty matrix, got {w.shape}")
        if len(self.labels) != w.shape[0]:
            raise DimensionMismatch(f"{len(self.labels)} labels for {w.shape[0]} queries")
        zero = np.flatnonzero(~np.any(w != 0.0, axis=1))
        if zero.size:
            raise DimensionMismatch(f"workload row {zero[0]} is all zeros")
        w.setflags(write=False)
        object.__setattr__(self, "matrix", w)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def explicit(cls, matrix, labels=None, source: str | None = None) -> "Workload":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if labels is None:
            labels = [f"q{j}" for j in range(matrix.shape[0])]
        prov = {"kind": "explicit"}
        if source is not None:
            prov["path"] = str(source)
        return cls(matrix, tuple(labels), prov)


@dataclass(frozen=True)
class VarianceTargets:
    values: np.ndarray

    def __post_init__(self):
        c = np.array(self.values, dtype=float).reshape(-1)
        if c.size == 0:
            raise NonPositiveTarget("no variance targets given")
        if not np.all(np.isfinite(c)) or np.any(c <= 0.0):
            raise NonPositiveTarget("variance targets must be finite and strictly positive")
        c.setflags(write=False)
        object.__setattr__(self, "values", c)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Decomposition:
    """Factorization ``W = L @ B`` with noise added on the basis side."""

    basis_kind: str
    basis: np.ndarray
    representation: np.ndarray

    @property
    def B(self) -> np.ndarray:
        return self.basis

    @property
    def L(self) -> np.ndarray:
        return self.representation

    @property
    def W(self) -> np.ndarray:
        return self.representation @ self.basis

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]

    @property
    def m(self) -> int:
        return self.representation.shape[0]


def upper_ones(d: int) -> np.ndarray:
    return np.triu(np.ones((d, d)))


def _check_full_row_rank(b: np.ndarray) -> None:
    s = np.linalg.svd(b, compute_uv=False)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size else 0
    if rank < b.shape[0]:
        raise DimensionMismatch(f"basis rows are dependent (rank {rank} < {b.shape[0]})")


def decompose(workload: Workload | np.ndarray, basis_kind: str = "identity", basis=None) -> Decomposition:
    """Split a workload into basis and representation matrices.

    ``basis_kind`` is ``"identity"``, ``"prefix"`` (upper-triangular ones) or
    ``"explicit"``, in which case ``basis`` must be given and the workload's
    rows must lie in its row space.
    """
    w = workload.matrix if isinstance(workload, Workload) else np.atleast_2d(np.asarray(workload, float))
    d = w.shape[1]
    if basis_kind == "identity":
        return Decomposition("identity", np.eye(d), w.copy())
    if basis_kind == "prefix":
        rep = np.empty_like(w)
        rep[:, 0] = w[:, 0]
        rep[:, 1:] = np.diff(w, axis=1)
        return Decomposition("prefix", upper_ones(d), rep)
    if basis_kind == "explicit":
        if basis is None:
            raise DimensionMismatch("explicit basis kind needs a basis matrix")
        b = np.atleast_2d(np.asarray(basis, dtype=float))
        if b.shape[1] != d:
            raise DimensionMismatch(f"basis has {b.shape[1]} columns, workload has {d}")
        _check_full_row_rank(b)
        rep = np.linalg.lstsq(b.T, w.T, rcond=None)[0].T
        resid = np.linalg.norm(rep @ b - w) / max(np.linalg.norm(w), 1.0)
        if resid > ROWSPACE_TOL:
            raise NotInRowSpace(f"basis cannot represent the workload (residual {resid:.2e})")
        return Decomposition("explicit", b, rep)
    raise ValueError(f"unknown basis kind {basis_kind!r}; expected one of {BASIS_KINDS}")


# ---------------------------------------------------------------- generators


def gen_prefix(d: int) -> Workload:
    if d < 1:
        raise ValueError("d must be positive")
    return Workload(np.tril(np.ones((d, d))), tuple(f"[0,{j}]" for j in range(d)), {"kind": "prefix", "params": {"d": d}})


def gen_identity_sum(d: int) -> Workload:
    if d < 1:
        raise ValueError("d must be positive")
    w = np.vstack([np.eye(d), np.ones((1, d))])
    labels = tuple(f"x{j}" for j in range(d)) + ("total",)
    return Workload(w, labels, {"kind": "identity-sum", "params": {"d": d}})


def range_rows(d: int, endpoints) -> np.ndarray:
    """Indicator rows for inclusive ranges ``[lo, hi]``."""
    endpoints = np.asarray(endpoints, dtype=int).reshape(-1, 2)
    cols = np.arange(d)
    return ((cols >= endpoints[:, :1]) & (cols <= endpoints[:, 1:])).astype(float)


def gen_random_range(d: int, count: int, seed: int) -> Workload:
    if d < 1 or count < 1:
        raise ValueError("d and count must be positive")
    rng = np.random.default_rng(seed)
    ends = np.sort(rng.integers(0, d, size=(count, 2)), axis=1)
    labels = tuple(f"[{lo},{hi}]" for lo, hi in ends)
    return Workload(range_rows(d, ends), labels,
                    {"kind": "random-range", "params": {"d": d, "count": count}, "seed": seed})


def gen_random_pm(d: int, count: int, p: float, seed: int) -> Workload:
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    w = np.where(rng.random((count, d)) < p, 1.0, -1.0)
    return Workload(w, tuple(f"pm{j}" for j in range(count)),
                    {"kind": "random-pm", "params": {"d": d, "count": count, "p": p}, "seed": seed})


def gen_marginals(r: int, t: int) -> Workload:
    """All one-way then all two-way marginals over ``r`` attributes of ``t`` values.

    Cells are indexed row-major, the first attribute varying slowest.
    """
    if r < 2 or t < 2:
        raise ValueError("need r >= 2 and t >= 2")
    cells = np.indices((t,) * r).reshape(r, -1)
    rows, labels = [], []
    for a in range(r):
        for v in range(t):
            rows.append(cells[a] == v)
            labels.append(f"a{a}={v}")
    for a, b in itertools.combinations(range(r), 2):
        for u in range(t):
            for v in range(t):
                rows.append((cells[a] == u) & (cells[b] == v))
                labels.append(f"a{a}={u},a{b}={v}")
    w = np.array(rows, dtype=float)
    assert w.shape[0] == r * t + comb(r, 2) * t * t
    return Workload(w, tuple(labels), {"kind": "marginals", "params": {"r": r, "t": t}})


def gen_pl94() -> Workload:
    """Census redistricting marginals over (voting age, ethnicity, race).

    Race value ``i`` stands for the non-empty subset of six races whose
    bitmask is ``i + 1``. Cell index is ``age * 126 + eth * 63 + race``.
    """
    n_race = 2**RACES - 1
    shape = (2, 2, n_race)
    cells = np.indices(shape).reshape(3, -1)
    masks = cells[2] + 1
    rows, labels = [], []
    for v in range(2):
        rows.append(cells[0] == v)
        labels.append(f"voting_age={v}")
    for v in range(2):
        rows.append(cells[1] == v)
        labels.append(f"hispanic={v}")
    single = [1 << i for i in range(RACES)]
    multi = [mk for mk in range(1, n_race + 1) if bin(mk).count("1") >= 2]
    for mk in single + multi:
        rows.append(masks == mk)
        labels.append(f"race_mask={mk}")
    d = cells.shape[1]
    rows.extend(np.eye(d, dtype=bool))
    labels.extend(f"cell{j}" for j in range(d))
    return Workload(np.array(rows, dtype=float), tuple(labels), {"kind": "pl94", "params": {}})


def gen_age_pyramid() -> Workload:
    """Prefix and voting-age range queries for males, females and both.

    Cell index is ``gender * 116 + age`` with male = 0.
    """
    ends = [(0, x) for x in range(AGES)] + [(VOTING_AGE, AGES - 1)]
    block = range_rows(AGES, ends)
    zero = np.zeros_like(block)
    w = np.vstack([np.hstack([block, zero]), np.hstack([zero, block]), np.hstack([block, block])])
    labels = [f"{who}:[{lo},{hi}]" for who in ("male", "female", "all") for lo, hi in ends]
    return Workload(w, tuple(labels), {"kind": "age-pyramid", "params": {}})


def gen_wrelated(d: int, seed: int) -> Workload:
    """Product of two Gaussian factors, giving a workload of rank at most ``d/2``."""
    if d < 2 or d % 2:
        raise ValueError("d must be even and at least 2")
    rng = np.random.default_rng(seed)
    half = d // 2
    c = rng.standard_normal((half, half))
    a = rng.standard_normal((half, d))
    return Workload(c @ a, tuple(f"r{j}" for j in range(half)),
                    {"kind": "wrelated", "params": {"d": d}, "seed": seed})


# ---------------------------------------------------------------- targets


def targets_uniform(m: int, value: float = 1.0) -> VarianceTargets:
    return VarianceTargets(np.full(m, float(value)))


def targets_random(m: int, lo: float, hi: float, seed: int) -> VarianceTargets:
    if not 0.0 < lo < hi:
        raise NonPositiveTarget("need 0 < lo < hi")
    rng = np.random.default_rng(seed)
    return VarianceTargets(rng.uniform(lo, hi, size=m))


def read_targets(path) -> VarianceTargets:
    try:
        c = np.loadtxt(Path(path), delimiter=",", dtype=float, ndmin=1)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return VarianceTargets(c.reshape(-1))


# ---------------------------------------------------------------- JSON specs

_GENERATORS = {
    "prefix": (gen_prefix, ("d",), False),
    "identity-sum": (gen_identity_sum, ("d",), False),
    "random-range": (gen_random_range, ("d", "count"), True),
    "random-pm": (gen_random_pm, ("d", "count", "p"), True),
    "marginals": (gen_marginals, ("r", "t"), False),
    "pl94": (gen_pl94, (), False),
    "age-pyramid": (gen_age_pyramid, (), False),
    "wrelated": (gen_wrelated, ("d",), True),
}

GENERATOR_KINDS = tuple(_GENERATORS) + ("explicit",)


def workload_from_spec(spec: dict[str, Any], base_dir: Path | None = None) -> Workload:
    """Build a workload from ``{"kind": ..., "params": {...}, "seed": n}``.

    The ``explicit`` kind reads ``params.path`` as a matrix CSV.
    """
    kind = spec.get("kind")
    params = dict(spec.get("params", {}))
    if kind == "explicit":
        path = Path(params["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return Workload.explicit(read_matrix(path), source=path)
    if kind not in _GENERATORS:
        raise ParseError(f"unknown workload kind {kind!r}; expected one of {GENERATOR_KINDS}")
    fn, names, seeded = _GENERATORS[kind]
    missing = [n for n in names if n not in params]
    if missing:
        raise ParseError(f"workload kind {kind!r} missing params {missing}")
    args = [params[n] for n in names]
    if seeded:
        if "seed" not in spec:
            raise ParseError(f"workload kind {kind!r} needs a seed")
        args.append(int(spec["seed"]))
    return fn(*args)


def workload_to_spec(workload: Workload) -> str:
    return json.dumps(workload.provenance, sort_keys=True)
