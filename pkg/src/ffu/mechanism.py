"""Running a configured mechanism on a histogram.

The release is ``L (B x + z)`` with ``z ~ N(0, Sigma)`` drawn from a seeded
generator. Floating-point side channels in Gaussian sampling are not
addressed here.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, NegativeCount, ParseError
from .privacy import Covariance, privacy_cost, query_variances
from .workloads import Decomposition


@dataclass(frozen=True)
class Release:
    answers: np.ndarray
    variances: np.ndarray
    cost: float
    seed: int
    labels: tuple[str, ...] | None = None

    def to_json(self) -> str:
        return json.dumps({
            "answers": [float(a) for a in self.answers],
            "variances": [float(v) for v in self.variances],
            "cost": self.cost,
            "seed": self.seed,
        }, indent=2)

    def to_csv(self) -> str:
        labels = self.labels or tuple(f"q{j}" for j in range(self.answers.size))
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["label", "answer", "variance"])
        for lab, a, v in zip(labels, self.answers, self.variances):
            out.writerow([lab, repr(float(a)), repr(float(v))])
        return buf.getvalue()


def expected_variances(dec: Decomposition, cov) -> np.ndarray:
    """Exact per-query noise variance, the diagonal of ``L Sigma L'``."""
    return query_variances(dec, cov)


def release(dec: Decomposition, cov, x, seed: int, labels=None) -> Release:
    cov = cov if isinstance(cov, Covariance) else Covariance(cov)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != dec.d:
        raise DimensionMismatch(f"data has {x.size} cells, workload expects {dec.d}")
    if cov.k != dec.k:
        raise DimensionMismatch(f"covariance order {cov.k} != basis rows {dec.k}")
    rng = np.random.default_rng(seed)
    noise = cov.chol.lower @ rng.standard_normal(cov.k)
    answers = dec.representation @ (dec.basis @ x + noise)
    return Release(answers, expected_variances(dec, cov), privacy_cost(dec, cov), int(seed),
                   tuple(labels) if labels is not None else None)


def release_many(dec: Decomposition, cov, x, seed: int, n: int) -> np.ndarray:
    """``n`` independent releases as rows, from one seeded stream."""
    cov = cov if isinstance(cov, Covariance) else Covariance(cov)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != dec.d:
        raise DimensionMismatch(f"data has {x.size} cells, workload expects {dec.d}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n, cov.k)) @ cov.chol.lower.T
    return (dec.basis @ x + noise) @ dec.representation.T


def ingest_histogram(path, d: int | None = None) -> np.ndarray:
    """Read counts from a one-column CSV or from ``index,count`` pairs.

    In the two-column form, indices not listed get a count of zero and ``d``
    (if given) fixes the length.
    """
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    try:
        if widths == {1}:
            counts = np.array([float(r[0]) for r in rows])
            if d is not None and counts.size != d:
                raise DimensionMismatch(f"{path}: {counts.size} counts for domain size {d}")
        elif widths == {2}:
            pairs = [(int(r[0]), float(r[1])) for r in rows]
            top = max(i for i, _ in pairs)
            size = d if d is not None else top + 1
            if min(i for i, _ in pairs) < 0 or top >= size:
                raise ParseError(f"{path}: cell index outside [0, {size})")
            counts = np.zeros(size)
            seen = set()
            for i, v in pairs:
                if i in seen:
                    raise ParseError(f"{path}: cell index {i} listed twice")
                seen.add(i)
                counts[i] = v
        else:
            raise ParseError(f"{path}: expected one or two columns")
    except ValueError as exc:
        if isinstance(exc, (ParseError, DimensionMismatch)):
            raise
        raise ParseError(f"{path}: {exc}") from None
    if not np.all(np.isfinite(counts)):
        raise ParseError(f"{path}: non-finite count")
    if np.any(counts < 0):
        raise NegativeCount(f"{path}: counts must be non-negative")
    return counts
