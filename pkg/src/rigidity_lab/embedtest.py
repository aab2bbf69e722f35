"""
Planar embeddability of four-point metrics and rigidity witnesses.

Four points x_1..x_4 with pairwise distances d_ij lie in a Euclidean plane only
if the Gram matrix of x_i - x_4,

    G_ij = (-d_ij^2 + d_i4^2 + d_j4^2) / 2,

has rank at most two.  Rank is read off numerically as sigma_3 / sigma_1.

A rigidity witness measures how far a surface metric is from inducing the
Euclidean distance on a net: max over pairs of |d_M(p, q) - |p - q||.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distance import DistanceOptions, _pair_task
from .errors import InvalidMetricError
from .metric import ConformalMetric
from .nets import PointSet
from .parallel import pmap

TRIANGLE_TOL = 1e-9
DEFAULT_THRESHOLD = 1e-9
DEFAULT_PAIR_BUDGET = 2000


@dataclass(frozen=True)
class QuadDistances:
    """Validated 4x4 distance matrix."""

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.shape != (4, 4):
            raise InvalidMetricError(f"expected a 4x4 matrix, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InvalidMetricError("distances must be finite")
        if np.any(d < 0):
            raise InvalidMetricError("distances must be nonnegative")
        if np.any(np.diag(d) != 0):
            raise InvalidMetricError("diagonal must be zero")
        if not np.array_equal(d, d.T):
            raise InvalidMetricError("matrix must be symmetric")
        for i, j, k in itertools.permutations(range(4), 3):
            if d[i, k] > d[i, j] + d[j, k] + TRIANGLE_TOL:
                raise InvalidMetricError(
                    f"triangle inequality fails: d[{i},{k}]={d[i, k]!r} > "
                    f"d[{i},{j}] + d[{j},{k}] = {d[i, j] + d[j, k]!r}")
        object.__setattr__(self, "d", d)

    @classmethod
    def from_points(cls, P) -> "QuadDistances":
        P = np.asarray(P, dtype=float)
        diff = P[:, None, :] - P[None, :, :]
        return cls(np.sqrt(np.sum(diff * diff, axis=-1)))

    def permuted(self, perm) -> "QuadDistances":
        perm = list(perm)
        return QuadDistances(self.d[np.ix_(perm, perm)])


def read_quad_csv(fh) -> QuadDistances:
    """Read a 4x4 matrix, either bare rows or with an index header row/column."""
    rows = [r for r in csv.reader(fh) if r]
    try:
        body = [[float(v) for v in r] for r in rows]
    except ValueError:
        body = [[float(v) for v in r[1:]] for r in rows[1:]]
    return QuadDistances(np.array(body, dtype=float))


def gram_matrix(d: np.ndarray, base: int = 3) -> np.ndarray:
    d2 = np.asarray(d, dtype=float) ** 2
    G = (-d2 + d2[:, base][:, None] + d2[base, :][None, :]) / 2.0
    G[base, :] = 0.0
    G[:, base] = 0.0
    return G


def _ratio(s: np.ndarray) -> float:
    return 0.0 if s[0] == 0.0 else float(s[2] / s[0])


@dataclass
class GramReport:
    G: np.ndarray
    singular_values: np.ndarray
    ratio: float
    threshold: float
    max_ratio_any_base: float
    base_ratios: list = field(default_factory=list)

    @property
    def planar(self) -> bool:
        return self.ratio <= self.threshold

    def to_dict(self) -> dict:
        return {
            "G": self.G.tolist(),
            "singular_values": self.singular_values.tolist(),
            "ratio": self.ratio,
            "threshold": self.threshold,
            "planar": self.planar,
            "max_ratio_any_base": self.max_ratio_any_base,
            "base_ratios": self.base_ratios,
        }


def gram_rank_test(q: QuadDistances, threshold: float = DEFAULT_THRESHOLD) -> GramReport:
    """Planarity verdict from sigma_3 / sigma_1 of the Gram matrix based at x_4.

    sigma_1 = 0 (all four points coincide) counts as planar.  The report also
    carries the ratio for each of the four base-point choices.
    """
    if not isinstance(q, QuadDistances):
        q = QuadDistances(q)
    ratios = []
    for base in range(4):
        s = np.linalg.svd(gram_matrix(q.d, base), compute_uv=False)
        ratios.append(_ratio(s))
    G = gram_matrix(q.d, 3)
    s = np.linalg.svd(G, compute_uv=False)
    return GramReport(G=G, singular_values=s, ratio=_ratio(s), threshold=float(threshold),
                      max_ratio_any_base=max(ratios), base_ratios=ratios)


# ---------------------------------------------------------------------------
# rigidity witness


@dataclass
class WitnessReport:
    max_deviation: float
    worst_pair: Optional[tuple]
    table: list          # (p, q, d_M, euclid, deviation) per evaluated pair
    failures: list       # (p, q, message) per pair the solver could not finish
    n_pairs: int
    total_pairs: int
    sampled: bool
    seed: int

    def exceeds(self, threshold: float) -> bool:
        return self.max_deviation > threshold

    def to_dict(self, include_table: bool = True) -> dict:
        out = {
            "max_deviation": self.max_deviation,
            "worst_pair": None if self.worst_pair is None else [list(p) for p in self.worst_pair],
            "failure_count": len(self.failures),
            "failures": [{"p": list(p), "q": list(q), "message": m} for p, q, m in self.failures],
            "n_pairs": self.n_pairs,
            "total_pairs": self.total_pairs,
            "sampled": self.sampled,
            "seed": self.seed,
        }
        if include_table:
            out["table"] = [
                {"p": list(p), "q": list(q), "d": d, "euclid": e, "deviation": dev}
                for p, q, d, e, dev in self.table
            ]
        return out


def _witness_pairs(n: int, budget: int, seed: int):
    total = n * (n - 1) // 2
    if total <= budget:
        return [(i, j) for i in range(n) for j in range(i + 1, n)], total, False
    rng = np.random.default_rng(seed)
    flat = np.sort(rng.choice(total, size=budget, replace=False))
    # invert the row-major enumeration of i < j pairs
    pairs = []
    starts = np.cumsum([0] + [n - 1 - i for i in range(n - 1)])
    for k in flat:
        i = int(np.searchsorted(starts, k, side="right") - 1)
        j = int(i + 1 + (k - starts[i]))
        pairs.append((i, j))
    return pairs, total, True


def rigidity_witness(metric: ConformalMetric, L, pair_budget: int = DEFAULT_PAIR_BUDGET,
                     seed: int = 0, jobs: int = 1,
                     opts: Optional[DistanceOptions] = None) -> WitnessReport:
    """Max over pairs of |d_M(p, q) - |p - q|| for points of the net ``L``.

    Points are put in lexicographic order first, so the result does not depend
    on input order.  All pairs are used up to ``pair_budget``; beyond that a
    seeded uniform sample of that many pairs.  Pairs whose distance solve fails
    are listed and excluded from the max.
    """
    P = L.points if isinstance(L, PointSet) else np.asarray(L, dtype=float)
    P = np.unique(P, axis=0)  # sorted lexicographically
    pts = [(float(x), float(y)) for x, y in P]
    pairs, total, sampled = _witness_pairs(len(pts), pair_budget, seed)
    tasks = [(metric, pts[i], pts[j], opts) for i, j in pairs]
    results = pmap(_pair_task, tasks, jobs)
    table, failures = [], []
    worst, worst_pair = 0.0, None
    for (i, j), (d, err) in zip(pairs, results):
        p, q = pts[i], pts[j]
        if err is not None:
            failures.append((p, q, err[0]))
            continue
        e = float(np.hypot(q[0] - p[0], q[1] - p[1]))
        dev = abs(d - e)
        table.append((p, q, d, e, dev))
        if worst_pair is None or dev > worst:
            worst, worst_pair = dev, (p, q)
    return WitnessReport(max_deviation=worst, worst_pair=worst_pair, table=table,
                         failures=failures, n_pairs=len(pairs), total_pairs=total,
                         sampled=sampled, seed=seed)
