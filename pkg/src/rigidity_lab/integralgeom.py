"""
Integral geometry of oriented lines in the Euclidean plane.

An oriented line is (theta, p): direction u = (cos theta, sin theta) and signed
offset p, so the line is {p n + t u} with n = (-sin theta, cos theta).  The
rigid-motion invariant measure is d theta dp on [0, 2 pi) x R.  Lines meeting
the disk D(0, R0) have total mass 2 pi * 2 R0.

Under this normalization, for a convex region K,

    perimeter(K) = 1/2 * measure{lines meeting K}                (Crofton)
    area(K)      = 1/(2 pi) * integral of chord length            (Santalo)

and the unit circle gives perimeter 2 pi, which pins the constants.

Monte Carlo sums are formed per fixed-size batch and reduced in batch order,
so estimates depend on (N, seed) only, never on the number of workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError
from .parallel import pmap

BATCH = 1 << 16


@dataclass(frozen=True)
class OrientedLine:
    theta: float
    p: float

    def __post_init__(self):
        if not (0.0 <= self.theta < 2.0 * math.pi):
            raise DomainError(f"theta must lie in [0, 2pi), got {self.theta}")

    @property
    def direction(self):
        return (math.cos(self.theta), math.sin(self.theta))

    @property
    def normal(self):
        return (-math.sin(self.theta), math.cos(self.theta))


@dataclass(frozen=True)
class LineMeasureSampler:
    """theta ~ U[0, 2 pi), p ~ U(-R0, R0); every sample has weight mass / N."""

    R0: float
    N: int
    seed: int = 0

    def __post_init__(self):
        if not self.R0 > 0:
            raise DomainError("R0 must be positive")
        if self.N < 1:
            raise DomainError("N must be at least 1")

    @property
    def mass(self) -> float:
        return 2.0 * math.pi * 2.0 * self.R0

    def batches(self):
        """(batch index, size) pairs covering N samples."""
        out = []
        k, left = 0, self.N
        while left > 0:
            m = min(BATCH, left)
            out.append((k, m))
            left -= m
            k += 1
        return out

    def batch(self, k: int, m: int):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, k])))
        theta = rng.uniform(0.0, 2.0 * math.pi, m)
        p = rng.uniform(-self.R0, self.R0, m)
        return theta, p

    def lines(self):
        """All sampled lines as two arrays (theta, p)."""
        parts = [self.batch(k, m) for k, m in self.batches()]
        return np.concatenate([a for a, _ in parts]), np.concatenate([b for _, b in parts])


# ---------------------------------------------------------------------------
# regions


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True)
class Polygon:
    """Convex polygon with counterclockwise vertices (checked)."""

    vertices: tuple

    def __post_init__(self):
        V = tuple((float(x), float(y)) for x, y in self.vertices)
        n = len(V)
        if n < 3:
            raise DomainError("polygon needs at least 3 vertices")
        for i in range(n):
            if _cross(V[i], V[(i + 1) % n], V[(i + 2) % n]) < 0:
                raise DomainError("polygon must be convex and counterclockwise")
        if self.area() <= 0:
            raise DomainError("polygon has zero area")
        object.__setattr__(self, "vertices", V)

    def area(self) -> float:
        V = self.vertices
        n = len(V)
        return 0.5 * sum(V[i][0] * V[(i + 1) % n][1] - V[(i + 1) % n][0] * V[i][1] for i in range(n))

    def perimeter(self) -> float:
        V = self.vertices
        n = len(V)
        return sum(math.dist(V[i], V[(i + 1) % n]) for i in range(n))

    def radius(self) -> float:
        return max(math.hypot(x, y) for x, y in self.vertices)

    def scaled(self, s: float) -> "Polygon":
        return Polygon(tuple((s * x, s * y) for x, y in self.vertices))

    def rotated(self, angle: float) -> "Polygon":
        c, s = math.cos(angle), math.sin(angle)
        return Polygon(tuple((c * x - s * y, s * x + c * y) for x, y in self.vertices))

    def chords(self, theta, p) -> np.ndarray:
        """Exact chord lengths by clipping each line against every edge half-plane."""
        ux, uy = np.cos(theta), np.sin(theta)
        nx, ny = -uy, ux
        ox, oy = p * nx, p * ny
        lo = np.full(theta.shape, -np.inf)
        hi = np.full(theta.shape, np.inf)
        inside = np.ones(theta.shape, dtype=bool)
        V = self.vertices
        n = len(V)
        for i in range(n):
            ax, ay = V[i]
            bx, by = V[(i + 1) % n]
            # interior is to the left of a->b: (b - a) x (q - a) >= 0
            ex, ey = bx - ax, by - ay
            c0 = ex * (oy - ay) - ey * (ox - ax)   # value at t = 0
            c1 = ex * uy - ey * ux                 # d/dt
            pos, neg, zer = c1 > 0, c1 < 0, c1 == 0
            t = np.divide(-c0, c1, out=np.zeros_like(c0), where=~zer)
            lo = np.where(pos, np.maximum(lo, t), lo)
            hi = np.where(neg, np.minimum(hi, t), hi)
            inside &= ~(zer & (c0 < 0))
        return np.where(inside, np.maximum(hi - lo, 0.0), 0.0)

    def to_spec(self) -> dict:
        return {"polygon": [list(v) for v in self.vertices]}


@dataclass(frozen=True)
class Disk:
    c: tuple
    r: float

    def __post_init__(self):
        if not self.r >= 0:
            raise DomainError("disk radius must be nonnegative")
        object.__setattr__(self, "c", (float(self.c[0]), float(self.c[1])))
        object.__setattr__(self, "r", float(self.r))

    def area(self) -> float:
        return math.pi * self.r ** 2

    def perimeter(self) -> float:
        return 2.0 * math.pi * self.r

    def radius(self) -> float:
        return math.hypot(*self.c) + self.r

    def scaled(self, s: float) -> "Disk":
        return Disk((s * self.c[0], s * self.c[1]), s * self.r)

    def rotated(self, angle: float) -> "Disk":
        c, s = math.cos(angle), math.sin(angle)
        x, y = self.c
        return Disk((c * x - s * y, s * x + c * y), self.r)

    def chords(self, theta, p) -> np.ndarray:
        # distance from the centre to the line is |p - <c, n>|
        dist = p - (-np.sin(theta) * self.c[0] + np.cos(theta) * self.c[1])
        h2 = self.r * self.r - dist * dist
        return np.where(h2 > 0, 2.0 * np.sqrt(np.maximum(h2, 0.0)), 0.0)

    def to_spec(self) -> dict:
        return {"disk": {"c": list(self.c), "r": self.r}}


ConvexRegion = Union[Polygon, Disk]


def region_from_spec(spec: dict):
    if not isinstance(spec, dict) or len(spec) != 1:
        raise DomainError('region must be {"polygon": [...]} or {"disk": {...}}')
    (kind, body), = spec.items()
    if kind == "polygon":
        return Polygon(tuple(tuple(v) for v in body))
    if kind == "disk":
        extra = set(body) - {"c", "r"}
        if extra:
            raise DomainError(f"unknown disk keys: {sorted(extra)}")
        return Disk(tuple(body["c"]), body["r"])
    raise DomainError(f"unknown region kind {kind!r}")


def read_region(path: str):
    with open(path) as fh:
        return region_from_spec(json.load(fh))


# ---------------------------------------------------------------------------
# estimators


@dataclass
class Estimate:
    value: float
    stderr: float
    N: int
    seed: int

    def within(self, exact: float, k: float = 3.0) -> bool:
        return abs(self.value - exact) <= k * self.stderr

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "N": self.N, "seed": self.seed}


def _check_inside(region, sampler):
    if region.radius() > sampler.R0:
        raise DomainError(f"region reaches radius {region.radius()!r}, outside the "
                          f"sampling disk of radius {sampler.R0!r}")


def _batch_sums(args):
    region, sampler, k, m = args
    theta, p = sampler.batch(k, m)
    c = region.chords(theta, p)
    hit = (c > 0).astype(float)
    return float(hit.sum()), float(c.sum()), float((c * c).sum())


def _sums(region, sampler, jobs):
    parts = pmap(_batch_sums, [(region, sampler, k, m) for k, m in sampler.batches()], jobs)
    hits = chord = chord2 = 0.0
    for a, b, c in parts:
        hits += a
        chord += b
        chord2 += c
    return hits, chord, chord2


def crofton_perimeter(region, sampler: LineMeasureSampler, jobs: int = 1) -> Estimate:
    """Perimeter as 1/2 * mass * (fraction of sampled lines meeting the region)."""
    _check_inside(region, sampler)
    hits, _, _ = _sums(region, sampler, jobs)
    N = sampler.N
    f = hits / N
    scale = 0.5 * sampler.mass
    return Estimate(scale * f, scale * math.sqrt(f * (1.0 - f) / N), N, sampler.seed)


def santalo_area(region, sampler: LineMeasureSampler, jobs: int = 1) -> Estimate:
    """Area as mass / (2 pi) * (mean chord length, misses counted as 0)."""
    _check_inside(region, sampler)
    _, s1, s2 = _sums(region, sampler, jobs)
    N = sampler.N
    mean = s1 / N
    var = max(s2 / N - mean * mean, 0.0) * N / max(N - 1, 1)
    scale = sampler.mass / (2.0 * math.pi)
    return Estimate(scale * mean, scale * math.sqrt(var / N), N, sampler.seed)


def circle_identity(radii: Sequence[float] = (0.5, 1.0, 1.5), N: int = 10 ** 6, seed: int = 0,
                    R0: float = 2.0, jobs: int = 1) -> list:
    """Crofton estimate of each centred circle divided by 2 pi rho, with its error."""
    out = []
    sampler = LineMeasureSampler(R0=R0, N=N, seed=seed)
    for rho in radii:
        est = crofton_perimeter(Disk((0.0, 0.0), rho), sampler, jobs)
        exact = 2.0 * math.pi * rho
        out.append({"rho": rho, "ratio": est.value / exact, "stderr": est.stderr / exact,
                    "within_3se": est.within(exact)})
    return out


# ---------------------------------------------------------------------------
# scaled area on a curved surface


@dataclass
class AreaContinuityReport:
    radii: list
    mu: list            # pi * area ratio
    ratios: list        # the delegated area_growth ratios, unchanged
    deviations: list    # |mu - pi|
    method: str
    params: dict

    @property
    def decreasing(self) -> bool:
        d = self.deviations
        return all(b < a for a, b in zip(d, d[1:]))

    def to_dict(self) -> dict:
        return {"radii": self.radii, "mu": self.mu, "ratios": self.ratios,
                "deviations": self.deviations, "method": self.method, "params": self.params,
                "decreasing": self.decreasing}


def area_continuity(metric, radii, method: str = "grid", resolution: Optional[int] = None,
                    jobs: int = 1) -> AreaContinuityReport:
    """mu_r(D) = area(D_M(0, r)) / r^2 for each r, with |mu_r - pi|.

    ``resolution`` is the number of grid cells per half-width (grid) or the
    number of geodesic directions (polar).
    """
    from .asymptotics import area_growth

    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise DomainError("radii must be strictly increasing")
    kw = {}
    if resolution is not None:
        kw["cells" if method.lower() in ("grid", "gridsum") else "n_theta"] = int(resolution)
    rep = area_growth(metric, (0.0, 0.0), radii, method=method, jobs=jobs, **kw)
    mu = [math.pi * q for q in rep.ratios]
    return AreaContinuityReport(radii=radii, mu=mu, ratios=list(rep.ratios),
                                deviations=[abs(m - math.pi) for m in mu],
                                method=rep.method, params=rep.params)
