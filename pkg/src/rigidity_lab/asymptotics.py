"""
Truncated versions of the asymptotic objects attached to a surface carrying a net:
Busemann functions of rays, the ideal-boundary functions B_v and the gap
B^v - B_v, asymptotic directions, transport lines, distance-to-net decay and
area growth of geodesic discs.

Every limit is replaced by a truncation radius ``R`` chosen by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .distance import DistanceOptions, distance
from .errors import DomainError, InsufficientWindowError, MethodError
from .geodesic import GeodesicPath, initial_state, integrate, jacobi, shoot
from .metric import ConformalMetric
from .nets import DriftSequence, PointSet, best_in_band, narrow_drift
from .parallel import pmap


def _unit(v):
    vx, vy = float(v[0]), float(v[1])
    n = math.hypot(vx, vy)
    if not n > 0:
        raise DomainError("direction must be non-zero")
    return vx / n, vy / n


def _dist(metric, a, b, opts):
    if float(a[0]) == float(b[0]) and float(a[1]) == float(b[1]):
        return 0.0
    return distance(metric, a, b, opts).value


# ---------------------------------------------------------------------------
# Busemann function of a ray


def ray_sample_times(T: float, t_min: float = 1.0) -> list[float]:
    """Dyadic times 2^k in [t_min, T] together with T itself."""
    if not T > 0:
        raise DomainError("T must be positive")
    ts = []
    t = t_min
    while t < T:
        ts.append(t)
        t *= 2.0
    ts.append(float(T))
    return ts


def busemann_ray(metric: ConformalMetric, ray: GeodesicPath, x, T: float,
                 opts: Optional[DistanceOptions] = None, times: Optional[Sequence[float]] = None) -> float:
    """max over sampled t <= T of t - d(ray(t), x)."""
    if ray.length < T - 1e-9:
        raise DomainError(f"ray of length {ray.length} is shorter than T={T}")
    ts = list(times) if times is not None else ray_sample_times(T, t_min=min(1.0, T))
    pts = ray.point_at(np.array(ts))
    best = -math.inf
    for t, q in zip(ts, pts):
        best = max(best, t - _dist(metric, q, x, opts))
    return best


# ---------------------------------------------------------------------------
# ideal boundary


def far_point(L: PointSet, v, R: float, origin=(0.0, 0.0)):
    """Point q of L with |q - o| >= R and <q - o, v> in [R, 2R) minimising
    |q - o| - <q - o, v>, for o = ``origin``."""
    v = _unit(v)
    p, res = best_in_band(L, v, R, 2.0 * R, min_radius=R, origin=origin)
    if p is None:
        raise InsufficientWindowError(
            f"no point of the net reaches radius {R} in direction {v}; enlarge the window")
    return (float(p[0]), float(p[1])), res


@dataclass
class BusemannApprox:
    """d_p(x) = d(p, 0) - d(p, x) for one far drift point p towards v."""

    metric: ConformalMetric
    v: tuple
    R: float
    p: tuple
    residual: float
    base_value: float
    drift: Optional[DriftSequence] = None
    opts: Optional[DistanceOptions] = None
    mode: str = "net"

    def __call__(self, x) -> float:
        x = (float(x[0]), float(x[1]))
        if x == (0.0, 0.0):
            return 0.0
        return self.base_value - _dist(self.metric, self.p, x, self.opts)


def busemann_approx(metric: ConformalMetric, L: PointSet, v, R: float,
                    opts: Optional[DistanceOptions] = None, with_drift: bool = False) -> BusemannApprox:
    v = _unit(v)
    p, res = far_point(L, v, R)
    drift = narrow_drift(L, v, count=64) if with_drift else None
    return BusemannApprox(metric, v, R, p, res, _dist(metric, p, (0.0, 0.0), opts), drift, opts)


def ideal_B(metric: ConformalMetric, L: PointSet, v, R: float, x,
            opts: Optional[DistanceOptions] = None) -> float:
    """Truncated B_v(x): d(p, 0) - d(p, x) for the best drift point p at radius >= R."""
    return busemann_approx(metric, L, v, R, opts)(x)


def ideal_B_report(metric, L, v, R, points, opts=None) -> dict:
    """Values at R and R/2 for every point (stabilisation report)."""
    B = busemann_approx(metric, L, v, R, opts)
    Bh = busemann_approx(metric, L, v, R / 2.0, opts)
    vals = [B(x) for x in points]
    half = [Bh(x) for x in points]
    lin = [float(np.dot(x, B.v)) for x in points]
    return {
        "far_point": list(B.p), "far_residual": B.residual,
        "values": vals, "values_half_R": half, "linear": lin,
        "max_abs_linear_error": max((abs(a - b) for a, b in zip(vals, lin)), default=0.0),
        "stabilization": max((abs(a - b) for a, b in zip(vals, half)), default=0.0),
    }


@dataclass
class GapReport:
    gap: float
    min_gap: float
    values: list
    B_plus: list
    B_minus: list
    tolerance: float

    @property
    def ordered(self) -> bool:
        """B^v >= B_v up to tolerance at every sample."""
        return self.min_gap >= -self.tolerance


def singleton_gap(metric: ConformalMetric, L: PointSet, v, R: float, samples,
                  opts: Optional[DistanceOptions] = None, tolerance: float = 5e-2) -> GapReport:
    """max over samples of f_v = B^v - B_v with B^v = -B_{-v}, all truncated at R."""
    v = _unit(v)
    Bp = busemann_approx(metric, L, v, R, opts)
    Bm = busemann_approx(metric, L, (-v[0], -v[1]), R, opts)
    bp = [Bp(x) for x in samples]
    bm = [Bm(x) for x in samples]
    f = [-b - a for a, b in zip(bp, bm)]
    return GapReport(max(f), min(f), f, bp, bm, tolerance)


# ---------------------------------------------------------------------------
# asymptotic directions and transport lines


def direction_to_infinity(metric: ConformalMetric, p, v, L: PointSet, R: float,
                          opts: Optional[DistanceOptions] = None) -> np.ndarray:
    """Unit chart direction at ``p`` of the minimising geodesic to the far drift point for ``v``.

    The far point is selected relative to ``p`` (the shifted sequence q - p also
    drifts narrowly towards v), which removes the O(|p| / R) tilt of a
    point chosen relative to the origin.
    """
    q, _ = far_point(L, v, R, origin=p)
    return distance(metric, p, q, opts).departure


def _angle_diff(a, b):
    """Unsigned angle between two direction vectors."""
    return abs(math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1]))


@dataclass
class TransportTrace:
    path: GeodesicPath
    times: np.ndarray
    B: np.ndarray
    residuals: np.ndarray
    tolerance: float
    far_point: tuple

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0

    @property
    def valid(self) -> bool:
        return self.max_residual < self.tolerance


def transport_line(metric: ConformalMetric, L: PointSet, v, x, length: float, R: float,
                   n_samples: int = 11, tolerance: Optional[float] = None,
                   opts: Optional[DistanceOptions] = None, h: float = 1e-3) -> TransportTrace:
    """Geodesic through ``x`` along the asymptotic direction for ``v``, extended
    ``length / 2`` both ways, with growth residuals of the truncated B_v along it.

    The trace is parametrised from its backward end, so ``x`` sits at ``length / 2``.
    """
    if not length > 0:
        raise DomainError("length must be positive")
    B = busemann_approx(metric, L, v, R, opts)
    w = direction_to_infinity(metric, x, v, L, R, opts)
    half = 0.5 * length
    theta = math.atan2(w[1], w[0])
    back = shoot(metric, x, theta + math.pi, half, min(h, half))
    start = back.end
    v_end = back.v[-1]
    state = (float(start[0]), float(start[1]), -float(v_end[0]), -float(v_end[1]))
    _, drift, (t, p, vel) = integrate(metric, state, length, min(h, half))
    path = GeodesicPath(t=t, p=p, v=vel, h=min(h, half), metric=metric, max_speed_drift=drift)
    times = np.linspace(0.0, length, n_samples)
    pts = path.point_at(times)
    vals = np.array([B(q) for q in pts])
    i, j = np.triu_indices(n_samples, k=1)
    res = np.abs((vals[j] - vals[i]) - (times[j] - times[i]))
    if tolerance is None:
        tolerance = 1e-2 if metric.kind == "flat" else 5e-2
    return TransportTrace(path, times, vals, res, tolerance, B.p)


# ---------------------------------------------------------------------------
# distance to the net along rays


@dataclass
class DecayReport:
    radii: list
    ratios: list
    distances: list
    nearest: list
    direction: list
    warnings: list = field(default_factory=list)


def _window_reach(L: PointSet) -> float:
    x0, x1, y0, y1 = L.window
    return min(-x0, x1, -y0, y1)


def net_distance_decay(metric: ConformalMetric, L: PointSet, p, v, radii: Sequence[float],
                       R: Optional[float] = None, opts: Optional[DistanceOptions] = None,
                       k: int = 16, h: float = 1e-3) -> DecayReport:
    """d(gamma_{p,v}(t), L) / t for each t in ``radii``.

    gamma_{p,v} leaves p along :func:`direction_to_infinity`; the nearest net
    point is found among the ``k`` Euclidean-nearest candidates by exact
    metric distance.
    """
    radii = [float(t) for t in radii]
    if any(t <= 0 for t in radii):
        raise DomainError("radii must be positive")
    tmax = max(radii)
    reach = _window_reach(L)
    warnings = []
    if R is None:
        R = min(10.0 * tmax, reach / 2.0)
    w = direction_to_infinity(metric, p, v, L, R, opts)
    theta = math.atan2(w[1], w[0])
    ratios, dists, nearest = [], [], []
    for t in radii:
        state = initial_state(metric, p, theta)
        st, _, _ = integrate(metric, state, t, min(h, t), record=False)
        g = (st[0], st[1])
        if max(abs(g[0]), abs(g[1])) > reach:
            warnings.append(f"t={t}: geodesic point {g} leaves the window; result truncated")
        cands = L.nearest_candidates(g, k)
        if len(cands) == 0:
            raise InsufficientWindowError("net has no points near the geodesic")
        ds = [_dist(metric, g, c, opts) for c in cands]
        m = int(np.argmin(ds))
        dists.append(ds[m])
        nearest.append([float(cands[m][0]), float(cands[m][1])])
        ratios.append(ds[m] / t)
    return DecayReport(radii, ratios, dists, nearest, [float(w[0]), float(w[1])], warnings)


# ---------------------------------------------------------------------------
# area growth


@dataclass
class AreaReport:
    radii: list
    areas: list
    ratios: list
    method: str
    params: dict = field(default_factory=dict)


def _polar_task(args):
    metric, x, theta, rmax, h, radii = args
    path = shoot(metric, x, theta, rmax, min(h, rmax))
    jt = jacobi(metric, path)
    if jt.first_zero is not None and jt.first_zero <= rmax:
        return None, jt.first_zero
    t, J = jt.t, jt.J
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (J[1:] + J[:-1]) * np.diff(t))))
    out = []
    for r in radii:
        k = min(np.searchsorted(t, r, side="right") - 1, len(t) - 2)
        s = r - t[k]
        # J linear on the last partial interval
        Jr = J[k] + (J[k + 1] - J[k]) * s / (t[k + 1] - t[k])
        out.append(cum[k] + 0.5 * (J[k] + Jr) * s)
    return out, None


def _area_polar(metric, x, radii, n_theta, h, jobs):
    rmax = max(radii)
    thetas = 2.0 * math.pi * np.arange(n_theta) / n_theta
    res = pmap(_polar_task, [(metric, x, float(th), rmax, h, radii) for th in thetas], jobs)
    zeros = [(th, z) for th, (_, z) in zip(thetas, res) if z is not None]
    if zeros:
        th, z = min(zeros, key=lambda q: q[1])
        raise MethodError(f"conjugate point at arclength {z:.6g} along the geodesic leaving at "
                          f"angle {th:.6g}; polar Jacobi integration needs none within {rmax}")
    I = np.array([r for r, _ in res])  # (n_theta, n_radii), fixed order
    return list((2.0 * math.pi / n_theta) * I.sum(axis=0))


def _stencil(radius: int):
    vecs = []
    for i in range(0, radius + 1):
        for j in range(-radius, radius + 1):
            if (i == 0 and j <= 0) or math.gcd(i, abs(j)) != 1:
                continue
            vecs.append((i, j))
    return vecs


def grid_distance_field(metric: ConformalMetric, x, half_width: float, cells: int, stencil: int = 10):
    """Dijkstra distance from ``x`` on a (2 cells + 1)^2 grid centred at ``x``.

    Edges join nodes differing by a primitive stencil vector (|i|, |j| <= stencil);
    ``stencil=1`` is the 8-connected grid.  Edge weights are Simpson estimates of
    the conformal length of the straight segment.
    Returns ``(coords_x, coords_y, dist)``.
    """
    n = 2 * cells + 1
    hg = half_width / cells
    ax = float(x[0]) + hg * np.arange(-cells, cells + 1)
    ay = float(x[1]) + hg * np.arange(-cells, cells + 1)
    X, Y = np.meshgrid(ax, ay, indexing="ij")
    F = np.exp(metric.phi(np.stack((X, Y), axis=-1)))
    idx = np.arange(n * n).reshape(n, n)
    rows, cols, wts = [], [], []
    for i, j in _stencil(stencil):
        i0, i1 = max(0, -i), n - max(0, i)
        j0, j1 = max(0, -j), n - max(0, j)
        a = idx[i0:i1, j0:j1]
        b = idx[i0 + i:i1 + i, j0 + j:j1 + j]
        mid = np.stack((X[i0:i1, j0:j1] + 0.5 * i * hg, Y[i0:i1, j0:j1] + 0.5 * j * hg), axis=-1)
        fm = np.exp(metric.phi(mid))
        w = hg * math.hypot(i, j) * (F[i0:i1, j0:j1] + 4.0 * fm + F[i0 + i:i1 + i, j0 + j:j1 + j]) / 6.0
        rows.append(a.ravel()); cols.append(b.ravel()); wts.append(w.ravel())
    G = coo_matrix((np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(n * n, n * n)).tocsr()
    D = dijkstra(G, directed=False, indices=idx[cells, cells])
    return ax, ay, D.reshape(n, n)


def _area_grid(metric, x, radii, cells, stencil):
    out = []
    for r in radii:
        half = 1.25 * r
        for _ in range(8):
            ax, ay, D = grid_distance_field(metric, x, half, cells, stencil)
            hg = ax[1] - ax[0]
            X, Y = np.meshgrid(ax, ay, indexing="ij")
            phi = metric.phi(np.stack((X, Y), axis=-1))
            # cells straddling the sphere count fractionally; |grad D| = exp(phi)
            frac = np.clip(0.5 + (r - D) / (np.exp(phi) * hg), 0.0, 1.0)
            touched = frac > 0
            if not (touched[0].any() or touched[-1].any() or touched[:, 0].any() or touched[:, -1].any()):
                break
            half *= 1.5
        out.append(float(np.sum(np.exp(2.0 * phi) * frac) * hg * hg))
    return out


def area_growth(metric: ConformalMetric, x, radii: Sequence[float], method: str = "polar",
                n_theta: int = 256, h: float = 2e-3, cells: int = 120, stencil: int = 10,
                jobs: int = 1) -> AreaReport:
    """area(D_M(x, r)) / (pi r^2) for each r.

    ``polar`` integrates Jacobi fields over ``n_theta`` geodesics from ``x``
    (fails if a conjugate point occurs within max(radii)); ``grid`` sums
    exp(2 phi) over grid cells whose Dijkstra distance is below r, with cells
    on the boundary weighted by a linear ramp in (r - D).
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii):
        raise DomainError("radii must be positive")
    method = {"polarjacobi": "polar", "gridsum": "grid"}.get(method.lower(), method.lower())
    if method == "polar":
        areas = _area_polar(metric, x, radii, n_theta, h, jobs)
        params = {"n_theta": n_theta, "h": h}
    elif method == "grid":
        areas = _area_grid(metric, x, radii, cells, stencil)
        params = {"cells": cells, "stencil": stencil}
    else:
        raise DomainError(f"unknown area method {method!r}")
    areas = [float(a) for a in areas]
    ratios = [a / (math.pi * r * r) for a, r in zip(areas, radii)]
    return AreaReport(radii, areas, ratios, method, params)
