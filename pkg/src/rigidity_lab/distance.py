"""
Two-point geodesic distance, distance matrices and the rescaled metrics d_r.

Pipeline for ``distance(x, y)``:

1. straight chord (exact when every bump amplitude is >= 0 and the chord
   misses all supports, or the metric is flat);
2. discrete path relaxation to estimate the departure angle;
3. secant iteration on the departure angle until the geodesic's closest
   approach to ``y`` is within tolerance;
4. on failure, multi-start secant from 8 angles around the chord direction.

The minimum over converged candidates is returned; global minimality is not
certified.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .errors import DomainError, SolverError
from .geodesic import GeodesicPath, initial_state, integrate, step, _flat_run
from .metric import ConformalMetric, polyline_length
from .parallel import pmap

log = logging.getLogger(__name__)


@dataclass
class DistanceOptions:
    tol: float = 1e-8
    multistart: int = 8
    h: float = 1e-3
    relax_nodes: int = 256
    relax_iters: int = 500
    max_secant: int = 40


@dataclass
class DistanceResult:
    """Length of a locally minimising geodesic between ``x`` and ``y``.

    The path is integrated on first access to ``path``; ``departure`` is the
    unit chart direction at ``x``.
    """

    value: float
    x: tuple
    y: tuple
    metric: ConformalMetric
    departure: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    h: float = 1e-3
    _theta: float = 0.0
    _origin: tuple = ()
    _reversed: bool = False
    _path: Optional[GeodesicPath] = None

    @property
    def path(self) -> GeodesicPath:
        if self._path is None:
            state = initial_state(self.metric, self._origin, self._theta)
            if self.value == 0.0:
                raise DomainError("zero-length path")
            h = min(self.h, self.value)
            _, drift, (t, p, v) = integrate(self.metric, state, self.value, h)
            path = GeodesicPath(t=t, p=p, v=v, h=h, metric=self.metric, max_speed_drift=drift)
            self._path = path.reversed() if self._reversed else path
        return self._path


# ---------------------------------------------------------------------------
# discrete path relaxation


def _energy_and_grad(metric: ConformalMetric, P: np.ndarray):
    """Discrete energy sum w(mid) |dP|^2 (w = exp(2 phi)) and its gradient w.r.t. P."""
    d = np.diff(P, axis=0)
    mid = 0.5 * (P[:-1] + P[1:])
    w = np.exp(2.0 * metric.phi(mid))
    gw = 2.0 * w[:, None] * metric.grad_phi(mid)
    sq = np.sum(d * d, axis=1)
    E = float(np.sum(w * sq))
    common = 0.5 * sq[:, None] * gw
    G = np.zeros_like(P)
    G[1:] += 2.0 * w[:, None] * d + common
    G[:-1] += -2.0 * w[:, None] * d + common
    return E, G


def relax_path(metric: ConformalMetric, x, y, nodes: int = 256, max_iter: int = 500,
               init: Optional[np.ndarray] = None, gtol: float = 1e-13):
    """Minimise the discrete path energy between fixed endpoints.

    Gradient descent with Armijo backtracking on the H^1-preconditioned
    gradient (the tridiagonal second-difference operator is inverted each step).
    Returns ``(polyline, length, iterations)``; the length is the conformal
    length of the polyline.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if init is None:
        s = np.linspace(0.0, 1.0, nodes + 1)[:, None]
        P = x + s * (y - x)
    else:
        P = _resample(init, nodes)
    n_in = nodes - 1
    ab = np.zeros((3, n_in))
    ab[0, 1:] = -1.0
    ab[1, :] = 2.0
    ab[2, :-1] = -1.0
    E, G = _energy_and_grad(metric, P)
    it = 0
    for it in range(1, max_iter + 1):
        g = G[1:-1]
        dirn = -solve_banded((1, 1), ab, g) * 0.5
        slope = float(np.sum(g * dirn))
        if -slope < gtol * max(E, 1e-300):
            break
        a = 1.0
        while True:
            Q = P.copy()
            Q[1:-1] += a * dirn
            E2, G2 = _energy_and_grad(metric, Q)
            if E2 <= E + 1e-4 * a * slope or a < 1e-12:
                break
            a *= 0.5
        if E2 >= E:
            break
        P, E, G = Q, E2, G2
    return P, polyline_length(metric, P), it


def _resample(P: np.ndarray, nodes: int) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    if s[-1] == 0:
        return np.repeat(P[:1], nodes + 1, axis=0)
    q = np.linspace(0.0, s[-1], nodes + 1)
    return np.column_stack((np.interp(q, s, P[:, 0]), np.interp(q, s, P[:, 1])))


def relaxation_length(metric: ConformalMetric, x, y, nodes: int = 512, max_iter: int = 4000):
    """Relaxation estimate of d(x, y), refined coarse to fine (32 nodes doubling to ``nodes``)."""
    P = None
    n = 32
    while True:
        n = min(n, nodes)
        P, L, _ = relax_path(metric, x, y, nodes=n, max_iter=max_iter, init=P)
        if n >= nodes:
            return L, P
        n *= 2


# ---------------------------------------------------------------------------
# shooting


def _shoot_to(metric: ConformalMetric, x, theta: float, y, h: float, Lmax: float):
    """Integrate from x at angle theta up to the closest approach to y.

    Returns ``(signed_miss, arclength, final_state)`` or ``None`` if the
    geodesic does not pass y within ``Lmax``.
    """
    yx, yy = float(y[0]), float(y[1])
    state = initial_state(metric, x, theta)
    sx, sy, vx, vy = state
    k = 0
    kmax = int(math.ceil(Lmax / h))

    def along(st):
        return (yx - st[0]) * st[2] + (yy - st[1]) * st[3]

    while k < kmax:
        n = _flat_run(metric, sx, sy, vx, vy, h, kmax - k)
        if n > 0:
            sp = math.hypot(vx, vy)
            s_ca = along((sx, sy, vx, vy)) / (sp * sp)  # chart distance to closest approach
            if s_ca <= n * h:
                if s_ca < 0:
                    s_ca = 0.0
                m = int(math.floor(s_ca / h))
                tau = s_ca - m * h
                ex, ey = sx + s_ca * vx, sy + s_ca * vy
                st = (ex, ey, vx, vy)
                return _miss(st, yx, yy), (k + m) * h + tau, st
            sx, sy = sx + n * h * vx, sy + n * h * vy
            k += n
            continue
        prev = (sx, sy, vx, vy)
        g0 = along(prev)
        cur, _ = step(metric, prev, h)
        g1 = along(cur)
        if g1 <= 0.0:
            if g0 <= 0.0:
                tau, st = 0.0, prev
            else:
                tau = brentq(lambda s: along(step(metric, prev, s)[0]) if s > 0 else g0,
                             0.0, h, xtol=1e-16, rtol=1e-15, maxiter=100)
                st = step(metric, prev, tau)[0] if tau > 0 else prev
            return _miss(st, yx, yy), k * h + tau, st
        sx, sy, vx, vy = cur
        k += 1
    return None


def _miss(st, yx, yy):
    sp = math.hypot(st[2], st[3])
    return (st[2] * (yy - st[1]) - st[3] * (yx - st[0])) / sp


def _secant(metric, x, y, theta0, theta1, h, Lmax, tol, max_iter):
    """Secant iteration on the departure angle.  Returns (theta, length, miss, iters) or
    (None, None, best_miss, iters)."""
    r0 = _shoot_to(metric, x, theta0, y, h, Lmax)
    if r0 is None:
        return None, None, math.inf, 0
    if abs(r0[0]) < tol:
        return theta0, r0[1], r0[0], 0
    best = abs(r0[0])
    r1 = _shoot_to(metric, x, theta1, y, h, Lmax)
    for it in range(1, max_iter + 1):
        if r1 is None:
            return None, None, best, it
        best = min(best, abs(r1[0]))
        if abs(r1[0]) < tol:
            return theta1, r1[1], r1[0], it
        denom = r1[0] - r0[0]
        if denom == 0.0:
            return None, None, best, it
        dtheta = -r1[0] * (theta1 - theta0) / denom
        dtheta = max(-0.5, min(0.5, dtheta))
        theta0, r0 = theta1, r1
        theta1 = theta1 + dtheta
        if dtheta == 0.0:
            return None, None, best, it
        r1 = _shoot_to(metric, x, theta1, y, h, Lmax)
    return None, None, best, max_iter


def distance(metric: ConformalMetric, x, y, opts: Optional[DistanceOptions] = None) -> DistanceResult:
    """Riemannian distance d(x, y) by relaxation-seeded geodesic shooting."""
    opts = opts or DistanceOptions()
    x = (float(x[0]), float(x[1]))
    y = (float(y[0]), float(y[1]))
    if not all(math.isfinite(c) for c in x + y):
        raise DomainError("non-finite query point")
    if x == y:
        raise DomainError("distance needs two distinct points")
    # canonical order makes d(x, y) and d(y, x) bitwise equal
    rev = y < x
    a, b = (y, x) if rev else (x, y)
    chord = math.hypot(b[0] - a[0], b[1] - a[1])
    theta_c = math.atan2(b[1] - a[1], b[0] - a[0])
    diag = {"method": "chord", "iterations": 0, "angle_residual": 0.0, "branches": []}

    if metric.kind == "flat" or (metric.nonnegative and metric.has_compact_support
                                 and not metric.segment_hits_support(a, b)):
        theta, length, end_v = theta_c, chord, (math.cos(theta_c), math.sin(theta_c))
    else:
        theta, length, end_v = _solve(metric, a, b, chord, theta_c, opts, diag)

    if rev:
        dep = -np.asarray(end_v) / math.hypot(*end_v)
    else:
        dep = np.array([math.cos(theta), math.sin(theta)])
    return DistanceResult(value=length, x=x, y=y, metric=metric, departure=dep,
                          diagnostics=diag, h=opts.h, _theta=theta, _origin=a, _reversed=rev)


def _solve(metric, a, b, chord, theta_c, opts, diag):
    h = opts.h
    P, L_relax, iters = relax_path(metric, a, b, nodes=opts.relax_nodes, max_iter=opts.relax_iters)
    d0 = P[1] - P[0]
    theta_r = math.atan2(d0[1], d0[0])
    Lmax = 2.0 * L_relax + 10.0
    diag["relax_length"] = L_relax
    diag["relax_iterations"] = iters
    eps = 1e-5 / max(1.0, chord)
    th, length, miss, it = _secant(metric, a, b, theta_r, theta_r + eps, h, Lmax, opts.tol, opts.max_secant)
    diag["iterations"] = it
    if th is not None:
        diag["method"] = "shooting"
        diag["angle_residual"] = abs(miss)
        diag["branches"] = [length]
        return th, length, _end_velocity(metric, a, th, b, h, Lmax)

    best_miss = miss
    cands = []
    offsets = np.linspace(-0.6, 0.6, opts.multistart) if opts.multistart > 1 else [0.0]
    for off in offsets:
        t0 = theta_c + float(off)
        th, length, miss, it = _secant(metric, a, b, t0, t0 + eps, h, Lmax, opts.tol, opts.max_secant)
        diag["iterations"] += it
        if th is None:
            best_miss = min(best_miss, miss)
            continue
        cands.append((length, th, miss))
    if not cands:
        raise SolverError(f"no shooting candidate converged between {a} and {b}",
                          best_residual=best_miss, pair=(a, b))
    cands.sort()
    diag["method"] = "multistart"
    diag["branches"] = [c[0] for c in cands]
    length, th, miss = cands[0]
    diag["angle_residual"] = abs(miss)
    return th, length, _end_velocity(metric, a, th, b, h, Lmax)


def _end_velocity(metric, a, theta, b, h, Lmax):
    r = _shoot_to(metric, a, theta, b, h, Lmax)
    st = r[2]
    return (st[2], st[3])


# ---------------------------------------------------------------------------
# matrices


def _pair_task(args):
    metric, p, q, opts = args
    try:
        return distance(metric, p, q, opts).value, None
    except SolverError as e:
        return math.nan, (str(e), e.best_residual)


def distance_matrix(metric: ConformalMetric, points: Sequence, jobs: int = 1,
                    opts: Optional[DistanceOptions] = None) -> np.ndarray:
    """Symmetric matrix of pairwise distances; identical for any ``jobs``.

    Unordered pairs are enumerated once in (i, j), i < j order.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    n = len(pts)
    if len(set(pts)) != n:
        raise DomainError("points must be pairwise distinct")
    D = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    results = pmap(_pair_task, [(metric, pts[i], pts[j], opts) for i, j in pairs], jobs)
    for (i, j), (d, err) in zip(pairs, results):
        if err is not None:
            raise SolverError(f"pair ({i}, {j}): {err[0]}", best_residual=err[1], pair=(i, j))
        D[i, j] = D[j, i] = d
    return D


def write_matrix_csv(D: np.ndarray, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    n = D.shape[0]
    w.writerow([""] + [str(i) for i in range(n)])
    for i in range(n):
        w.writerow([str(i)] + [repr(float(v)) for v in D[i]])


def read_matrix_csv(fh) -> np.ndarray:
    rows = [r for r in csv.reader(fh) if r]
    body = [[float(v) for v in r[1:]] for r in rows[1:]]
    D = np.array(body, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DomainError("distance matrix CSV must be square")
    if not np.array_equal(D, D.T):
        raise DomainError("distance matrix CSV must be symmetric")
    return D


# ---------------------------------------------------------------------------
# rescaled metrics


@dataclass
class ScaledMetric:
    """d_r(x, y) = d(T_r x, T_r y) / r with T_r(a v) = gamma_{0, v}(a r).

    ``gamma_{0, v}`` leaves ``base`` along the asymptotic direction for ``v``
    computed by :func:`rigidity_lab.asymptotics.direction_to_infinity` against
    ``net`` at truncation radius ``R``.
    """

    metric: ConformalMetric
    r: float
    net: object = None
    base: tuple = (0.0, 0.0)
    R: float = 1000.0
    opts: Optional[DistanceOptions] = None
    _directions: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"scale must be positive, got {self.r}")
        if self.net is None:
            from .nets import PointSet
            w = 4.0 * self.R
            self.net = PointSet.lattice(1.0, (-w, w, -w, w))

    def direction(self, v) -> np.ndarray:
        from .asymptotics import direction_to_infinity
        key = (float(v[0]), float(v[1]))
        if key not in self._directions:
            self._directions[key] = direction_to_infinity(
                self.metric, self.base, key, self.net, self.R, opts=self.opts)
        return self._directions[key]

    def T(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a = float(np.hypot(x[0], x[1]))
        if a == 0.0:
            return np.asarray(self.base, dtype=float)
        w = self.direction(x / a)
        length = a * self.r
        h = (self.opts or DistanceOptions()).h
        state = initial_state(self.metric, self.base, math.atan2(w[1], w[0]))
        st, _, _ = integrate(self.metric, state, length, min(h, length), record=False)
        return np.array(st[:2])


def scaled_distance(sm: ScaledMetric, x, y) -> float:
    p, q = sm.T(x), sm.T(y)
    if np.array_equal(p, q):
        return 0.0
    return distance(sm.metric, p, q, sm.opts).value / sm.r
