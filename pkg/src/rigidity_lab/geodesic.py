"""
Unit-speed geodesics of a conformal metric and the scalar Jacobi equation along them.

The geodesic ODE in the chart is

    x'' = -(phi_x (x'^2 - y'^2) + 2 phi_y x' y')
    y'' = -(phi_y (y'^2 - x'^2) + 2 phi_x x' y')

integrated with fixed-step classical RK4.  After each step the chart velocity is
rescaled so that ``exp(phi) |v| = 1``; the pre-rescale defect is kept as a
diagnostic.  Where the metric is exactly flat (outside every bump support) whole
steps are taken analytically along the straight line, which is what RK4 would
produce anyway, so samples stay on the ``k * h`` grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError
from .metric import ConformalMetric


@dataclass
class GeodesicPath:
    """Arclength-sampled geodesic.

    ``t[k] = k * h`` except possibly the last sample (partial step).  ``v`` is the
    chart velocity, of unit metric norm.
    """

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    h: float
    metric: ConformalMetric
    max_speed_drift: float = 0.0

    @property
    def length(self) -> float:
        return float(self.t[-1])

    @property
    def start(self) -> np.ndarray:
        return self.p[0]

    @property
    def end(self) -> np.ndarray:
        return self.p[-1]

    @property
    def departure_direction(self) -> np.ndarray:
        """Unit chart direction of the initial velocity."""
        v = self.v[0]
        return v / math.hypot(v[0], v[1])

    def speed(self) -> np.ndarray:
        """Metric norm of every sampled velocity."""
        return np.exp(self.metric.phi(self.p)) * np.linalg.norm(self.v, axis=1)

    def point_at(self, s) -> np.ndarray:
        """Cubic Hermite interpolation of the position at arclength(s) ``s``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s < -1e-12) or np.any(s > self.length + 1e-12):
            raise DomainError("arclength outside the traced interval")
        k = np.clip(np.searchsorted(self.t, s, side="right") - 1, 0, len(self.t) - 2)
        t0, t1 = self.t[k], self.t[k + 1]
        dt = t1 - t0
        u = ((s - t0) / dt)[:, None]
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        out = (h00 * self.p[k] + h10 * dt[:, None] * self.v[k]
               + h01 * self.p[k + 1] + h11 * dt[:, None] * self.v[k + 1])
        return out

    def reversed(self) -> "GeodesicPath":
        T = self.length
        return GeodesicPath(
            t=T - self.t[::-1], p=self.p[::-1].copy(), v=-self.v[::-1], h=self.h,
            metric=self.metric, max_speed_drift=self.max_speed_drift,
        )

    def write_csv(self, fh) -> None:
        """Rows ``t,x,y,vx,vy`` with a header line."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "y", "vx", "vy"])
        for t, p, v in zip(self.t, self.p, self.v):
            w.writerow([repr(float(t)), repr(float(p[0])), repr(float(p[1])),
                        repr(float(v[0])), repr(float(v[1]))])


@dataclass
class JacobiTrace:
    t: np.ndarray
    J: np.ndarray
    dJ: np.ndarray
    first_zero: Optional[float] = None

    @property
    def values(self) -> np.ndarray:
        return self.J


# ---------------------------------------------------------------------------
# integrator core


def _rk4(metric: ConformalMetric, x, y, vx, vy, h):
    g = metric.grad_phi_xy

    def acc(px, py, ux, uy):
        gx, gy = g(px, py)
        return (-(gx * (ux * ux - uy * uy) + 2.0 * gy * ux * uy),
                -(gy * (uy * uy - ux * ux) + 2.0 * gx * ux * uy))

    a1x, a1y = acc(x, y, vx, vy)
    hh = 0.5 * h
    x2, y2 = x + hh * vx, y + hh * vy
    v2x, v2y = vx + hh * a1x, vy + hh * a1y
    a2x, a2y = acc(x2, y2, v2x, v2y)
    x3, y3 = x + hh * v2x, y + hh * v2y
    v3x, v3y = vx + hh * a2x, vy + hh * a2y
    a3x, a3y = acc(x3, y3, v3x, v3y)
    x4, y4 = x + h * v3x, y + h * v3y
    v4x, v4y = vx + h * a3x, vy + h * a3y
    a4x, a4y = acc(x4, y4, v4x, v4y)
    h6 = h / 6.0
    nx = x + h6 * (vx + 2.0 * v2x + 2.0 * v3x + v4x)
    ny = y + h6 * (vy + 2.0 * v2y + 2.0 * v3y + v4y)
    nvx = vx + h6 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
    nvy = vy + h6 * (a1y + 2.0 * a2y + 2.0 * a3y + a4y)
    return nx, ny, nvx, nvy


def _renormalize(metric, x, y, vx, vy):
    speed = math.exp(metric.phi_xy(x, y)) * math.hypot(vx, vy)
    f = 1.0 / speed
    return vx * f, vy * f, abs(speed - 1.0)


def step(metric: ConformalMetric, state, h):
    """One renormalised RK4 step; returns (new_state, speed_defect)."""
    x, y, vx, vy = _rk4(metric, *state, h)
    vx, vy, drift = _renormalize(metric, x, y, vx, vy)
    return (x, y, vx, vy), drift


def _flat_run(metric: ConformalMetric, x, y, vx, vy, h, max_steps):
    """Number of whole steps that can be taken analytically from (x, y)."""
    if metric.kind == "flat":
        return max_steps
    if not metric.has_compact_support or not metric.is_flat_at(x, y):
        return 0
    speed = math.hypot(vx, vy)
    s = metric.ray_entry_time(x, y, vx / speed, vy / speed)
    if math.isinf(s):
        return max_steps
    return min(max_steps, int(math.floor(s / h * (1.0 - 1e-12))))


def initial_state(metric: ConformalMetric, x0, theta0: float):
    x, y = float(x0[0]), float(x0[1])
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta0)):
        raise DomainError("non-finite start point or angle")
    s = math.exp(-metric.phi_xy(x, y))
    return (x, y, s * math.cos(theta0), s * math.sin(theta0))


def _check_args(T, h):
    if not (math.isfinite(T) and math.isfinite(h)):
        raise DomainError("non-finite length or step")
    if h <= 0:
        raise DomainError(f"step must be positive, got {h}")
    if T <= 0:
        raise DomainError(f"length must be positive, got {T}")
    if h > T:
        raise DomainError(f"step {h} exceeds length {T}")


def integrate(metric: ConformalMetric, state, T: float, h: float, flat_skip: bool = True,
              record: bool = True):
    """Integrate from ``state`` for arclength ``T``.

    Returns ``(final_state, drift, samples)`` where ``samples`` is a tuple of
    arrays ``(t, p, v)`` when ``record`` is set, else None.
    """
    n_full = int(math.floor(T / h * (1.0 + 1e-14)))
    if n_full * h > T:
        n_full -= 1
    tail = T - n_full * h
    if tail < 1e-12 * max(1.0, T):
        tail = 0.0

    chunks_p, chunks_v, chunks_k = [], [], []
    x, y, vx, vy = state
    if record:
        chunks_k.append(np.array([0]))
        chunks_p.append(np.array([[x, y]]))
        chunks_v.append(np.array([[vx, vy]]))
    drift = 0.0
    k = 0
    buf_k, buf_p, buf_v = [], [], []

    def flush():
        if buf_k:
            chunks_k.append(np.array(buf_k))
            chunks_p.append(np.array(buf_p))
            chunks_v.append(np.array(buf_v))
            buf_k.clear(); buf_p.clear(); buf_v.clear()

    while k < n_full:
        n = _flat_run(metric, x, y, vx, vy, h, n_full - k) if flat_skip else 0
        if n > 0:
            if record:
                flush()
                j = np.arange(1, n + 1)
                chunks_k.append(k + j)
                chunks_p.append(np.column_stack((x + j * h * vx, y + j * h * vy)))
                chunks_v.append(np.tile([vx, vy], (n, 1)))
            x, y = x + n * h * vx, y + n * h * vy
            k += n
            continue
        (x, y, vx, vy), d = step(metric, (x, y, vx, vy), h)
        drift = max(drift, d)
        k += 1
        if record:
            buf_k.append(k); buf_p.append((x, y)); buf_v.append((vx, vy))
    flush()

    if tail > 0.0:
        (x, y, vx, vy), d = step(metric, (x, y, vx, vy), tail)
        drift = max(drift, d)
    final = (x, y, vx, vy)
    if not record:
        return final, drift, None

    ks = np.concatenate(chunks_k)
    t = ks * h
    p = np.concatenate(chunks_p)
    v = np.concatenate(chunks_v)
    if tail > 0.0:
        t = np.append(t, T)
        p = np.vstack((p, [x, y]))
        v = np.vstack((v, [vx, vy]))
    return final, drift, (t, p, v)


def shoot(metric: ConformalMetric, x0, theta0: float, T: float, h: float = 1e-3,
          flat_skip: bool = True) -> GeodesicPath:
    """Unit-speed geodesic from ``x0`` leaving at chart angle ``theta0`` for arclength ``T``."""
    _check_args(T, h)
    state = initial_state(metric, x0, theta0)
    _, drift, (t, p, v) = integrate(metric, state, T, h, flat_skip=flat_skip)
    return GeodesicPath(t=t, p=p, v=v, h=h, metric=metric, max_speed_drift=drift)


def shoot_from_state(metric: ConformalMetric, state, T: float, h: float = 1e-3,
                     flat_skip: bool = True) -> GeodesicPath:
    _check_args(T, h)
    x, y, vx, vy = state
    vx, vy, _ = _renormalize(metric, x, y, vx, vy)
    _, drift, (t, p, v) = integrate(metric, (x, y, vx, vy), T, h, flat_skip=flat_skip)
    return GeodesicPath(t=t, p=p, v=v, h=h, metric=metric, max_speed_drift=drift)


# ---------------------------------------------------------------------------
# Jacobi fields


def jacobi(metric: ConformalMetric, path: GeodesicPath) -> JacobiTrace:
    """Solve J'' + K(gamma(t)) J = 0, J(0) = 0, J'(0) = 1 along ``path``.

    K at RK4 half steps is read at the cubic Hermite midpoint of each sample
    interval.  Intervals where K vanishes at both ends and the midpoint, and the
    metric is flat there, are propagated linearly.
    """
    t, p, v = path.t, path.p, path.v
    n = len(t)
    if n < 2:
        raise DomainError("path needs at least two samples")
    dt = np.diff(t)
    mid = 0.5 * (p[:-1] + p[1:]) + (dt / 8.0)[:, None] * (v[:-1] - v[1:])
    K = metric.curvature(p)
    Km = metric.curvature(mid)
    flat = metric.flat_mask(p)
    flat_mid = metric.flat_mask(mid)
    lin = flat[:-1] & flat[1:] & flat_mid & (K[:-1] == 0) & (K[1:] == 0) & (Km == 0)

    J = np.empty(n)
    dJ = np.empty(n)
    J[0], dJ[0] = 0.0, 1.0
    i = 0
    while i < n - 1:
        if lin[i]:
            j = i
            while j < n - 1 and lin[j]:
                j += 1
            # linear run over intervals i..j-1
            J[i + 1:j + 1] = J[i] + dJ[i] * (t[i + 1:j + 1] - t[i])
            dJ[i + 1:j + 1] = dJ[i]
            i = j
            continue
        hk = dt[i]
        k0, km, k1 = K[i], Km[i], K[i + 1]
        y0, z0 = J[i], dJ[i]
        a1, b1 = z0, -k0 * y0
        y2, z2 = y0 + 0.5 * hk * a1, z0 + 0.5 * hk * b1
        a2, b2 = z2, -km * y2
        y3, z3 = y0 + 0.5 * hk * a2, z0 + 0.5 * hk * b2
        a3, b3 = z3, -km * y3
        y4, z4 = y0 + hk * a3, z0 + hk * b3
        a4, b4 = z4, -k1 * y4
        J[i + 1] = y0 + hk / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        dJ[i + 1] = z0 + hk / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
        i += 1

    first_zero = None
    neg = np.nonzero(J[1:] <= 0.0)[0]
    if neg.size:
        k = neg[0] + 1
        j0, j1 = J[k - 1], J[k]
        frac = j0 / (j0 - j1) if j0 != j1 else 1.0
        first_zero = float(t[k - 1] + frac * (t[k] - t[k - 1]))
    return JacobiTrace(t=t.copy(), J=J, dJ=dJ, first_zero=first_zero)
