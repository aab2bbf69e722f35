"""
Conformal metrics ``g = exp(2 phi) (dx^2 + dy^2)`` on the plane.

Four kinds are supported:

``flat``
    phi = 0.
``bump``
    phi(p) = A exp(1 / (s^2 - 1)) for s = |p - c| / rho < 1, zero otherwise.
    Smooth, compactly supported, so the metric is complete and flat near
    infinity.
``bumpsum``
    Sum of several bumps.
``stereographic``
    phi(p) = -log(1 + kappa |p|^2 / 4); constant curvature kappa.  Used as an
    oracle for Jacobi fields, not as a complete surface.

All derivatives are closed form.  Arrays of points have shape ``(..., 2)``.
The ``*_xy`` methods are scalar fast paths used by the geodesic integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DomainError

# exp(1/u) underflows to 0.0 for u > -1/745; treat that band as outside the support
_UNDERFLOW_U = -1.0 / 740.0


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class Bump:
    """Single smooth bump ``A exp(1/(s^2-1))`` centred at ``c`` with radius ``rho``."""

    A: float
    c: tuple[float, float] = (0.0, 0.0)
    rho: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError(f"bump radius must be positive, got {self.rho}")
        object.__setattr__(self, "c", (float(self.c[0]), float(self.c[1])))
        if not all(math.isfinite(v) for v in (self.A, *self.c, self.rho)):
            raise DomainError("bump parameters must be finite")

    def to_spec(self) -> dict:
        return {"kind": "bump", "A": self.A, "c": list(self.c), "rho": self.rho}


@dataclass(frozen=True)
class MetricSample:
    phi: float
    grad_phi: tuple[float, float]
    laplacian_phi: float
    K: float


@dataclass(frozen=True)
class ConformalMetric:
    """Immutable conformal metric on the plane.

    Use the constructors :meth:`flat`, :meth:`bump`, :meth:`bumpsum`,
    :meth:`stereographic` or :meth:`from_spec` rather than the raw fields.
    """

    kind: str
    bumps: tuple[Bump, ...] = field(default=())
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("flat", "bump", "bumpsum", "stereographic"):
            raise DomainError(f"unknown metric kind {self.kind!r}")
        if self.kind == "bump" and len(self.bumps) != 1:
            raise DomainError("kind 'bump' takes exactly one bump")
        if not math.isfinite(self.kappa):
            raise DomainError("kappa must be finite")

    # -- constructors -----------------------------------------------------

    @classmethod
    def flat(cls) -> "ConformalMetric":
        return cls("flat")

    @classmethod
    def bump(cls, A: float, c: Sequence[float] = (0.0, 0.0), rho: float = 1.0) -> "ConformalMetric":
        return cls("bump", (Bump(float(A), tuple(c), float(rho)),))

    @classmethod
    def bumpsum(cls, bumps: Iterable[Bump]) -> "ConformalMetric":
        return cls("bumpsum", tuple(bumps))

    @classmethod
    def stereographic(cls, kappa: float) -> "ConformalMetric":
        return cls("stereographic", kappa=float(kappa))

    @classmethod
    def from_spec(cls, spec: dict[str, Any]) -> "ConformalMetric":
        """Build from the JSON form, e.g. ``{"kind": "bump", "A": 0.5, "c": [0, 0], "rho": 1}``."""
        if not isinstance(spec, dict) or "kind" not in spec:
            raise DomainError(f"metric spec must be an object with a 'kind' key: {spec!r}")
        kind = str(spec["kind"]).lower()
        allowed = {
            "flat": {"kind"},
            "bump": {"kind", "A", "c", "rho"},
            "bumpsum": {"kind", "bumps"},
            "stereographic": {"kind", "kappa"},
        }
        if kind not in allowed:
            raise DomainError(f"unknown metric kind {kind!r}")
        extra = set(spec) - allowed[kind]
        if extra:
            raise DomainError(f"unknown keys for {kind} metric: {sorted(extra)}")
        if kind == "flat":
            return cls.flat()
        if kind == "bump":
            return cls.bump(spec["A"], spec.get("c", (0.0, 0.0)), spec.get("rho", 1.0))
        if kind == "bumpsum":
            bumps = []
            for b in spec["bumps"]:
                m = cls.from_spec({"kind": "bump", **{k: v for k, v in b.items() if k != "kind"}})
                bumps.extend(m.bumps)
            return cls.bumpsum(bumps)
        return cls.stereographic(spec["kappa"])

    def to_spec(self) -> dict:
        if self.kind == "flat":
            return {"kind": "flat"}
        if self.kind == "bump":
            return self.bumps[0].to_spec()
        if self.kind == "bumpsum":
            return {"kind": "bumpsum", "bumps": [b.to_spec() for b in self.bumps]}
        return {"kind": "stereographic", "kappa": self.kappa}

    # -- structural queries -------------------------------------------------

    @property
    def has_compact_support(self) -> bool:
        return self.kind in ("flat", "bump", "bumpsum") or self.kappa == 0.0

    @property
    def nonnegative(self) -> bool:
        """True when exp(phi) >= 1 everywhere, so d(x, y) >= |x - y|."""
        if self.kind == "stereographic":
            return self.kappa <= 0.0
        return all(b.A >= 0 for b in self.bumps)

    def is_flat_at(self, x: float, y: float) -> bool:
        """True if (x, y) lies outside every bump support (phi and its derivatives vanish)."""
        if self.kind == "flat":
            return True
        if self.kind == "stereographic":
            return self.kappa == 0.0
        for b in self.bumps:
            dx = x - b.c[0]
            dy = y - b.c[1]
            if dx * dx + dy * dy < b.rho * b.rho:
                return False
        return True

    def flat_mask(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "flat" or (self.kind == "stereographic" and self.kappa == 0.0):
            return np.ones(p.shape[:-1], dtype=bool)
        if self.kind == "stereographic":
            return np.zeros(p.shape[:-1], dtype=bool)
        mask = np.ones(p.shape[:-1], dtype=bool)
        for b in self.bumps:
            d2 = (p[..., 0] - b.c[0]) ** 2 + (p[..., 1] - b.c[1]) ** 2
            mask &= d2 >= b.rho * b.rho
        return mask

    def segment_hits_support(self, a: Sequence[float], b: Sequence[float]) -> bool:
        """Does the closed segment [a, b] meet the open support of any bump?"""
        if self.kind == "flat":
            return False
        if self.kind == "stereographic":
            return self.kappa != 0.0
        ax, ay = float(a[0]), float(a[1])
        dx, dy = float(b[0]) - ax, float(b[1]) - ay
        L2 = dx * dx + dy * dy
        for bump in self.bumps:
            cx, cy = bump.c
            if L2 == 0.0:
                s = 0.0
            else:
                s = min(1.0, max(0.0, ((cx - ax) * dx + (cy - ay) * dy) / L2))
            qx, qy = ax + s * dx - cx, ay + s * dy - cy
            if qx * qx + qy * qy < bump.rho * bump.rho:
                return True
        return False

    def ray_entry_time(self, x: float, y: float, ux: float, uy: float) -> float:
        """Euclidean distance along the unit chart direction (ux, uy) until a bump support
        is entered; ``inf`` if never.  Assumes (x, y) is currently outside all supports."""
        best = math.inf
        for b in self.bumps:
            fx, fy = x - b.c[0], y - b.c[1]
            bq = fx * ux + fy * uy
            cq = fx * fx + fy * fy - b.rho * b.rho
            disc = bq * bq - cq
            if disc <= 0.0:
                continue
            s = -bq - math.sqrt(disc)
            if s < 0.0:
                # inside or moving away; the far root handles "inside" which callers exclude
                s2 = -bq + math.sqrt(disc)
                if s2 < 0.0:
                    continue
                s = 0.0
            best = min(best, s)
        return best

    # -- scalar fast paths ----------------------------------------------------

    def _stereo_w(self, x: float, y: float) -> float:
        w = 1.0 + 0.25 * self.kappa * (x * x + y * y)
        if w <= 0.0:
            raise DomainError(
                f"stereographic factor undefined at ({x}, {y}) for kappa={self.kappa}"
            )
        return w

    def phi_xy(self, x: float, y: float) -> float:
        if self.kind == "flat":
            return 0.0
        if self.kind == "stereographic":
            return -math.log(self._stereo_w(x, y))
        total = 0.0
        for b in self.bumps:
            dx, dy = x - b.c[0], y - b.c[1]
            u = (dx * dx + dy * dy) / (b.rho * b.rho) - 1.0
            if u < _UNDERFLOW_U:
                total += b.A * math.exp(1.0 / u)
        return total

    def grad_phi_xy(self, x: float, y: float) -> tuple[float, float]:
        if self.kind == "flat":
            return 0.0, 0.0
        if self.kind == "stereographic":
            w = self._stereo_w(x, y)
            f = -0.5 * self.kappa / w
            return f * x, f * y
        gx = gy = 0.0
        for b in self.bumps:
            dx, dy = x - b.c[0], y - b.c[1]
            r2 = b.rho * b.rho
            u = (dx * dx + dy * dy) / r2 - 1.0
            if u < _UNDERFLOW_U:
                # d phi / d q = -A e^{1/u} / u^2 with q = s^2; grad q = 2 (p - c) / rho^2
                f = -b.A * math.exp(1.0 / u) / (u * u) * 2.0 / r2
                gx += f * dx
                gy += f * dy
        return gx, gy

    def laplacian_phi_xy(self, x: float, y: float) -> float:
        if self.kind == "flat":
            return 0.0
        if self.kind == "stereographic":
            w = self._stereo_w(x, y)
            return -self.kappa / (w * w)
        total = 0.0
        for b in self.bumps:
            dx, dy = x - b.c[0], y - b.c[1]
            r2 = b.rho * b.rho
            q = (dx * dx + dy * dy) / r2
            u = q - 1.0
            if u < _UNDERFLOW_U:
                e = b.A * math.exp(1.0 / u)
                u2 = u * u
                f1 = -e / u2
                f2 = e * (1.0 / (u2 * u2) + 2.0 / (u2 * u))
                total += 4.0 / r2 * (q * f2 + f1)
        return total

    def curvature_xy(self, x: float, y: float) -> float:
        if self.kind == "flat":
            return 0.0
        if self.kind == "stereographic":
            self._stereo_w(x, y)
            return self.kappa
        lap = self.laplacian_phi_xy(x, y)
        if lap == 0.0:
            return 0.0
        return -math.exp(-2.0 * self.phi_xy(x, y)) * lap

    # -- vectorised evaluation ---------------------------------------------

    def _check_stereo(self, p: np.ndarray) -> np.ndarray:
        # geodesics through the antipode leave the chart; w = inf there is fine
        with np.errstate(over="ignore"):
            w = 1.0 + 0.25 * self.kappa * np.sum(p * p, axis=-1)
        if np.any(w <= 0.0):
            raise DomainError(f"stereographic factor undefined for kappa={self.kappa}")
        return w

    def _bump_terms(self, p: np.ndarray, b: Bump):
        r2 = b.rho * b.rho
        d = p - np.asarray(b.c)
        q = np.sum(d * d, axis=-1) / r2
        u = q - 1.0
        inside = u < _UNDERFLOW_U
        us = np.where(inside, u, -1.0)
        e = np.where(inside, b.A * np.exp(1.0 / us), 0.0)
        return d, q, us, e, r2

    def phi(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "flat":
            return np.zeros(p.shape[:-1])
        if self.kind == "stereographic":
            return -np.log(self._check_stereo(p))
        out = np.zeros(p.shape[:-1])
        for b in self.bumps:
            out = out + self._bump_terms(p, b)[3]
        return out

    def grad_phi(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "flat":
            return np.zeros(p.shape)
        if self.kind == "stereographic":
            w = self._check_stereo(p)
            return (-0.5 * self.kappa / w)[..., None] * p
        out = np.zeros(p.shape)
        for b in self.bumps:
            d, q, u, e, r2 = self._bump_terms(p, b)
            f = -e / (u * u) * 2.0 / r2
            out = out + f[..., None] * d
        return out

    def laplacian_phi(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "flat":
            return np.zeros(p.shape[:-1])
        if self.kind == "stereographic":
            w = self._check_stereo(p)
            return -self.kappa / (w * w)
        out = np.zeros(p.shape[:-1])
        for b in self.bumps:
            d, q, u, e, r2 = self._bump_terms(p, b)
            u2 = u * u
            out = out + 4.0 / r2 * (q * e * (1.0 / (u2 * u2) + 2.0 / (u2 * u)) - e / u2)
        return out

    def curvature(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.kind == "stereographic":
            self._check_stereo(p)
            return np.full(p.shape[:-1], self.kappa)
        return -np.exp(-2.0 * self.phi(p)) * self.laplacian_phi(p)

    def conformal_factor(self, p) -> np.ndarray:
        """exp(phi): ratio of metric length to chart length."""
        return np.exp(self.phi(p))


def _as_xy(p) -> tuple[float, float]:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise DomainError(f"non-finite point {p!r}")
    return x, y


def eval_metric(metric: ConformalMetric, p) -> MetricSample:
    x, y = _as_xy(p)
    phi = metric.phi_xy(x, y)
    g = metric.grad_phi_xy(x, y)
    lap = metric.laplacian_phi_xy(x, y)
    return MetricSample(phi=phi, grad_phi=g, laplacian_phi=lap, K=metric.curvature_xy(x, y))


def gaussian_curvature(metric: ConformalMetric, p) -> float:
    """K(p) = -exp(-2 phi(p)) * laplacian(phi)(p); identically kappa for the stereographic kind."""
    x, y = _as_xy(p)
    return metric.curvature_xy(x, y)


def polyline_length(metric: ConformalMetric, pts, subdivisions: int = 8) -> float:
    """Conformal length of a polyline by composite Simpson on each segment."""
    pts = np.asarray(pts, dtype=float)
    a, b = pts[:-1], pts[1:]
    n = 2 * subdivisions
    s = np.linspace(0.0, 1.0, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * n
    q = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    f = metric.conformal_factor(q)
    seg = np.hypot((b - a)[:, 0], (b - a)[:, 1])
    return float(np.sum(seg * (f @ w)))
