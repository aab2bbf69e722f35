"""
Discrete point sets in the plane: sampling, quasi-net checks and narrow-drift sequences.

Point sets are generated block by block from a counter-based generator keyed by
``(seed, block index)``, so any sub-box of a window can be produced without
materialising the rest, and results do not depend on evaluation order.
Lattices are handled analytically.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1
MATERIALIZE_LIMIT = 20_000_000


def _block_rng(seed: int, i: int, j: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & _MASK64, i & _MASK32, j & _MASK32, stream])
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# provenance kinds


@dataclass(frozen=True)
class Lattice:
    spacing: float = 1.0

    def to_spec(self):
        return {"kind": "lattice", "spacing": self.spacing}


@dataclass(frozen=True)
class Poisson:
    intensity: float = 1.0
    cell: float = 8.0

    def to_spec(self):
        return {"kind": "poisson", "intensity": self.intensity, "cell": self.cell}


@dataclass(frozen=True)
class Jittered:
    spacing: float = 1.0
    jitter: float = 0.0
    cell: float = 8.0

    def to_spec(self):
        return {"kind": "jittered", "spacing": self.spacing, "jitter": self.jitter, "cell": self.cell}


@dataclass(frozen=True)
class Custom:
    def to_spec(self):
        return {"kind": "custom"}


Provenance = Union[Lattice, Poisson, Jittered, Custom]


def provenance_from_spec(spec: dict) -> Provenance:
    kind = spec.get("kind")
    args = {k: v for k, v in spec.items() if k != "kind"}
    try:
        if kind == "lattice":
            return Lattice(**args)
        if kind == "poisson":
            return Poisson(**args)
        if kind == "jittered":
            return Jittered(**args)
        if kind == "custom":
            return Custom()
    except TypeError as e:
        raise DomainError(f"bad provenance {spec!r}: {e}") from None
    raise DomainError(f"unknown provenance kind {kind!r}")


def _check_window(window):
    x0, x1, y0, y1 = (float(w) for w in window)
    if not all(math.isfinite(w) for w in (x0, x1, y0, y1)):
        raise DomainError("window must be finite")
    if not (x1 > x0 and y1 > y0):
        raise DomainError(f"empty or degenerate window {window}")
    return (x0, x1, y0, y1)


def _sort_xy(P: np.ndarray) -> np.ndarray:
    if len(P) == 0:
        return P.reshape(0, 2)
    return P[np.lexsort((P[:, 1], P[:, 0]))]


@dataclass
class PointSet:
    """Finite window of a discrete set L in the plane."""

    provenance: Provenance
    window: tuple
    seed: int = 0
    _points: Optional[np.ndarray] = field(default=None, repr=False)

    # -- construction ---------------------------------------------------------

    @classmethod
    def lattice(cls, spacing: float, window) -> "PointSet":
        if not spacing > 0:
            raise DomainError("lattice spacing must be positive")
        return cls(Lattice(float(spacing)), _check_window(window))

    @classmethod
    def poisson(cls, intensity: float, window, seed: int = 0, cell: float = 8.0) -> "PointSet":
        if not intensity > 0:
            raise DomainError("intensity must be positive")
        return cls(Poisson(float(intensity), float(cell)), _check_window(window), int(seed))

    @classmethod
    def jittered(cls, spacing: float, jitter: float, window, seed: int = 0, cell: float = 8.0) -> "PointSet":
        if not spacing > 0 or jitter < 0:
            raise DomainError("need spacing > 0 and jitter >= 0")
        return cls(Jittered(float(spacing), float(jitter), float(cell)), _check_window(window), int(seed))

    @classmethod
    def custom(cls, points, window=None) -> "PointSet":
        P = np.asarray(points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(P)):
            raise DomainError("custom points must be finite")
        if window is None:
            if len(P) == 0:
                window = (-1.0, 1.0, -1.0, 1.0)
            else:
                lo, hi = P.min(axis=0), P.max(axis=0)
                pad = np.where(hi > lo, 0.0, 0.5)
                window = (lo[0] - pad[0], hi[0] + pad[0], lo[1] - pad[1], hi[1] + pad[1])
        window = _check_window(window)
        P = _sort_xy(P)
        if len(P) > 1 and np.any(np.all(P[1:] == P[:-1], axis=1)):
            raise DomainError("custom points must be pairwise distinct")
        inside = _in_box(P, window)
        if not np.all(inside):
            raise DomainError("custom points must lie inside the window")
        return cls(Custom(), window, 0, P)

    # -- access -----------------------------------------------------------------

    @property
    def points(self) -> np.ndarray:
        if self._points is None:
            if self.estimated_count() > MATERIALIZE_LIMIT:
                raise DomainError("window too large to materialise; use box queries")
            self._points = self.points_in_box(self.window)
        return self._points

    def __len__(self):
        return len(self.points)

    def estimated_count(self) -> float:
        x0, x1, y0, y1 = self.window
        prov = self.provenance
        if isinstance(prov, Lattice) or isinstance(prov, Jittered):
            return ((x1 - x0) / prov.spacing + 1) * ((y1 - y0) / prov.spacing + 1)
        if isinstance(prov, Poisson):
            return prov.intensity * (x1 - x0) * (y1 - y0)
        return len(self._points)

    def points_in_box(self, box) -> np.ndarray:
        """Points of L inside ``box`` intersected with the window, sorted by (x, y)."""
        bx0, bx1, by0, by1 = box
        wx0, wx1, wy0, wy1 = self.window
        x0, x1, y0, y1 = max(bx0, wx0), min(bx1, wx1), max(by0, wy0), min(by1, wy1)
        if x0 > x1 or y0 > y1:
            return np.zeros((0, 2))
        prov = self.provenance
        if isinstance(prov, Custom):
            P = self._points
            return P[_in_box(P, (x0, x1, y0, y1))]
        if isinstance(prov, Lattice):
            d = prov.spacing
            i = np.arange(math.ceil(x0 / d), math.floor(x1 / d) + 1)
            j = np.arange(math.ceil(y0 / d), math.floor(y1 / d) + 1)
            I, Jg = np.meshgrid(i, j, indexing="ij")
            return np.column_stack((I.ravel() * d, Jg.ravel() * d))
        c = prov.cell
        pad = prov.jitter if isinstance(prov, Jittered) else 0.0
        bi = range(math.floor((x0 - pad) / c), math.floor((x1 + pad) / c) + 1)
        bj = range(math.floor((y0 - pad) / c), math.floor((y1 + pad) / c) + 1)
        chunks = [self._block(i, j) for i in bi for j in bj]
        P = np.vstack(chunks) if chunks else np.zeros((0, 2))
        P = P[_in_box(P, (x0, x1, y0, y1))]
        return _sort_xy(P)

    def _block(self, i: int, j: int) -> np.ndarray:
        prov = self.provenance
        c = prov.cell
        rng = _block_rng(self.seed, i, j)
        if isinstance(prov, Poisson):
            n = rng.poisson(prov.intensity * c * c)
            u = rng.random((n, 2))
            return np.column_stack((c * (i + u[:, 0]), c * (j + u[:, 1])))
        d = prov.spacing
        li = np.arange(math.ceil(i * c / d), math.ceil((i + 1) * c / d))
        lj = np.arange(math.ceil(j * c / d), math.ceil((j + 1) * c / d))
        li = li[li * d < (i + 1) * c]
        lj = lj[lj * d < (j + 1) * c]
        I, Jg = np.meshgrid(li, lj, indexing="ij")
        base = np.column_stack((I.ravel() * d, Jg.ravel() * d))
        u = rng.random((len(base), 2))
        r = prov.jitter * np.sqrt(u[:, 0])
        a = 2.0 * math.pi * u[:, 1]
        return base + np.column_stack((r * np.cos(a), r * np.sin(a)))

    def nearest_candidates(self, q, k: int = 16) -> np.ndarray:
        """The ``k`` Euclidean-nearest points of L to ``q`` (fewer if L is small)."""
        qx, qy = float(q[0]), float(q[1])
        half = self._typical_spacing() * 2.0
        for _ in range(60):
            P = self.points_in_box((qx - half, qx + half, qy - half, qy + half))
            if len(P) >= k:
                d = np.hypot(P[:, 0] - qx, P[:, 1] - qy)
                # only points within the inscribed radius are guaranteed to be the true nearest
                inside = d <= half
                if inside.sum() >= k:
                    order = np.lexsort((P[:, 1], P[:, 0], d))
                    return P[order[:k]]
            if not _box_grows(self.window, (qx - half, qx + half, qy - half, qy + half)):
                break
            half *= 2.0
        P = self.points_in_box((qx - half, qx + half, qy - half, qy + half))
        d = np.hypot(P[:, 0] - qx, P[:, 1] - qy)
        order = np.lexsort((P[:, 1], P[:, 0], d))
        return P[order[:k]]

    def _typical_spacing(self) -> float:
        prov = self.provenance
        if isinstance(prov, (Lattice, Jittered)):
            return prov.spacing
        if isinstance(prov, Poisson):
            return 1.0 / math.sqrt(prov.intensity)
        x0, x1, y0, y1 = self.window
        n = max(1, len(self._points))
        return math.sqrt((x1 - x0) * (y1 - y0) / n)

    # -- ray queries -------------------------------------------------------------

    def ray_candidates(self, v, lo: float, hi: float, width: float = 4.0, origin=(0.0, 0.0)) -> np.ndarray:
        """Points with <p - o, v> in [lo, hi) and transverse offset at most ``width``.

        For lattices only the two nearest points per lattice column are returned
        (these contain the minimiser of |p - o| - <p - o, v> in every column).
        """
        vx, vy = float(v[0]), float(v[1])
        ox, oy = float(origin[0]), float(origin[1])
        prov = self.provenance
        if isinstance(prov, Lattice):
            P = self._lattice_ray_candidates(vx, vy, lo, hi, ox, oy)
        else:
            P = self._strip_points(vx, vy, lo, hi, width, ox, oy)
        if len(P) == 0:
            return P.reshape(0, 2)
        dx, dy = P[:, 0] - ox, P[:, 1] - oy
        s = dx * vx + dy * vy
        off = np.abs(vx * dy - vy * dx)
        keep = (s >= lo) & (s < hi) & (off <= width) & _in_box(P, self.window)
        return P[keep]

    def _lattice_ray_candidates(self, vx, vy, lo, hi, ox, oy):
        d = self.provenance.spacing
        swap = abs(vy) > abs(vx)
        a, b = (vy, vx) if swap else (vx, vy)  # a: dominant component
        oa, ob = (oy, ox) if swap else (ox, oy)
        # column coordinate u = p_dominant; <p - o, v> ~ (u - oa) / a along the ray
        u_lo, u_hi = sorted((oa + lo * a, oa + hi * a))
        i = np.arange(math.floor(u_lo / d) - 1, math.ceil(u_hi / d) + 2)
        u = i * d
        w_star = ob + (u - oa) * b / a
        j0 = np.floor(w_star / d)
        P = []
        for jj in (j0, j0 + 1):
            w = jj * d
            P.append(np.column_stack((w, u)) if swap else np.column_stack((u, w)))
        return np.vstack(P)

    def _strip_points(self, vx, vy, lo, hi, width, ox=0.0, oy=0.0):
        # cover the strip by boxes of side ~ max(2 width, cell) along the ray
        side = max(2.0 * width, self._typical_spacing() * 4.0)
        if not isinstance(self.provenance, Custom):
            side = max(side, self.provenance.cell)
        n = max(1, int(math.ceil((hi - lo) / side)))
        out = []
        seen = set()
        for k in range(n):
            s0 = lo + k * (hi - lo) / n
            s1 = lo + (k + 1) * (hi - lo) / n
            xs = [ox + s0 * vx, ox + s1 * vx]
            ys = [oy + s0 * vy, oy + s1 * vy]
            box = (min(xs) - width, max(xs) + width, min(ys) - width, max(ys) + width)
            P = self.points_in_box(box)
            for p in map(tuple, P):
                if p not in seen:
                    seen.add(p)
                    out.append(p)
        return np.array(out, dtype=float).reshape(-1, 2)

    # -- io --------------------------------------------------------------------------

    def sidecar(self) -> dict:
        return {"provenance": self.provenance.to_spec(), "window": list(self.window), "seed": self.seed}

    def write(self, csv_path: str) -> None:
        """Write ``x,y`` rows to ``csv_path`` and provenance to ``<stem>.json``."""
        with open(csv_path, "w", newline="") as fh:
            write_points_csv(self.points, fh)
        with open(os.path.splitext(csv_path)[0] + ".json", "w") as fh:
            json.dump(self.sidecar(), fh, sort_keys=True, indent=2)

    @classmethod
    def read(cls, csv_path: str) -> "PointSet":
        with open(csv_path, newline="") as fh:
            P = read_points_csv(fh)
        side = os.path.splitext(csv_path)[0] + ".json"
        window = None
        if os.path.exists(side):
            with open(side) as fh:
                meta = json.load(fh)
            window = tuple(meta["window"])
            prov = provenance_from_spec(meta["provenance"])
            if not isinstance(prov, Custom):
                ps = cls(prov, _check_window(window), int(meta.get("seed", 0)))
                ps._points = _sort_xy(P)
                return ps
        return cls.custom(P, window)


def _in_box(P, box):
    x0, x1, y0, y1 = box
    return (P[:, 0] >= x0) & (P[:, 0] <= x1) & (P[:, 1] >= y0) & (P[:, 1] <= y1)


def _box_grows(window, box):
    x0, x1, y0, y1 = window
    return box[0] > x0 or box[1] < x1 or box[2] > y0 or box[3] < y1


def write_points_csv(P, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", "y"])
    for x, y in np.asarray(P, dtype=float):
        w.writerow([repr(float(x)), repr(float(y))])


def read_points_csv(fh) -> np.ndarray:
    rows = []
    for n, row in enumerate(csv.reader(fh), 1):
        if not row or row[0].startswith("#"):
            continue
        try:
            rows.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            if n == 1:
                continue  # header
            raise DomainError(f"line {n}: expected 'x,y', got {row!r}") from None
    return np.array(rows, dtype=float).reshape(-1, 2)


def sample_net(provenance: Provenance, window, seed: int = 0) -> PointSet:
    """Deterministic sample of a net on ``window`` for the given provenance and seed."""
    window = _check_window(window)
    if isinstance(provenance, Lattice):
        return PointSet.lattice(provenance.spacing, window)
    if isinstance(provenance, Poisson):
        return PointSet.poisson(provenance.intensity, window, seed, provenance.cell)
    if isinstance(provenance, Jittered):
        return PointSet.jittered(provenance.spacing, provenance.jitter, window, seed, provenance.cell)
    raise DomainError("custom point sets are built with PointSet.custom")


# ---------------------------------------------------------------------------
# tube widths and (QN1)


@dataclass(frozen=True)
class Width:
    """Tube half-width as a function of distance along the tube axis.

    ``const``: w(x) = c.  ``power``: w(x) = c * x**alpha with 0 <= alpha < 1/2,
    which keeps w(x) = o(sqrt(x)).
    """

    kind: str = "const"
    c: float = 1.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("const", "power"):
            raise DomainError(f"unknown width kind {self.kind!r}")
        if not self.c > 0:
            raise DomainError("width constant must be positive")
        if self.kind == "power" and not (0.0 <= self.alpha < 0.5):
            raise DomainError("power-law exponent must satisfy 0 <= alpha < 1/2")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "const":
            return np.full(x.shape, self.c)
        return self.c * np.power(np.maximum(x, 0.0), self.alpha)

    def __str__(self):
        return f"const:{self.c!r}" if self.kind == "const" else f"power:{self.c!r},{self.alpha!r}"

    @classmethod
    def parse(cls, text: str) -> "Width":
        """``const:c`` or ``power:c,alpha``."""
        kind, _, rest = text.partition(":")
        vals = [float(t) for t in rest.split(",") if t]
        if kind == "const" and len(vals) == 1:
            return cls("const", vals[0])
        if kind == "power" and len(vals) == 2:
            return cls("power", vals[0], vals[1])
        raise DomainError(f"bad width spec {text!r}; expected const:c or power:c,alpha")


@dataclass(frozen=True)
class TubeSpec:
    """Placement of the tube {x > 0, |y| <= w(x)} by a rotation then translation."""

    angle: float
    base: tuple
    width: Width = Width()


@dataclass
class QN1Report:
    n_tubes: int
    hits: int
    hit_fraction: float
    worst_margin: float
    worst_tube: Optional[dict]
    min_tube_length: float
    warnings: list

    @property
    def passed(self) -> bool:
        return self.n_tubes > 0 and self.hits == self.n_tubes


def _tube_length_in_window(window, base, u):
    x0, x1, y0, y1 = window
    best = math.inf
    for comp, lo, hi, b in ((u[0], x0, x1, base[0]), (u[1], y0, y1, base[1])):
        if comp > 0:
            best = min(best, (hi - b) / comp)
        elif comp < 0:
            best = min(best, (lo - b) / comp)
    return max(0.0, best)


def check_qn1(L: PointSet, width: Width, n_isometries: int = 1000, seed: int = 0,
              tubes: Optional[Sequence[TubeSpec]] = None, chunk: int = 64) -> QN1Report:
    """Fraction of placed tubes (truncated to the window) containing a point of L.

    Random placements draw a uniform angle and a base point uniform in the
    inner half of the window, unless explicit ``tubes`` are given.
    """
    x0, x1, y0, y1 = L.window
    if tubes is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & _MASK64, 1])))
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        hx, hy = 0.25 * (x1 - x0), 0.25 * (y1 - y0)
        ang = rng.uniform(0.0, 2.0 * math.pi, n_isometries)
        bx = rng.uniform(cx - hx, cx + hx, n_isometries)
        by = rng.uniform(cy - hy, cy + hy, n_isometries)
        tubes = [TubeSpec(float(a), (float(p), float(q)), width) for a, p, q in zip(ang, bx, by)]
    P = L.points
    n = len(tubes)
    margins = np.full(n, -math.inf)
    lengths = np.zeros(n)
    for s in range(0, n, chunk):
        block = tubes[s:s + chunk]
        ca = np.array([math.cos(t.angle) for t in block])[:, None]
        sa = np.array([math.sin(t.angle) for t in block])[:, None]
        bxs = np.array([t.base[0] for t in block])[:, None]
        bys = np.array([t.base[1] for t in block])[:, None]
        for k, t in enumerate(block):
            lengths[s + k] = _tube_length_in_window(L.window, t.base, (math.cos(t.angle), math.sin(t.angle)))
        if len(P) == 0:
            continue
        dx = P[None, :, 0] - bxs
        dy = P[None, :, 1] - bys
        xi = dx * ca + dy * sa
        eta = np.abs(-dx * sa + dy * ca)
        for k, t in enumerate(block):
            m = t.width(xi[k]) - eta[k]
            m = np.where(xi[k] > 0, m, -math.inf)
            margins[s + k] = float(np.max(m)) if m.size else -math.inf
    hits = int(np.sum(margins >= 0))
    warnings = []
    if n:
        short = [i for i in range(n) if lengths[i] < 8.0 * float(tubes[i].width(lengths[i]))]
        if short:
            warnings.append(f"{len(short)} tube(s) shorter than 8 widths inside the window; "
                            "window may be too small for this width function")
    worst = int(np.argmin(margins)) if n else None
    worst_tube = None
    if worst is not None:
        t = tubes[worst]
        worst_tube = {"angle": t.angle, "base": list(t.base), "margin": float(margins[worst])}
    return QN1Report(
        n_tubes=n, hits=hits, hit_fraction=hits / n if n else 0.0,
        worst_margin=float(margins[worst]) if worst is not None else -math.inf,
        worst_tube=worst_tube, min_tube_length=float(lengths.min()) if n else 0.0,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# (QN2)


@dataclass
class QN2Report:
    count: int
    radii: np.ndarray
    ratios: np.ndarray
    tail_ratio: float
    threshold: float
    min_count: int
    passed: bool
    reason: str = ""


def check_qn2(L: PointSet, apex, interval, min_count: int = 16, threshold: float = 1.1) -> QN2Report:
    """Consecutive radius ratios of L inside the open sector ``apex + {angle in interval}``.

    For sampled sets, radii are truncated at the largest disc around ``apex``
    contained in the window (custom sets are not truncated).  The tail estimate
    is the maximal ratio over the top quartile.
    """
    a0, a1 = float(interval[0]), float(interval[1])
    if not a1 > a0:
        raise DomainError("sector interval must be non-empty")
    ax, ay = float(apex[0]), float(apex[1])
    x0, x1, y0, y1 = L.window
    if isinstance(L.provenance, Custom):
        rmax = math.inf
    else:
        rmax = min(ax - x0, x1 - ax, ay - y0, y1 - ay)
    P = L.points
    d = P - np.array([ax, ay])
    r = np.hypot(d[:, 0], d[:, 1])
    ang = np.mod(np.arctan2(d[:, 1], d[:, 0]) - a0, 2.0 * math.pi)
    width = a1 - a0
    inside = (r > 0) & (r <= rmax) & (ang > 0) & (ang < width) if width < 2 * math.pi else (r > 0) & (r <= rmax)
    radii = np.sort(r[inside])
    ratios = radii[1:] / radii[:-1] if len(radii) > 1 else np.zeros(0)
    if len(radii) < max(min_count, 2):
        return QN2Report(len(radii), radii, ratios, math.inf, threshold, min_count, False,
                         f"only {len(radii)} point(s) in the sector (need {min_count})")
    q = max(1, len(ratios) // 4)
    tail = float(np.max(ratios[-q:]))
    passed = tail < threshold
    return QN2Report(len(radii), radii, ratios, tail, threshold, min_count, passed,
                     "" if passed else f"tail ratio {tail:.4g} >= {threshold}")


# ---------------------------------------------------------------------------
# narrow drift


def residual(P, v) -> np.ndarray:
    """|p| - <p, v>, cancellation-free: |p x v|^2 / (|p| + <p, v>) when <p, v> >= 0."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    vx, vy = float(v[0]), float(v[1])
    dot = P[:, 0] * vx + P[:, 1] * vy
    cross = vx * P[:, 1] - vy * P[:, 0]
    norm = np.hypot(P[:, 0], P[:, 1])
    den = norm + dot
    ahead = (dot >= 0) & (den > 0)
    return np.where(ahead, cross * cross / np.where(ahead, den, 1.0), norm - dot)


@dataclass
class DriftSequence:
    points: np.ndarray
    v: tuple
    residuals: np.ndarray
    complete: bool = True
    bands: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)


def _unit(v):
    vx, vy = float(v[0]), float(v[1])
    n = math.hypot(vx, vy)
    if not n > 0 or not math.isfinite(n):
        raise DomainError("direction must be a non-zero finite vector")
    return vx / n, vy / n


def best_in_band(L: PointSet, v, lo: float, hi: float, min_radius: float = 0.0, origin=(0.0, 0.0)):
    """Point of L minimising |p - o| - <p - o, v> with <p - o, v> in [lo, hi) and
    |p - o| >= min_radius, where o is ``origin``.

    Ties break lexicographically on (x, y).  Returns ``(point, residual)`` or
    ``(None, inf)``.
    """
    v = _unit(v)
    o = np.array([float(origin[0]), float(origin[1])])
    width = 4.0 * L._typical_spacing()
    while True:
        P = L.ray_candidates(v, lo, hi, width=width, origin=o)
        if len(P):
            P = P[np.hypot(P[:, 0] - o[0], P[:, 1] - o[1]) >= min_radius]
        if len(P) or isinstance(L.provenance, Lattice) or width >= hi:
            break
        width *= 4.0
    if len(P) == 0:
        return None, math.inf
    res = residual(P - o, v)
    k = np.lexsort((P[:, 1], P[:, 0], res))[0]
    return P[k], float(res[k])


def narrow_drift(L: PointSet, v, count: int = 16, r_min: float = 1.0) -> DriftSequence:
    """Points of L drifting narrowly towards ``v``.

    Bands <p, v> in [r_min 2^k, r_min 2^(k+1)); in each band the point with the
    smallest residual |p| - <p, v> is taken.  A band winner is kept only if its
    radius exceeds the previous one and its residual does not exceed the
    previous residual.  Stops after ``count`` points or when a band leaves the
    window (``complete`` is then False).
    """
    v = _unit(v)
    x0, x1, y0, y1 = L.window
    reach = math.hypot(max(abs(x0), abs(x1)), max(abs(y0), abs(y1)))
    pts, res, bands = [], [], []
    lo = r_min
    while len(pts) < count and lo < reach:
        hi = 2.0 * lo
        p, r = best_in_band(L, v, lo, hi)
        bands.append((lo, hi, None if p is None else float(r)))
        if p is not None:
            ok = True
            if pts:
                ok = math.hypot(*p) > math.hypot(*pts[-1]) and r <= res[-1]
            if ok:
                pts.append((float(p[0]), float(p[1])))
                res.append(r)
        lo = hi
    return DriftSequence(np.array(pts, dtype=float).reshape(-1, 2), v, np.array(res),
                         complete=len(pts) >= count, bands=bands)
