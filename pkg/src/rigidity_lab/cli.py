"""
Command-line front end: ``rigidity-lab <command> [options]``.

Every command resolves its parameters from (in increasing precedence)
built-in defaults, a ``--config`` JSON file and explicit flags, runs one
library operation and writes a report.  JSON reports carry the resolved
config, results, tolerances, verdicts of thresholded checks and the wall-clock
duration; keys are sorted so two runs differ only in ``duration_s``.  CSV
output carries the result table alone.

Exit codes: 0 success, 1 a thresholded check failed, 2 usage or solver error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .asymptotics import (area_growth, busemann_ray, ideal_B_report, net_distance_decay,
                          singleton_gap, transport_line)
from .distance import DistanceOptions, ScaledMetric, distance, distance_matrix, scaled_distance
from .embedtest import QuadDistances, gram_rank_test, read_quad_csv, rigidity_witness
from .errors import RigidityLabError
from .geodesic import jacobi, shoot
from .integralgeom import (LineMeasureSampler, area_continuity, crofton_perimeter,
                           region_from_spec, santalo_area)
from .metric import ConformalMetric
from .nets import (PointSet, Width, check_qn1, check_qn2, narrow_drift, read_points_csv)
from .parallel import default_jobs


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# value parsers; each accepts the flag string or the equivalent JSON value


def _floats(raw) -> list:
    if isinstance(raw, (int, float)):
        return [float(raw)]
    if isinstance(raw, str):
        parts = [s for s in raw.replace(" ", "").split(",") if s]
        return [float(s) for s in parts]
    return [float(v) for v in raw]


def parse_float(raw) -> float:
    return float(raw)


def parse_int(raw) -> int:
    if isinstance(raw, float) and not raw.is_integer():
        raise ValueError(f"expected an integer, got {raw!r}")
    return int(raw)


def parse_point(raw) -> tuple:
    v = _floats(raw)
    if len(v) != 2:
        raise ValueError(f"expected a point 'x,y', got {raw!r}")
    return (v[0], v[1])


def parse_points(raw) -> list:
    """'x,y;x,y;...' or a JSON list of points (any common dimension)."""
    if isinstance(raw, str):
        rows = [r for r in raw.split(";") if r.strip()]
        pts = [_floats(r) for r in rows]
    else:
        pts = [[float(c) for c in p] for p in raw]
    if not pts or len({len(p) for p in pts}) != 1:
        raise ValueError(f"expected points of a common dimension, got {raw!r}")
    return pts


def parse_direction(raw) -> tuple:
    """'x,y' (normalised) or a single angle in radians."""
    v = _floats(raw)
    if len(v) == 1:
        return (math.cos(v[0]), math.sin(v[0]))
    if len(v) != 2 or v == [0.0, 0.0]:
        raise ValueError(f"expected a nonzero direction 'x,y' or an angle, got {raw!r}")
    n = math.hypot(*v)
    return (v[0] / n, v[1] / n)


def parse_window(raw) -> tuple:
    v = _floats(raw)
    if len(v) == 1:
        if not v[0] > 0:
            raise ValueError("window half-width must be positive")
        return (-v[0], v[0], -v[0], v[0])
    if len(v) != 4:
        raise ValueError(f"expected 'w' or 'x0,x1,y0,y1', got {raw!r}")
    return tuple(v)


def _load_json_arg(raw: str):
    if raw.lstrip().startswith("{"):
        return json.loads(raw)
    with open(raw) as fh:
        return json.load(fh)


def parse_metric(raw) -> ConformalMetric:
    """flat | bump:A,cx,cy,rho | stereographic:k | inline JSON | JSON file."""
    if isinstance(raw, dict):
        return ConformalMetric.from_spec(raw)
    text = str(raw).strip()
    kind, _, args = text.partition(":")
    if kind == "flat" and not args:
        return ConformalMetric.flat()
    if kind == "bump":
        v = _floats(args)
        if len(v) != 4:
            raise ValueError("bump takes A,cx,cy,rho")
        return ConformalMetric.bump(v[0], (v[1], v[2]), v[3])
    if kind in ("stereographic", "stereo"):
        v = _floats(args)
        if len(v) != 1:
            raise ValueError("stereographic takes one curvature value")
        return ConformalMetric.stereographic(v[0])
    return ConformalMetric.from_spec(_load_json_arg(text))


def parse_width(raw) -> Width:
    return raw if isinstance(raw, Width) else Width.parse(str(raw))


def parse_region(raw):
    if isinstance(raw, dict):
        return region_from_spec(raw)
    return region_from_spec(_load_json_arg(str(raw)))


def parse_str(raw) -> str:
    return str(raw)


def build_net(raw, window, seed: int) -> PointSet:
    """lattice:d | poisson:lambda | jittered:d,j | custom:path.csv (or JSON object)."""
    if isinstance(raw, dict):
        raw = dict(raw)
        kind = raw.pop("kind", None)
        args = {k: v for k, v in raw.items()}
    else:
        kind, _, rest = str(raw).partition(":")
        args = {"rest": rest}
    if kind == "custom":
        path = args.get("path", args.get("rest"))
        with open(path, newline="") as fh:
            P = read_points_csv(fh)
        return PointSet.custom(P, window=window)
    if window is None:
        raise ValueError("a window is required for sampled nets")
    if "rest" in args:
        v = _floats(args["rest"])
        if kind == "lattice" and len(v) == 1:
            return PointSet.lattice(v[0], window)
        if kind == "poisson" and len(v) == 1:
            return PointSet.poisson(v[0], window, seed)
        if kind == "jittered" and len(v) == 2:
            return PointSet.jittered(v[0], v[1], window, seed)
        raise ValueError(f"cannot parse net {raw!r}")
    if kind == "lattice":
        return PointSet.lattice(float(args["spacing"]), window)
    if kind == "poisson":
        return PointSet.poisson(float(args["intensity"]), window, seed)
    if kind == "jittered":
        return PointSet.jittered(float(args["spacing"]), float(args["jitter"]), window, seed)
    raise ValueError(f"unknown net kind {kind!r}")


# ---------------------------------------------------------------------------
# command registry


@dataclass
class Param:
    name: str
    parse: Callable
    default: Any = None
    help: str = ""
    required: bool = False


@dataclass
class Command:
    name: str
    help: str
    description: str
    params: list
    run: Callable
    net: bool = False


@dataclass
class Outcome:
    results: dict
    tolerances: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    table: Optional[tuple] = None   # (header, rows) for CSV output


COMMON = [
    Param("metric", parse_metric, "flat", "flat | bump:A,cx,cy,rho | stereographic:k | JSON | file.json"),
    Param("seed", parse_int, 0, "random seed (64-bit integer)"),
    Param("out", parse_str, None, "output path (default stdout)"),
    Param("format", parse_str, "json", "json or csv"),
    Param("jobs", parse_int, None, "worker processes (default: available CPUs)"),
]
NET = [
    Param("net", parse_str, "lattice:1", "lattice:d | poisson:lambda | jittered:d,j | custom:path.csv"),
    Param("window", parse_window, None, "half-width w or x0,x1,y0,y1"),
]

COMMANDS: dict = {}


def command(name, help, description, params, net=False):
    def deco(fn):
        COMMANDS[name] = Command(name, help, description, params, fn, net)
        return fn
    return deco


def _opts(c) -> DistanceOptions:
    return DistanceOptions(tol=c.get("tol") or 1e-8, h=c.get("h") or 1e-3)


def _net(c, default_window) -> PointSet:
    window = c["window"] if c["window"] is not None else parse_window(default_window)
    return build_net(c["net"], window, c["seed"])


def _kv_table(results: dict):
    rows = []
    for k in sorted(results):
        v = _clean(results[k])
        rows.append([k, v if isinstance(v, (int, float, str)) or v is None
                     else json.dumps(v, sort_keys=True)])
    return ["key", "value"], rows


# ---------------------------------------------------------------------------
# commands


@command("dist", "geodesic distance between two points",
         "Two-point distance d_M(x, y) by geodesic shooting (length of a minimising geodesic).",
         [Param("from", parse_point, None, "x,y", True), Param("to", parse_point, None, "x,y", True),
          Param("tol", parse_float, 1e-8, "endpoint tolerance"), Param("h", parse_float, 1e-3, "RK4 step")])
def _run_dist(c, jobs):
    r = distance(c["metric"], c["from"], c["to"], _opts(c))
    res = {"distance": r.value, "departure": r.departure, "from": c["from"], "to": c["to"],
           "diagnostics": r.diagnostics}
    return Outcome(res, {"tol": c["tol"]}, {},
                   (["x0", "y0", "x1", "y1", "distance"], [[*c["from"], *c["to"], r.value]]))


@command("matrix", "pairwise distance matrix of a point set",
         "Distance matrix d_M(p_i, p_j) over the net points in the window (or --points).",
         [Param("points", parse_str, None, "points file (CSV x,y) or 'x,y;x,y;...'"),
          Param("tol", parse_float, 1e-8, "endpoint tolerance"), Param("h", parse_float, 1e-3, "RK4 step"),
          Param("max_points", parse_int, 400, "refuse larger point sets")], net=True)
def _run_matrix(c, jobs):
    if c["points"] is not None:
        src = c["points"]
        if os.path.exists(src):
            with open(src, newline="") as fh:
                P = read_points_csv(fh)
        else:
            P = np.array(parse_points(src), dtype=float)
    else:
        P = _net(c, 2).points
    if len(P) > c["max_points"]:
        raise UsageError(f"{len(P)} points exceed max_points={c['max_points']}")
    D = distance_matrix(c["metric"], P, jobs=jobs, opts=_opts(c))
    n = len(P)
    rows = [[str(i)] + [float(v) for v in D[i]] for i in range(n)]
    return Outcome({"points": P, "matrix": D}, {"tol": c["tol"]}, {},
                   ([""] + [str(i) for i in range(n)], rows))


def _stride(n, every):
    idx = list(range(0, n, max(1, every)))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return idx


@command("shoot", "integrate a unit-speed geodesic",
         "Geodesic initial value problem: unit-speed geodesic from a point at a given angle.",
         [Param("from", parse_point, (0.0, 0.0), "x,y"), Param("angle", parse_float, 0.0, "radians"),
          Param("length", parse_float, 10.0, "arclength"), Param("h", parse_float, 1e-3, "RK4 step"),
          Param("every", parse_int, 100, "keep every k-th sample in the output")])
def _run_shoot(c, jobs):
    path = shoot(c["metric"], c["from"], c["angle"], c["length"], c["h"])
    idx = _stride(len(path.t), c["every"])
    rows = [[float(path.t[i]), *map(float, path.p[i]), *map(float, path.v[i])] for i in idx]
    res = {"end": path.end, "end_velocity": path.v[-1], "length": path.length,
           "max_speed_drift": path.max_speed_drift, "samples": rows}
    return Outcome(res, {"h": c["h"]}, {}, (["t", "x", "y", "vx", "vy"], rows))


@command("jacobi", "Jacobi field along a geodesic",
         "Normal Jacobi field J'' + K J = 0, J(0) = 0, J'(0) = 1 along a geodesic; "
         "reports the first conjugate point if any.",
         [Param("from", parse_point, (0.0, 0.0), "x,y"), Param("angle", parse_float, 0.0, "radians"),
          Param("length", parse_float, 2.0, "arclength"), Param("h", parse_float, 1e-3, "RK4 step"),
          Param("every", parse_int, 100, "keep every k-th sample in the output")])
def _run_jacobi(c, jobs):
    path = shoot(c["metric"], c["from"], c["angle"], c["length"], c["h"])
    jt = jacobi(c["metric"], path)
    idx = _stride(len(jt.t), c["every"])
    rows = [[float(jt.t[i]), float(jt.J[i]), float(jt.dJ[i])] for i in idx]
    res = {"first_zero": jt.first_zero, "J_end": float(jt.J[-1]), "dJ_end": float(jt.dJ[-1]),
           "samples": rows}
    return Outcome(res, {"h": c["h"]}, {}, (["t", "J", "dJ"], rows))


@command("net-sample", "sample a point set",
         "Seeded sample of a lattice, Poisson or jittered net in a window.",
         [Param("max_points", parse_int, 10 ** 6, "refuse larger samples")], net=True)
def _run_net_sample(c, jobs):
    L = _net(c, 10)
    if L.estimated_count() > c["max_points"]:
        raise UsageError(f"about {L.estimated_count():.0f} points exceed max_points={c['max_points']}")
    P = L.points
    rows = [[float(x), float(y)] for x, y in P]
    res = {"count": len(P), "provenance": L.provenance.to_spec(), "window": L.window, "points": rows}
    return Outcome(res, {}, {}, (["x", "y"], rows))


@command("qn1", "parabolic tube test",
         "Tube condition: every isometric copy of the tube under the width function "
         "phi (sublinear in sqrt r) must meet the set.",
         [Param("phi", parse_width, "const:1", "const:c | power:c,alpha"),
          Param("isometries", parse_int, 1000, "number of random tubes")], net=True)
def _run_qn1(c, jobs):
    L = _net(c, 50)
    rep = check_qn1(L, c["phi"], c["isometries"], c["seed"])
    res = {"n_tubes": rep.n_tubes, "hits": rep.hits, "hit_fraction": rep.hit_fraction,
           "worst_margin": rep.worst_margin, "worst_tube": rep.worst_tube,
           "min_tube_length": rep.min_tube_length, "warnings": rep.warnings}
    return Outcome(res, {"phi": str(c["phi"])}, {"qn1": rep.passed})


@command("qn2", "sector radius-ratio test",
         "Sector condition: every open sector contains points going to infinity whose "
         "consecutive radius ratios tend to 1.",
         [Param("apex", parse_point, (0.0, 0.0), "x,y"),
          Param("interval", _floats, "0,0.5", "a0,a1 sector angles in radians"),
          Param("min_count", parse_int, 16, "points required in the sector"),
          Param("threshold", parse_float, 1.1, "tail ratio threshold")], net=True)
def _run_qn2(c, jobs):
    L = _net(c, 50)
    if len(c["interval"]) != 2:
        raise UsageError("interval needs two angles")
    rep = check_qn2(L, c["apex"], c["interval"], c["min_count"], c["threshold"])
    res = {"count": rep.count, "tail_ratio": rep.tail_ratio, "ratios": rep.ratios,
           "reason": rep.reason}
    return Outcome(res, {"threshold": c["threshold"]}, {"qn2": rep.passed},
                   (["ratio"], [[float(r)] for r in rep.ratios]))


@command("drift", "narrow drift sequence in a direction",
         "Narrow drift: points p_m with |p_m| -> infinity and |p_m| - <p_m, v> -> 0.",
         [Param("direction", parse_direction, "1,0", "x,y or angle"),
          Param("count", parse_int, 16, "number of dyadic radius bands"),
          Param("r_min", parse_float, 1.0, "radius of the first band")], net=True)
def _run_drift(c, jobs):
    L = _net(c, c["r_min"] * 2.0 ** (c["count"] + 1))
    seq = narrow_drift(L, c["direction"], c["count"], c["r_min"])
    rows = [[float(p[0]), float(p[1]), float(math.hypot(*p)), float(r)]
            for p, r in zip(seq.points, seq.residuals)]
    res = {"points": seq.points, "residuals": seq.residuals, "complete": seq.complete}
    return Outcome(res, {}, {}, (["x", "y", "radius", "residual"], rows))


@command("busemann", "Busemann function of a geodesic ray",
         "Busemann function B(x) = lim t - d(gamma(t), x) of a geodesic ray, truncated at length T.",
         [Param("from", parse_point, (0.0, 0.0), "ray start x,y"),
          Param("angle", parse_float, 0.0, "ray direction in radians"),
          Param("at", parse_point, (1.0, 2.0), "evaluation point x,y"),
          Param("T", parse_float, 64.0, "ray length"), Param("h", parse_float, 1e-3, "RK4 step")])
def _run_busemann(c, jobs):
    ray = shoot(c["metric"], c["from"], c["angle"], c["T"], c["h"])
    val = busemann_ray(c["metric"], ray, c["at"], c["T"], _opts(c))
    return Outcome({"value": val, "ray_end": ray.end})


def _far_window(c, key="R", factor=4.0):
    return c[key] * factor


@command("ideal-b", "minimal ideal-boundary function B_v",
         "Ideal boundary: truncated B_v(x) = d(p, 0) - d(p, x) for the far narrow-drift point p "
         "towards v; compares with <x, v> and with the value at R/2.",
         [Param("direction", parse_direction, "1,0", "x,y or angle"),
          Param("R", parse_float, 1000.0, "truncation radius"),
          Param("at", parse_points, "1,2", "evaluation points 'x,y;x,y;...'")], net=True)
def _run_ideal_b(c, jobs):
    L = _net(c, _far_window(c))
    rep = ideal_B_report(c["metric"], L, c["direction"], c["R"], c["at"])
    rows = [[*p, a, b, l] for p, a, b, l in zip(c["at"], rep["values"], rep["values_half_R"], rep["linear"])]
    return Outcome(rep, {}, {}, (["x", "y", "B", "B_half_R", "linear"], rows))


@command("gap", "singleton gap B^v - B_v",
         "Singleton ideal boundary: max of B^v - B_v (B^v = -B_{-v}) over sample points, "
         "expected to vanish.",
         [Param("direction", parse_direction, "1,0", "x,y or angle"),
          Param("R", parse_float, 500.0, "truncation radius"),
          Param("samples", parse_int, 8, "random sample points"),
          Param("box", parse_float, 3.0, "samples uniform in [-box, box]^2"),
          Param("tolerance", parse_float, 5e-2, "gap threshold")], net=True)
def _run_gap(c, jobs):
    L = _net(c, _far_window(c))
    rng = np.random.default_rng(c["seed"])
    pts = [tuple(map(float, p)) for p in rng.uniform(-c["box"], c["box"], (c["samples"], 2))]
    rep = singleton_gap(c["metric"], L, c["direction"], c["R"], pts, _opts(c), c["tolerance"])
    res = {"gap": rep.gap, "min_gap": rep.min_gap, "ordered": rep.ordered, "samples": pts,
           "values": rep.values, "B_plus": rep.B_plus, "B_minus": rep.B_minus}
    rows = [[*p, f, a, b] for p, f, a, b in zip(pts, rep.values, rep.B_plus, rep.B_minus)]
    return Outcome(res, {"gap": c["tolerance"]}, {"gap": rep.gap < c["tolerance"]},
                   (["x", "y", "gap", "B_plus", "B_minus"], rows))


@command("transport", "transport line of B_v through a point",
         "Transport line: complete geodesic along which B_v grows at unit rate; reports the "
         "growth residual of the truncated B_v along it.",
         [Param("direction", parse_direction, "1,0", "x,y or angle"),
          Param("at", parse_point, (1.0, 2.0), "point x,y"),
          Param("length", parse_float, 10.0, "trace length"),
          Param("R", parse_float, 1000.0, "truncation radius"),
          Param("samples", parse_int, 11, "sample points along the trace"),
          Param("tolerance", parse_float, None, "residual threshold (default 1e-2 flat, 5e-2 curved)")],
         net=True)
def _run_transport(c, jobs):
    L = _net(c, _far_window(c))
    tr = transport_line(c["metric"], L, c["direction"], c["at"], c["length"], c["R"],
                        c["samples"], c["tolerance"], _opts(c))
    pts = tr.path.point_at(tr.times)
    rows = [[float(t), float(p[0]), float(p[1]), float(b)] for t, p, b in zip(tr.times, pts, tr.B)]
    res = {"max_residual": tr.max_residual, "far_point": tr.far_point, "times": tr.times,
           "points": pts, "B": tr.B}
    return Outcome(res, {"residual": tr.tolerance}, {"transport": tr.valid},
                   (["t", "x", "y", "B"], rows))


@command("decay", "net distance along asymptotic geodesics",
         "Quasi-net control along geodesics: d(gamma(t), L) / t for the geodesic leaving p "
         "in the asymptotic direction of v.",
         [Param("at", parse_point, (0.0, 0.0), "p as x,y"),
          Param("direction", parse_direction, "1,0", "x,y or angle"),
          Param("radii", _floats, "5,10,20", "times t"),
          Param("R", parse_float, None, "truncation radius for the direction")], net=True)
def _run_decay(c, jobs):
    L = _net(c, 40.0 * max(c["radii"]))
    rep = net_distance_decay(c["metric"], L, c["at"], c["direction"], c["radii"], c["R"], _opts(c))
    res = {"radii": rep.radii, "ratios": rep.ratios, "distances": rep.distances,
           "nearest": rep.nearest, "direction": rep.direction, "warnings": rep.warnings}
    rows = [[t, q, d, *n] for t, q, d, n in zip(rep.radii, rep.ratios, rep.distances, rep.nearest)]
    return Outcome(res, {}, {}, (["t", "ratio", "distance", "nearest_x", "nearest_y"], rows))


@command("area-growth", "area of metric disks over pi r^2",
         "Euclidean area growth: area(D_M(x, r)) / (pi r^2), by Jacobi-field polar integration "
         "or a grid distance field.",
         [Param("at", parse_point, (0.0, 0.0), "centre x,y"),
          Param("radii", _floats, "1,5,10", "radii"),
          Param("method", parse_str, "polar", "polar (PolarJacobi) or grid (GridSum)"),
          Param("n_theta", parse_int, 256, "directions (polar)"),
          Param("cells", parse_int, 120, "cells per half-width (grid)"),
          Param("h", parse_float, 2e-3, "RK4 step (polar)")])
def _run_area_growth(c, jobs):
    rep = area_growth(c["metric"], c["at"], c["radii"], c["method"], n_theta=c["n_theta"],
                      h=c["h"], cells=c["cells"], jobs=jobs)
    res = {"radii": rep.radii, "areas": rep.areas, "ratios": rep.ratios, "method": rep.method,
           "params": rep.params}
    rows = [[r, a, q] for r, a, q in zip(rep.radii, rep.areas, rep.ratios)]
    return Outcome(res, {}, {}, (["r", "area", "ratio"], rows))


@command("gram", "four-point planarity by Gram rank",
         "Planar embeddability of four points: the Gram matrix "
         "(-d_ij^2 + d_i4^2 + d_j4^2) / 2 must have rank at most two.",
         [Param("quad", parse_str, None, "4x4 distance CSV"),
          Param("points", parse_points, None, "four points 'x,y[,z];...' instead of --quad"),
          Param("threshold", parse_float, 1e-9, "sigma_3 / sigma_1 threshold")])
def _run_gram(c, jobs):
    if c["quad"] is not None:
        with open(c["quad"], newline="") as fh:
            q = read_quad_csv(fh)
    elif c["points"] is not None:
        if len(c["points"]) != 4:
            raise UsageError("gram needs exactly four points")
        q = QuadDistances.from_points(c["points"])
    else:
        raise UsageError("give --quad or --points")
    rep = gram_rank_test(q, c["threshold"])
    res = rep.to_dict()
    res["distances"] = q.d
    return Outcome(res, {"threshold": c["threshold"]}, {"planar": rep.planar})


@command("witness", "rigidity witness on a net",
         "Rigidity witness: max |d_M(p, q) - |p - q|| over pairs of net points; a surface "
         "containing an isometric copy of the net must be flat, so any deviation is a witness.",
         [Param("pair_budget", parse_int, 2000, "all pairs up to this count, else a seeded sample"),
          Param("threshold", parse_float, 1e-6, "deviation counted as a witness"),
          Param("tol", parse_float, 1e-8, "endpoint tolerance"), Param("h", parse_float, 1e-3, "RK4 step")],
         net=True)
def _run_witness(c, jobs):
    L = _net(c, 3)
    rep = rigidity_witness(c["metric"], L, c["pair_budget"], c["seed"], jobs, _opts(c))
    rows = [[*p, *q, d, e, dev] for p, q, d, e, dev in rep.table]
    return Outcome(rep.to_dict(), {"threshold": c["threshold"]},
                   {"no_witness": not rep.exceeds(c["threshold"])},
                   (["px", "py", "qx", "qy", "d", "euclid", "deviation"], rows))


UNIT_SQUARE = {"polygon": [[0, 0], [1, 0], [1, 1], [0, 1]]}
_MC = [Param("region", parse_region, UNIT_SQUARE, 'JSON {"polygon": [...]} / {"disk": {...}} or a file'),
       Param("N", parse_int, 10 ** 6, "sampled lines"),
       Param("R0", parse_float, 2.0, "radius of the sampling disk"),
       Param("sigmas", parse_float, 3.0, "standard errors allowed against the exact value")]


def _mc_outcome(est, exact, c, name):
    res = est.to_dict()
    res["exact"] = exact
    res["region"] = c["region"].to_spec()
    ok = est.within(exact, c["sigmas"])
    return Outcome(res, {"sigmas": c["sigmas"]}, {name: ok},
                   (["value", "stderr", "N", "seed", "exact"],
                    [[est.value, est.stderr, est.N, est.seed, exact]]))


@command("crofton", "Crofton perimeter estimate",
         "Crofton formula: perimeter of a convex region = 1/2 of the measure of oriented lines "
         "meeting it (measure d theta dp).", _MC)
def _run_crofton(c, jobs):
    est = crofton_perimeter(c["region"], LineMeasureSampler(c["R0"], c["N"], c["seed"]), jobs)
    return _mc_outcome(est, c["region"].perimeter(), c, "crofton")


@command("santalo", "Santalo area estimate",
         "Santalo formula: area of a convex region = 1/(2 pi) times the integral of chord "
         "lengths over oriented lines.", _MC)
def _run_santalo(c, jobs):
    est = santalo_area(c["region"], LineMeasureSampler(c["R0"], c["N"], c["seed"]), jobs)
    return _mc_outcome(est, c["region"].area(), c, "santalo")


@command("area-continuity", "scaled disk area mu_r(D) against pi",
         "Area continuity of rescaled metrics: mu_r(D) = area(D_M(0, r)) / r^2 should approach pi.",
         [Param("radii", _floats, "5,10,20", "increasing radii"),
          Param("method", parse_str, "grid", "grid or polar"),
          Param("resolution", parse_int, None, "grid cells per half-width or polar directions"),
          Param("tolerance", parse_float, 1e-3 * math.pi, "|mu_r - pi| accepted without a trend")])
def _run_area_continuity(c, jobs):
    rep = area_continuity(c["metric"], c["radii"], c["method"], c["resolution"], jobs)
    res = rep.to_dict()
    ok = rep.decreasing or max(rep.deviations) <= c["tolerance"]
    rows = [[r, m, q, d] for r, m, q, d in zip(rep.radii, rep.mu, rep.ratios, rep.deviations)]
    return Outcome(res, {"deviation": c["tolerance"]}, {"converging": ok},
                   (["r", "mu", "ratio", "deviation"], rows))


@command("scaled", "rescaled distance d_r",
         "Rescaled metric d_r(x, y) = d(T_r x, T_r y) / r with T_r following asymptotic "
         "geodesic rays; should approach |x - y|.",
         [Param("r", parse_float, 10.0, "scale"),
          Param("from", parse_point, (1.0, 0.0), "x in the plane"),
          Param("to", parse_point, (0.0, 1.0), "y in the plane"),
          Param("R", parse_float, 1000.0, "truncation radius for directions")], net=True)
def _run_scaled(c, jobs):
    L = _net(c, _far_window(c))
    sm = ScaledMetric(c["metric"], c["r"], net=L, R=c["R"], opts=_opts(c))
    d = scaled_distance(sm, c["from"], c["to"])
    e = math.dist(c["from"], c["to"])
    res = {"d_r": d, "euclid": e, "deviation": abs(d - e), "T_from": sm.T(c["from"]),
           "T_to": sm.T(c["to"])}
    return Outcome(res, {}, {}, (["d_r", "euclid"], [[d, e]]))


# ---------------------------------------------------------------------------
# plumbing


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, Width):
        return str(x)
    if hasattr(x, "to_spec"):
        return x.to_spec()
    return x


def _key_line(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return 1


def load_config(path: str, cmd: Command):
    """Read a JSON config; returns ``(values, key -> line)``."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"{path}: {e.strerror}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
    if not isinstance(data, dict):
        raise UsageError(f"{path}:1: config must be a JSON object")
    known = {p.name for p in COMMON + (NET if cmd.net else []) + cmd.params} - {"config"}
    values, lines = {}, {}
    for key, val in data.items():
        name = key.replace("-", "_")
        line = _key_line(text, key)
        if name == "command":
            if val != cmd.name:
                raise UsageError(f"{path}:{line}: config is for command {val!r}, not {cmd.name!r}")
            continue
        if name not in known:
            raise UsageError(f"{path}:{line}: unknown key {key!r} for command {cmd.name!r}")
        values[name] = val
        lines[name] = line
    return values, lines


def resolve(cmd: Command, ns: argparse.Namespace) -> tuple:
    """Merge defaults < config file < flags; returns (parsed values, config echo)."""
    cfg, lines = ({}, {}) if ns.config is None else load_config(ns.config, cmd)
    parsed, echo = {}, {}
    for p in COMMON + (NET if cmd.net else []) + cmd.params:
        raw = getattr(ns, p.name, None)
        where = f"--{p.name.replace('_', '-')}"
        if raw is None and p.name in cfg:
            raw = cfg[p.name]
            where = f"{ns.config}:{lines[p.name]}: {p.name}"
        if raw is None:
            raw = p.default
        if raw is None:
            if p.required:
                raise UsageError(f"missing required option --{p.name.replace('_', '-')}")
            parsed[p.name] = None
            echo[p.name] = None
            continue
        try:
            parsed[p.name] = p.parse(raw)
        except (ValueError, TypeError, KeyError, OSError, RigidityLabError, json.JSONDecodeError) as e:
            raise UsageError(f"{where}: {e}")
        echo[p.name] = parsed[p.name]
    if parsed["format"] not in ("json", "csv"):
        raise UsageError(f"format must be json or csv, got {parsed['format']!r}")
    if parsed["jobs"] is None:
        parsed["jobs"] = default_jobs()
    if parsed["jobs"] < 1:
        raise UsageError("jobs must be at least 1")
    echo["jobs"] = parsed["jobs"]
    echo["metric"] = parsed["metric"].to_spec()
    return parsed, echo


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rigidity-lab",
        description="Numerical experiments on flat-at-infinity conformal surfaces and nets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    for cmd in COMMANDS.values():
        sp = sub.add_parser(cmd.name, help=cmd.help, description=cmd.description)
        for p in COMMON + (NET if cmd.net else []) + cmd.params:
            default = p.default if not isinstance(p.default, dict) else json.dumps(p.default)
            extra = "" if default is None else f" (default: {default})"
            sp.add_argument(f"--{p.name.replace('_', '-')}", dest=p.name, default=None,
                            metavar=p.name.upper(), help=p.help + extra)
        sp.add_argument("--config", default=None, metavar="PATH",
                        help="JSON file of option values; flags take precedence")
    return parser


def _render(report: dict, outcome: Outcome, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"
    header, rows = outcome.table if outcome.table is not None else _kv_table(outcome.results)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in _clean(row)])
    return buf.getvalue()


_NEGATIVE = re.compile(r"^-[\d.]")


def _attach_negative_values(argv):
    """Rewrite ``--opt -3,0.5`` as ``--opt=-3,0.5`` so argparse accepts negative coordinates."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a.startswith("--") and "=" not in a and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    cmd = COMMANDS[ns.command]
    t0 = time.perf_counter()
    try:
        c, echo = resolve(cmd, ns)
        outcome = cmd.run(c, c["jobs"])
    except UsageError as e:
        print(f"rigidity-lab {cmd.name}: error: {e}", file=sys.stderr)
        return 2
    except (RigidityLabError, ValueError, OSError) as e:
        print(f"rigidity-lab {cmd.name}: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    code = 0 if all(outcome.verdicts.values()) else 1
    report = {
        "command": cmd.name,
        "version": __version__,
        "config": echo,
        "results": outcome.results,
        "tolerances": outcome.tolerances,
        "verdicts": outcome.verdicts,
        "passed": code == 0,
        "duration_s": time.perf_counter() - t0,
    }
    text = _render(report, outcome, c["format"])
    if c["out"]:
        with open(c["out"], "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
