"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary under
"acceptance criteria") and then asserts.  Criterion 3 is a known red: the
tetrahedral example's Gram ratio is (2 - sqrt 3)/(2 + sqrt 3) = 0.0718, not
above 0.2.  It is marked strict xfail so it shows up as failing without
breaking the suite, and it turns into an error if it ever starts passing.
"""

import json
import math
import time

import numpy as np
import pytest

from rigidity_lab.asymptotics import area_growth, busemann_approx, singleton_gap, transport_line
from rigidity_lab.cli import run
from rigidity_lab.distance import distance, distance_matrix
from rigidity_lab.embedtest import QuadDistances, gram_rank_test, rigidity_witness
from rigidity_lab.geodesic import jacobi, shoot
from rigidity_lab.integralgeom import (Disk, LineMeasureSampler, Polygon, area_continuity,
                                       circle_identity, crofton_perimeter, santalo_area)
from rigidity_lab.metric import ConformalMetric
from rigidity_lab.nets import PointSet, TubeSpec, Width, check_qn1, check_qn2

FLAT = ConformalMetric.flat()
STEREO = ConformalMetric.stereographic(1.0)
ORIGIN_BUMP = ConformalMetric.bump(0.2, (0.0, 0.0), 1.0)
CELL_BUMP = ConformalMetric.bump(0.5, (0.5, 0.5), 0.4)


def check(failures, ok, message):
    if not ok:
        failures.append(message)


def test_criterion_1_flat_distance(record_criterion):
    f = []
    t0 = time.perf_counter()
    pairs = np.random.default_rng(2024).uniform(-10, 10, (100, 2, 2))
    err = max(abs(distance(FLAT, x, y).value - math.dist(x, y)) for x, y in pairs)
    dt = time.perf_counter() - t0
    check(f, err < 1e-6, f"max error {err:.3g} >= 1e-6")
    check(f, dt < 30, f"runtime {dt:.1f} s >= 30 s")
    record_criterion(1, "flat-metric distance exactness", f,
                     f"max |d - |x-y|| = {err:.2e}, runtime {dt:.2f} s")
    assert not f


def test_criterion_2_unit_speed_and_jacobi(record_criterion):
    f = []
    drifts = []
    for m in (FLAT, ORIGIN_BUMP, CELL_BUMP, ConformalMetric.bump(-0.3, (0.5, 0.2), 0.8)):
        path = shoot(m, (-3.0, 0.3), 0.2, 20.0, 1e-3)
        speed = np.exp(m.phi(path.p)) * np.hypot(path.v[:, 0], path.v[:, 1])
        # both the renormalized speed and the drift recorded before renormalization
        drifts.append(max(float(np.max(np.abs(speed - 1))), path.max_speed_drift))
    check(f, max(drifts) < 1e-8, f"unit-speed drift {max(drifts):.3g}")
    js = jacobi(STEREO, shoot(STEREO, (0, 0), 0.0, 2.0, 1e-3))
    e_sin = float(np.max(np.abs(js.J - np.sin(js.t))))
    check(f, e_sin < 1e-6, f"sup |J - sin t| = {e_sin:.3g}")
    jf = jacobi(FLAT, shoot(FLAT, (0, 0), 0.3, 20.0, 1e-3))
    e_t = float(np.max(np.abs(jf.J - jf.t)))
    check(f, e_t < 1e-8, f"sup |J - t| = {e_t:.3g}")
    record_criterion(2, "unit-speed and Jacobi oracles", f,
                     f"speed drift {max(drifts):.1e}, stereo {e_sin:.1e}, flat {e_t:.1e}")
    assert not f


@pytest.mark.xfail(strict=True, reason="tetrahedral example has sigma3/sigma1 = 0.0718 < 0.2; "
                                       "see module docstring")
def test_criterion_3_gram(record_criterion):
    f = []
    rng = np.random.default_rng(3)
    planar = [gram_rank_test(QuadDistances.from_points(rng.uniform(-5, 5, (4, 2)))).ratio
              for _ in range(100)]
    check(f, max(planar) < 1e-9, f"planar max ratio {max(planar):.3g}")
    spatial = []
    while len(spatial) < 100:
        P = rng.uniform(-1, 1, (4, 3))
        # non-degenerate: normalized volume at least 0.2 of a regular tetrahedron
        vol = abs(np.linalg.det(P[:3] - P[3])) / 6
        l_rms = math.sqrt(np.mean([np.sum((P[i] - P[j]) ** 2)
                                   for i in range(4) for j in range(i + 1, 4)]))
        if 6 * math.sqrt(2) * vol / l_rms ** 3 < 0.2:
            continue
        spatial.append(gram_rank_test(QuadDistances.from_points(P)).ratio)
    check(f, min(spatial) > 1e-3, f"spatial min ratio {min(spatial):.3g}")
    tet = gram_rank_test(QuadDistances.from_points([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]))
    check(f, tet.ratio > 0.2,
          f"tetrahedron ratio {tet.ratio:.4f} <= 0.2 (G block [[1,1,1],[1,2,1],[1,1,2]] has "
          f"eigenvalues 2+sqrt3, 1, 2-sqrt3; best base point gives {tet.max_ratio_any_base:.3f})")
    record_criterion(3, "Gram rank criterion", f,
                     f"planar max {max(planar):.1e}, spatial min {min(spatial):.1e}, "
                     f"tetrahedron {tet.ratio:.4f}")
    assert not f


def test_criterion_4_rigidity_witness(record_criterion, capsys):
    f = []
    flat = rigidity_witness(FLAT, PointSet.lattice(1.0, (-3, 3, -3, 3)))
    check(f, flat.max_deviation < 1e-6, f"flat deviation {flat.max_deviation:.3g}")
    bump = rigidity_witness(CELL_BUMP, PointSet.lattice(1.0, (-2, 2, -2, 2)))
    check(f, bump.max_deviation > 1e-3, f"bump deviation {bump.max_deviation:.3g}")
    code = run(["witness", "--metric", "bump:0.5,0.5,0.5,0.4", "--net", "lattice:1", "--window", "2"])
    capsys.readouterr()
    check(f, code == 1, f"witness exit code {code}")
    record_criterion(4, "rigidity witness", f,
                     f"flat {flat.max_deviation:.1e}, bump {bump.max_deviation:.4f} "
                     f"at {bump.worst_pair}, exit {code}")
    assert not f


def test_criterion_5_busemann(record_criterion):
    f = []
    Z2 = PointSet.lattice(1.0, (-4e4, 4e4, -4e4, 4e4))
    xs = [(0.0, 0.0)] + [(a, b) for a in (-2, 0, 2) for b in (-2, 0, 2) if (a, b) != (0, 0)]
    xs += [(3 * math.cos(t), 3 * math.sin(t)) for t in np.arange(8) * math.pi / 4 + 0.2]
    worst = 0.0
    for k in range(16):
        v = (math.cos(2 * math.pi * k / 16), math.sin(2 * math.pi * k / 16))
        B = busemann_approx(FLAT, Z2, v, 1000.0)
        worst = max(worst, max(abs(B(x) - (x[0] * v[0] + x[1] * v[1])) for x in xs))
    check(f, worst < 0.01, f"flat |B_v - <x,v>| = {worst:.3g}")
    rng = np.random.default_rng(5)
    pts = [tuple(p) for p in rng.uniform(-3, 3, (8, 2))]
    gap = singleton_gap(ORIGIN_BUMP, Z2, (1.0, 0.0), 500.0, pts).gap
    check(f, gap < 5e-2, f"bump gap {gap:.3g}")
    res = 0.0
    for v, x in (((1, 0), (1, 2)), ((0.6, 0.8), (-2, 1)), ((-1, 1), (0.5, -0.5))):
        tr = transport_line(FLAT, Z2, v, x, 10.0, 1000.0)
        res = max(res, tr.max_residual)
    check(f, res < 1e-2, f"flat transport residual {res:.3g}")
    record_criterion(5, "Busemann and ideal boundary", f,
                     f"flat B error {worst:.1e}, bump gap {gap:.1e}, transport residual {res:.1e}")
    assert not f


def test_criterion_6_quasi_nets(record_criterion):
    f = []
    Z = PointSet.lattice(1.0, (-50, 50, -50, 50))
    q1 = check_qn1(Z, Width.parse("const:1"), 10_000, seed=0)
    check(f, q1.hit_fraction == 1.0, f"lattice qn1 hit fraction {q1.hit_fraction}")
    line = PointSet.custom([(k, 0.0) for k in range(-50, 51)], window=(-50, 50, -50, 50))
    ql = check_qn1(line, Width.parse("const:1"), tubes=[TubeSpec(math.pi / 2, (0.0, 10.0), Width())])
    qr = check_qn1(line, Width.parse("const:1"), 1000, seed=1)
    check(f, not ql.passed and not qr.passed, "collinear set passed qn1")
    q2 = check_qn2(PointSet.lattice(1.0, (-100, 100, -100, 100)), (0, 0), (0.2, 0.5))
    check(f, q2.passed and q2.tail_ratio < 1.1, f"lattice qn2 tail ratio {q2.tail_ratio:.3f}")
    rng = np.random.default_rng(0)
    passed = 0
    for s in range(50):
        a0 = rng.uniform(0, 2 * math.pi)
        width = rng.uniform(0.1, 0.6)
        L = PointSet.poisson(1.0, (-100, 100, -100, 100), seed=s)
        passed += check_qn2(L, (0, 0), (a0, a0 + width)).passed
    check(f, passed >= 45, f"poisson qn2 passed {passed}/50")
    record_criterion(6, "quasi-net checks", f,
                     f"lattice qn1 {q1.hit_fraction}, collinear hits {qr.hit_fraction:.3f}, "
                     f"lattice tail {q2.tail_ratio:.3f}, poisson {passed}/50")
    assert not f


def test_criterion_7_area_growth(record_criterion):
    f = []
    flat = area_growth(FLAT, (0, 0), [1, 5, 10]).ratios
    check(f, all(abs(q - 1) < 1e-3 for q in flat), f"flat ratios {flat}")
    cap = area_growth(STEREO, (0, 0), [1.0]).ratios[0]
    e_cap = abs(cap - 2 * (1 - math.cos(1.0)))
    check(f, e_cap < 2e-3, f"stereographic error {e_cap:.3g}")
    bump = area_growth(ORIGIN_BUMP, (0, 0), [5, 10, 20]).ratios
    dev = [abs(q - 1) for q in bump]
    check(f, dev[0] > dev[1] > dev[2], f"bump deviations {dev}")
    polar = area_growth(ORIGIN_BUMP, (0, 0), [5]).ratios[0]
    grid = area_growth(ORIGIN_BUMP, (0, 0), [5], method="grid").ratios[0]
    rel = abs(polar - grid) / polar
    check(f, rel < 0.02, f"polar vs grid {rel:.3g}")
    record_criterion(7, "area growth", f,
                     f"flat max dev {max(abs(q - 1) for q in flat):.1e}, cap error {e_cap:.1e}, "
                     f"bump dev {[round(d, 5) for d in dev]}, polar/grid {rel:.1e}")
    assert not f


def test_criterion_8_integral_geometry(record_criterion):
    f = []
    s = LineMeasureSampler(R0=2.0, N=10 ** 6, seed=0)
    sq = Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))
    disk = Disk((0.0, 0.0), 1.0)
    ests = {"crofton square": (crofton_perimeter(sq, s), 4.0),
            "crofton disk": (crofton_perimeter(disk, s), 2 * math.pi),
            "santalo disk": (santalo_area(disk, s), math.pi),
            "santalo square": (santalo_area(sq, s), 1.0)}
    for name, (e, exact) in ests.items():
        check(f, e.within(exact), f"{name} {e.value:.4f} vs {exact:.4f} (se {e.stderr:.4f})")
    circ = circle_identity((0.5, 1.0, 1.5))
    check(f, all(r["within_3se"] for r in circ), "circle identity")
    ac = area_continuity(ORIGIN_BUMP, [5, 10, 20])
    check(f, ac.decreasing, f"area continuity deviations {ac.deviations}")
    zs = ", ".join(f"{n} {(e.value - x) / e.stderr:+.1f}se" for n, (e, x) in ests.items())
    record_criterion(8, "integral geometry", f,
                     f"{zs}; |mu - pi| {[round(d, 5) for d in ac.deviations]}")
    assert not f


DETERMINISM_RUNS = [
    ["dist", "--metric", "bump:0.2,0,0,1", "--from", "-2,0.3", "--to", "2,0.1"],
    ["matrix", "--metric", "bump:0.5,0.5,0.5,0.4", "--net", "poisson:1", "--window", "1.5",
     "--seed", "4"],
    ["shoot", "--metric", "bump:0.2,0,0,1", "--from", "-2,0.3", "--length", "4"],
    ["jacobi", "--metric", "stereographic:1", "--length", "2"],
    ["net-sample", "--net", "poisson:1", "--window", "10", "--seed", "7"],
    ["qn1", "--net", "jittered:1,0.3", "--window", "30", "--isometries", "200", "--seed", "3"],
    ["qn2", "--net", "poisson:1", "--window", "60", "--seed", "2"],
    ["drift", "--net", "poisson:1", "--window", "2000", "--direction", "0.7", "--count", "10",
     "--seed", "1"],
    ["busemann", "--metric", "bump:0.2,0,0,1", "--from", "-3,0.4", "--T", "32"],
    ["ideal-b", "--metric", "bump:0.2,0,0,1", "--net", "poisson:1", "--R", "200", "--seed", "2"],
    ["gap", "--metric", "bump:0.2,0,0,1", "--R", "200", "--samples", "4", "--seed", "5"],
    ["transport", "--net", "poisson:1", "--R", "300", "--seed", "6"],
    ["decay", "--direction", "0.6154797", "--radii", "10,100"],
    ["area-growth", "--metric", "bump:0.2,0,0,1", "--radii", "1,5", "--n-theta", "64"],
    ["gram", "--points", "0,0;1,0.2;0.3,1;2,2"],
    ["witness", "--metric", "bump:0.5,0.5,0.5,0.4", "--window", "1"],
    ["crofton", "--region", '{"disk": {"c": [0, 0], "r": 1}}', "--N", "100000", "--seed", "9"],
    ["santalo", "--N", "100000", "--seed", "9"],
    ["area-continuity", "--metric", "bump:0.2,0,0,1", "--radii", "2,4", "--resolution", "40"],
    ["scaled", "--metric", "bump:0.2,0,0,1", "--r", "4", "--R", "300"],
]


def _report_without_duration(argv, path):
    code = run(argv + ["--out", str(path)])
    text = path.read_text()
    kept = [line for line in text.split("\n") if '"duration_s"' not in line]
    return code, "\n".join(kept)


def test_criterion_9_determinism(record_criterion, tmp_path):
    f = []
    out = tmp_path / "report.json"
    names = []
    for argv in DETERMINISM_RUNS:
        c1, a = _report_without_duration(argv, out)
        c2, b = _report_without_duration(argv, out)
        names.append(argv[0])
        check(f, c1 in (0, 1), f"{argv[0]} exit code {c1}")
        check(f, c1 == c2 and a == b, f"{argv[0]} reports differ")
        if c1 in (0, 1):
            check(f, "duration_s" in json.loads(out.read_text()), f"{argv[0]} has no duration")
    P = PointSet.poisson(1.0, (-2, 2, -2, 2), seed=11).points
    d1 = distance_matrix(CELL_BUMP, P, jobs=1)
    d8 = distance_matrix(CELL_BUMP, P, jobs=8)
    check(f, np.array_equal(d1, d8), "distance_matrix differs between 1 and 8 workers")
    check(f, len(set(names)) == 20, "not every subcommand exercised")
    record_criterion(9, "determinism", f,
                     f"{len(set(names))} subcommands byte-identical; {len(P)}-point matrix "
                     f"identical for 1 and 8 workers")
    assert not f
