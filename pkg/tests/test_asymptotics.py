import math

import numpy as np
import pytest

from rigidity_lab.asymptotics import (area_growth, busemann_approx, busemann_ray,
                                      direction_to_infinity, far_point, ideal_B, ideal_B_report,
                                      net_distance_decay, singleton_gap, transport_line,
                                      _angle_diff)
from rigidity_lab.distance import distance
from rigidity_lab.errors import InsufficientWindowError, MethodError
from rigidity_lab.geodesic import shoot
from rigidity_lab.metric import ConformalMetric
from rigidity_lab.nets import PointSet

FLAT = ConformalMetric.flat()
BUMP = ConformalMetric.bump(0.2, (0.0, 0.0), 1.0)
Z2 = PointSet.lattice(1.0, (-4e4, 4e4, -4e4, 4e4))


def unit(a):
    return (math.cos(a), math.sin(a))


def test_busemann_ray_flat_collinear():
    ray = shoot(FLAT, (0, 0), 0.0, 10.0)
    for T in (2.0, 5.0, 10.0):
        assert busemann_ray(FLAT, ray, (2, 0), T) == pytest.approx(2.0, abs=1e-12)


def test_busemann_ray_flat_offset_point():
    ray = shoot(FLAT, (0, 0), 0.0, 200.0, 1e-2)
    T = 100.0
    val = busemann_ray(FLAT, ray, (0, 1), T)
    assert val == pytest.approx(-(math.sqrt(T * T + 1) - T), abs=1e-9)


def test_busemann_ray_monotone_in_T():
    for metric in (FLAT, BUMP):
        ray = shoot(metric, (-3, 0.4), 0.0, 200.0, 1e-2)
        for x in [(0, 1), (1.5, -0.5), (-1, 2)]:
            assert busemann_ray(metric, ray, x, 200.0) >= busemann_ray(metric, ray, x, 100.0)


def test_ideal_B_flat_closed_form():
    v = (1.0, 0.0)
    x = (1.0, 2.0)
    val = ideal_B(FLAT, Z2, v, 1000.0, x)
    p, _ = far_point(Z2, v, 1000.0)
    assert val == pytest.approx(math.hypot(*p) - math.dist(p, x), abs=1e-9)
    assert abs(1.0 - val) < 0.01
    assert abs(1.0 - val) == pytest.approx(abs(1 - (1000 - math.hypot(999, -2))), abs=1e-9)


def test_ideal_B_zero_at_origin():
    for metric in (FLAT, BUMP):
        assert ideal_B(metric, Z2, unit(0.4), 300.0, (0.0, 0.0)) == 0.0


def test_ideal_B_flat_sixteen_directions():
    pts = [(x, y) for x in (-2, 0, 2) for y in (-2, 0, 2)]
    for k in range(16):
        v = unit(2 * math.pi * k / 16)
        B = busemann_approx(FLAT, Z2, v, 1000.0)
        for x in pts:
            assert abs(B(x) - (x[0] * v[0] + x[1] * v[1])) < 0.01


def test_ideal_B_report_stabilizes():
    rep = ideal_B_report(FLAT, Z2, (1, 0), 1000.0, [(1, 2), (0, 3)])
    assert rep["max_abs_linear_error"] < 0.01
    assert rep["stabilization"] < 0.02


def test_ideal_B_two_drift_sequences_agree_on_bump():
    L2 = PointSet.poisson(1.0, (-4000, 4000, -4000, 4000), seed=3)
    v = unit(0.3)
    a = busemann_approx(BUMP, Z2, v, 500.0)
    b = busemann_approx(BUMP, L2, v, 500.0)
    assert a.p != b.p
    rng = np.random.default_rng(1)
    for x in rng.uniform(-3, 3, (10, 2)):
        assert abs(a(x) - b(x)) < 2e-2


def test_insufficient_window():
    with pytest.raises(InsufficientWindowError):
        far_point(PointSet.lattice(1.0, (-50, 50, -50, 50)), (1, 0), 100.0)


def test_busemann_approx_is_one_lipschitz():
    B = busemann_approx(BUMP, Z2, unit(0.3), 200.0)
    rng = np.random.default_rng(0)
    for x, y in rng.uniform(-3, 3, (100, 2, 2)):
        assert abs(B(x) - B(y)) <= distance(BUMP, x, y).value + 1e-6


def test_singleton_gap_flat():
    rng = np.random.default_rng(2)
    pts = [tuple(p) for p in rng.uniform(-3, 3, (10, 2))]
    for a in (0.0, 1.1, 2.5):
        rep = singleton_gap(FLAT, Z2, unit(a), 1000.0, pts)
        assert rep.gap < 0.01 and rep.ordered


def test_singleton_gap_bump():
    rng = np.random.default_rng(3)
    pts = [tuple(p) for p in rng.uniform(-3, 3, (10, 2))]
    rep = singleton_gap(BUMP, Z2, (1.0, 0.0), 500.0, pts)
    assert rep.gap < 5e-2


def test_direction_flat_origin():
    for k in range(8):
        v = unit(0.1 + 2 * math.pi * k / 8)
        w = direction_to_infinity(FLAT, (0, 0), v, Z2, 1000.0)
        p, _ = far_point(Z2, v, 1000.0)
        assert np.linalg.norm(w - p / np.linalg.norm(p)) < 1e-9
        # the far lattice point sits off the ray by at most a cell
        assert np.linalg.norm(w - np.array(v)) < 1.0 / 1000.0


def test_direction_flat_stabilizes_in_R():
    a = direction_to_infinity(FLAT, (5, 5), (1, 0), Z2, 1e3)
    b = direction_to_infinity(FLAT, (5, 5), (1, 0), Z2, 1e4)
    assert _angle_diff(a, b) < 1e-3


def test_direction_map_odd_on_bump():
    for k in range(16):
        v = unit(0.05 + 2 * math.pi * k / 16)
        a = direction_to_infinity(BUMP, (0, 0), v, Z2, 500.0)
        b = direction_to_infinity(BUMP, (0, 0), (-v[0], -v[1]), Z2, 500.0)
        assert _angle_diff(a, -b) < 2e-3


def test_direction_map_injective_on_bump():
    angles = []
    for k in range(64):
        w = direction_to_infinity(BUMP, (0, 0), unit(0.01 + 2 * math.pi * k / 64), Z2, 500.0)
        angles.append(math.atan2(w[1], w[0]))
    steps = np.mod(np.diff(np.unwrap(angles)), 2 * math.pi)
    assert np.all(steps > 0) and np.all(steps < math.pi)
    assert abs(np.unwrap(angles)[-1] - angles[0] - 2 * math.pi * 63 / 64) < 0.2


def test_transport_flat_horizontal():
    tr = transport_line(FLAT, Z2, (1, 0), (1, 2), 10.0, 1000.0)
    assert np.max(np.abs(tr.path.p[:, 1] - 2.0)) < 1e-9
    assert tr.valid and tr.max_residual < 0.01
    assert np.allclose(tr.path.point_at(np.array([5.0]))[0], (1, 2), atol=1e-12)


def test_transport_flat_axis_through_origin():
    v = unit(0.6)
    x = (3 * v[0], 3 * v[1])
    tr = transport_line(FLAT, Z2, v, x, 10.0, 1000.0)
    assert np.linalg.norm(tr.path.point_at(np.array([2.0]))[0]) < 1e-6


def test_transport_traces_agree_on_bump():
    L2 = PointSet.poisson(1.0, (-4000, 4000, -4000, 4000), seed=1)
    x = (0.5, 0.8)
    t1 = transport_line(BUMP, Z2, (1, 0), x, 10.0, 500.0)
    t2 = transport_line(BUMP, L2, (1, 0), x, 10.0, 500.0)
    gap = np.max(np.linalg.norm(t1.path.point_at(t1.times) - t2.path.point_at(t2.times), axis=1))
    assert gap < 1e-2
    assert t1.valid and t2.valid
    assert np.all(t1.residuals >= 0)


def test_decay_flat_on_axis():
    rep = net_distance_decay(FLAT, Z2, (0, 0), (1, 0), [10, 20, 40])
    assert rep.ratios == [0.0, 0.0, 0.0]


def test_decay_flat_irrational():
    a = math.atan(1 / math.sqrt(2))
    rep = net_distance_decay(FLAT, Z2, (0, 0), unit(a), [10, 100, 1000])
    for t, q in zip(rep.radii, rep.ratios):
        assert q <= (math.sqrt(2) / 2) / t
    assert rep.ratios[0] > rep.ratios[1] > rep.ratios[2]


def test_decay_uniformity_probe():
    m2, m3 = [], []
    for k in range(32):
        r = net_distance_decay(FLAT, Z2, (0, 0), unit(0.01 + 2 * math.pi * k / 32), [100, 1000])
        m2.append(r.ratios[0])
        m3.append(r.ratios[1])
    assert max(m3) < max(m2)


def test_area_flat_polar():
    rep = area_growth(FLAT, (0.3, -1.0), [1, 5, 10])
    assert all(abs(q - 1) < 1e-3 for q in rep.ratios)


def test_area_flat_grid():
    rep = area_growth(FLAT, (0, 0), [1, 5], method="grid")
    assert all(abs(q - 1) < 1e-3 for q in rep.ratios)


def test_area_stereographic_cap():
    rep = area_growth(ConformalMetric.stereographic(1.0), (0, 0), [1.0])
    assert abs(rep.ratios[0] - 2 * (1 - math.cos(1.0))) < 2e-3


def test_area_polar_rejects_conjugate_points():
    with pytest.raises(MethodError):
        area_growth(ConformalMetric.stereographic(1.0), (0, 0), [3.5], n_theta=8)


def test_area_method_names():
    a = area_growth(FLAT, (0, 0), [1.0], method="PolarJacobi", n_theta=16)
    assert a.method == "polar"
