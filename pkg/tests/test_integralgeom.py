import json
import math

import numpy as np
import pytest

from rigidity_lab.asymptotics import area_growth
from rigidity_lab.errors import DomainError
from rigidity_lab.integralgeom import (Disk, LineMeasureSampler, OrientedLine, Polygon,
                                       area_continuity, circle_identity, crofton_perimeter,
                                       read_region, region_from_spec, santalo_area)
from rigidity_lab.metric import ConformalMetric

SQUARE = Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))
DISK = Disk((0.0, 0.0), 1.0)
SAMPLER = LineMeasureSampler(R0=2.0, N=10 ** 6, seed=0)


def test_sampler_mass_and_range():
    s = LineMeasureSampler(R0=1.5, N=1000, seed=2)
    assert s.mass == pytest.approx(6 * math.pi)
    theta, p = s.lines()
    assert len(theta) == 1000
    assert np.all((theta >= 0) & (theta < 2 * math.pi)) and np.all(np.abs(p) < 1.5)


def test_sampler_batches_cover_N():
    s = LineMeasureSampler(R0=1.0, N=200_001)
    assert sum(m for _, m in s.batches()) == 200_001


def test_oriented_line_range():
    OrientedLine(0.0, -3.0)
    with pytest.raises(DomainError):
        OrientedLine(2 * math.pi, 0.0)


def test_crofton_unit_square():
    est = crofton_perimeter(SQUARE, SAMPLER)
    assert est.within(4.0) and est.stderr < 0.01


def test_crofton_unit_disk():
    assert crofton_perimeter(DISK, SAMPLER).within(2 * math.pi)


def test_santalo_unit_disk_and_square():
    assert santalo_area(DISK, SAMPLER).within(math.pi)
    assert santalo_area(SQUARE, SAMPLER).within(1.0)


def test_santalo_empty_region():
    est = santalo_area(Disk((0.3, 0.1), 0.0), LineMeasureSampler(1.0, 10_000))
    assert est.value == 0.0 and est.stderr == 0.0


def test_circle_identity():
    rows = circle_identity((0.5, 1.0, 1.5))
    assert [r["rho"] for r in rows] == [0.5, 1.0, 1.5]
    assert all(r["within_3se"] for r in rows)
    assert all(abs(r["ratio"] - 1) < 0.01 for r in rows)


def test_axis_aligned_chords_exact():
    ys = np.array([0.0, 0.25, 0.5, 0.99])
    assert np.all(SQUARE.chords(np.zeros(4), ys) == 1.0)
    assert np.all(SQUARE.chords(np.full(3, math.pi), -ys[1:]) == 1.0)
    # fl(pi/2) is not exactly vertical; cos of it is about 6e-17
    assert np.allclose(SQUARE.chords(np.full(4, 0.5 * math.pi), -ys), 1.0, rtol=0, atol=4e-16)
    assert SQUARE.chords(np.zeros(1), np.array([1.5]))[0] == 0.0


def test_disk_chords_exact():
    c = DISK.chords(np.array([0.3, 1.0, 4.0]), np.array([0.0, 0.6, -0.6]))
    assert np.allclose(c, [2.0, 1.6, 1.6], rtol=0, atol=1e-15)


def test_rotation_invariance():
    s = LineMeasureSampler(R0=2.0, N=200_000, seed=4)
    tri = Polygon(((0.0, 0.0), (1.2, 0.1), (0.3, 0.9)))
    c0, a0 = crofton_perimeter(tri, s), santalo_area(tri, s)
    for ang in (0.4, 1.7, 3.0):
        r = tri.rotated(ang)
        c, a = crofton_perimeter(r, s), santalo_area(r, s)
        assert abs(c.value - c0.value) < 3 * math.hypot(c.stderr, c0.stderr)
        assert abs(a.value - a0.value) < 3 * math.hypot(a.stderr, a0.stderr)


def test_monotone_under_inclusion():
    s = LineMeasureSampler(R0=2.0, N=200_000, seed=5)
    inner = Polygon(((0.2, 0.2), (0.8, 0.3), (0.5, 0.8)))
    small = crofton_perimeter(inner, s)
    big = crofton_perimeter(SQUARE, s)
    assert small.value <= big.value + 3 * big.stderr
    # with common random numbers every line meeting the inner set meets the square
    assert small.value <= big.value


def test_scaling_homogeneity():
    for s in (0.5, 2.0, 3.0):
        a = crofton_perimeter(SQUARE, LineMeasureSampler(2.0, 100_000, 1))
        b = crofton_perimeter(SQUARE.scaled(s), LineMeasureSampler(2.0 * s, 100_000, 1))
        assert b.value == pytest.approx(s * a.value, rel=1e-12)


def test_region_outside_sampler_rejected():
    with pytest.raises(DomainError):
        crofton_perimeter(Disk((1.5, 0.0), 1.0), SAMPLER)
    with pytest.raises(DomainError):
        santalo_area(SQUARE.scaled(2.0), SAMPLER)


@pytest.mark.parametrize("verts", [
    ((0, 0), (0, 1), (1, 1), (1, 0)),              # clockwise
    ((0, 0), (2, 0), (1, 0.2), (1, 1)),            # not convex
    ((0, 0), (1, 0), (2, 0)),                      # zero area
])
def test_bad_polygons_rejected(verts):
    with pytest.raises(DomainError):
        Polygon(tuple((float(x), float(y)) for x, y in verts))


def test_polygon_geometry():
    assert SQUARE.area() == 1.0 and SQUARE.perimeter() == 4.0
    assert SQUARE.radius() == pytest.approx(math.sqrt(2))


def test_worker_count_independent():
    s = LineMeasureSampler(R0=2.0, N=300_000, seed=7)
    assert crofton_perimeter(SQUARE, s, jobs=1) == crofton_perimeter(SQUARE, s, jobs=3)
    assert santalo_area(DISK, s, jobs=1) == santalo_area(DISK, s, jobs=2)


def test_region_specs(tmp_path):
    assert region_from_spec(SQUARE.to_spec()) == SQUARE
    assert region_from_spec({"disk": {"c": [0, 0], "r": 1}}) == DISK
    path = tmp_path / "r.json"
    path.write_text(json.dumps({"polygon": [[0, 0], [1, 0], [0, 1]]}))
    assert read_region(str(path)).area() == 0.5
    with pytest.raises(DomainError):
        region_from_spec({"disk": {"c": [0, 0], "r": 1, "z": 0}})
    with pytest.raises(DomainError):
        region_from_spec({"ellipse": {}})


def test_area_continuity_flat():
    rep = area_continuity(ConformalMetric.flat(), [1, 5, 10])
    assert all(d < 1e-3 * math.pi for d in rep.deviations)


def test_area_continuity_bump_decreasing_and_delegated():
    m = ConformalMetric.bump(0.2, (0.0, 0.0), 1.0)
    rep = area_continuity(m, [5, 10, 20])
    assert rep.decreasing
    direct = area_growth(m, (0.0, 0.0), [5, 10, 20], method="grid")
    assert rep.ratios == list(direct.ratios)
    for mu, q in zip(rep.mu, rep.ratios):
        assert mu == math.pi * q
        assert mu / math.pi == pytest.approx(q, rel=2 ** -52)


def test_area_continuity_rejects_unsorted_radii():
    with pytest.raises(DomainError):
        area_continuity(ConformalMetric.flat(), [5, 1])
