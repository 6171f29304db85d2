import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from qclab.geometry import (INNER, INTERIOR, OUTER, DomainError, build_disk_domain, build_polygon_domain,
                            build_ring_domain, build_stadium, sample_segment)


def test_stadium_width_at_axis_a1():
    d = build_stadium(1, 1 / 32)
    X, Y = d.grid_coords()
    row = d.interior_mask[:, np.argmin(np.abs(d.ys))]
    xs = d.xs[row]
    # nodes strictly inside |x| < 2; the cut fractions reach the boundary
    j = np.argmin(np.abs(d.ys))
    i_max = np.flatnonzero(row).max()
    width = 2 * (xs.max() + d.arms[0, i_max, j] * d.h)
    assert width == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("a", [1, 2.5, 10])
def test_stadium_symmetric(a):
    d = build_stadium(a, 1 / 32)
    m = d.interior_mask
    assert np.array_equal(m, m[::-1, :]) and np.array_equal(m, m[:, ::-1])
    assert d.is_symmetric()


@pytest.mark.parametrize("shape, builder, area, rel", [
    ("stadium", lambda: build_stadium(2, 1 / 64), 8 + np.pi, 1e-2),
    ("disk", lambda: build_disk_domain((0, 0), 1.0, 1 / 64), np.pi, 5e-3),
    ("annulus", lambda: build_ring_domain(build_disk_domain(R=1, h=1 / 128), (0, 0), 0.3), np.pi * 0.91, 1e-2),
])
def test_discrete_area(shape, builder, area, rel):
    assert builder().area() == pytest.approx(area, rel=rel)


def test_area_converges():
    errs = [abs(build_disk_domain(R=1, h=h).area() - np.pi) for h in (1 / 16, 1 / 32, 1 / 64)]
    assert errs[2] < errs[0] / 2


def test_parabolic_cap_area():
    assert build_stadium(2, 1 / 64, cap="parabola").area() == pytest.approx(8 + 8 / 3, rel=1e-2)


@pytest.mark.parametrize("kwargs", [dict(a=0.5, h=1 / 32), dict(a=4, h=1 / 4)])
def test_stadium_rejected(kwargs):
    with pytest.raises(DomainError):
        build_stadium(**kwargs)


def test_disk_too_coarse():
    with pytest.raises(DomainError):
        build_disk_domain((0, 0), 0.01, 1 / 64)


def test_cut_fractions_in_range():
    for d in (build_stadium(3, 1 / 32), build_disk_domain(R=1, h=1 / 32),
              build_ring_domain(build_disk_domain(R=1, h=1 / 64), (0.6, 0), 0.1)):
        arms = d.interior_arms()
        assert np.all((arms > 0) & (arms <= 1))
        labels = d.interior_arm_labels()
        assert np.all(arms[labels == INTERIOR] == 1.0)


def test_cut_fraction_on_circle():
    d = build_disk_domain(R=1, h=1 / 32)
    X, Y = d.grid_coords()
    I, J = d.interior_ij()
    for k, (di, dj) in enumerate(((1, 0), (-1, 0), (0, 1), (0, -1))):
        lab = d.arm_label[k, I, J]
        cut = lab == OUTER
        th = d.arms[k, I[cut], J[cut]]
        px = X[I[cut], J[cut]] + di * th * d.h
        py = Y[I[cut], J[cut]] + dj * th * d.h
        assert np.allclose(np.hypot(px, py), 1.0, atol=1e-12)


def test_ring_has_two_components():
    outer = build_disk_domain(R=1, h=1 / 128)
    ring = build_ring_domain(outer, (0.6, 0), 0.05)
    comps, kinds = ring.boundary_components()
    assert sorted(kinds.values()) == [OUTER, INNER]
    assert ring.is_connected()
    hole = ring.region == INNER
    cy, cx = ndimage.center_of_mass(hole.T)
    # 0.6 is off the grid, so the hole's nodes are centred only to within h
    assert ring.origin[0] + cx * ring.h == pytest.approx(0.6, abs=ring.h)
    assert ring.origin[1] + cy * ring.h == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("x0, eps", [((0.9, 0), 0.2), ((0.6, 0), 0.39)])
def test_ring_hole_outside(x0, eps):
    with pytest.raises(DomainError, match="outer"):
        build_ring_domain(build_disk_domain(R=1, h=1 / 64), x0, eps)


def test_ring_hole_too_small():
    with pytest.raises(DomainError, match="refine"):
        build_ring_domain(build_disk_domain(R=1, h=1 / 64), (0.2, 0), 0.01)


def test_polygon_ring():
    outer = build_disk_domain(R=1, h=1 / 64)
    tri = [(0, 1), (-0.87, -0.5), (0.87, -0.5)]
    ring = build_ring_domain(outer, (0.1, 0.1), 0.2, hole=tri)
    tri_area = 0.5 * 1.74 * 1.5
    assert ring.area() == pytest.approx(np.pi - 0.2**2 * tri_area, rel=5e-3)


def test_nonconvex_polygon_rejected():
    with pytest.raises(DomainError):
        build_polygon_domain([(0, 0), (2, 0), (1, 0.2), (1, 2)], 1 / 32)


def test_segment_midpoint():
    s = sample_segment((0, 0), (1, 0), 3)
    assert np.array_equal(s.points, [[0, 0], [0.5, 0], [1, 0]])


def test_segment_degenerate():
    s = sample_segment((0.3, -2), (0.3, -2), 2)
    assert np.array_equal(s.points, [[0.3, -2], [0.3, -2]])


def test_segment_step5_alignment():
    a, cy, k = 12.0, 0.6, 5
    s = sample_segment((0, cy), (a / 2, 0), 2 * k + 1)
    assert s.points[k] == pytest.approx((a / 4, cy / 2), abs=1e-15)


def test_segment_too_short():
    with pytest.raises(ValueError):
        sample_segment((0, 0), (1, 1), 1)


coords = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(coords, coords, coords, coords, st.integers(2, 200))
def test_segment_properties(px, py, qx, qy, n):
    s = sample_segment((px, py), (qx, qy), n)
    assert tuple(s.points[0]) == (px, py) and tuple(s.points[-1]) == (qx, qy)
    steps = np.hypot(*np.diff(s.points, axis=0).T)
    assert np.allclose(steps, np.hypot(qx - px, qy - py) / (n - 1), atol=1e-12)
    # collinear
    d = np.array([qx - px, qy - py])
    cross = (s.points[:, 0] - px) * d[1] - (s.points[:, 1] - py) * d[0]
    assert np.allclose(cross, 0, atol=1e-9)
