"""Magnitude distance: reports, schedules, gradients, the triangle story."""
import math

import numpy as np
import pytest

from magmetric.core import PointSet, RngState, sample_gaussian, union_sets
from magmetric.distance import (ScaleSchedule, bound_check, check_triangle,
                                cross_polytope_counterexample, limit_probe,
                                mag_distance, mag_distance_gradient,
                                magnitude_equivalent, multiscale_loss,
                                _value_and_gradient)
from magmetric.magnitude import magnitude


def _pair(seed, n=15, dim=3, shift=1.0):
    rng = RngState(seed)
    x = sample_gaussian(rng.derive(0), n, dim)
    y = sample_gaussian(rng.derive(1), n, dim, mean=shift)
    return x, y


def test_report_fields_consistent():
    x, y = _pair(1)
    rep = mag_distance(x, y, 0.7)
    assert rep.t == 0.7
    assert rep.distance == pytest.approx(
        2 * rep.mag_union - rep.mag_x - rep.mag_y, abs=1e-12)
    assert rep.normalized == pytest.approx(rep.distance / rep.mag_union,
                                           abs=1e-12)
    assert rep.bound_2card == 2 * len(union_sets(x, y))
    assert rep.mag_x == pytest.approx(magnitude(x, 0.7).magnitude, abs=1e-12)


def test_symmetry_is_exact():
    for seed in range(10):
        x, y = _pair(seed, n=12, dim=4)
        for t in (0.1, 1.0, 10.0):
            assert mag_distance(x, y, t).distance == mag_distance(y, x, t).distance


def test_nonnegative_in_practice():
    for seed in range(10):
        x, y = _pair(seed, n=10, dim=2)
        assert mag_distance(x, y, 1.0).distance >= -1e-9


def test_identical_sets_zero():
    x, _ = _pair(5)
    rep = mag_distance(x, x, 1.0)
    assert rep.distance == pytest.approx(0.0, abs=1e-10)


def test_small_t_limit_and_large_t_limit():
    x = PointSet([[0.0], [2.0]])
    y = PointSet([[0.0], [3.0]])
    probe = limit_probe(x, y, t_small=1e-4, t_large=40.0)
    assert probe.sym_diff == 2
    assert probe.distance_small < 1e-2
    assert abs(probe.distance_large - probe.sym_diff) < 1e-3


def test_empty_operands():
    x = PointSet([[0.0], [1.0]])
    e = PointSet.empty(1)
    rep = mag_distance(x, e, 1.0)
    assert rep.distance == pytest.approx(magnitude(x, 1.0).magnitude, abs=1e-12)
    both = mag_distance(e, e, 1.0)
    assert both.distance == 0.0 and both.normalized == 0.0


def test_schedule_parse_and_active():
    s = ScaleSchedule.parse("0.5@1,1.5@100,3.0@200")
    assert s.last_epoch == 200
    assert s.scales_nondecreasing
    assert list(s.active(1)) == [0.5]
    assert list(s.active(99)) == [0.5]
    assert list(s.active(100)) == [0.5, 1.5]
    assert list(s.active(300)) == [0.5, 1.5, 3.0]
    assert list(ScaleSchedule.parse("2.0@5").active(4)) == []


def test_schedule_validation():
    with pytest.raises(ValueError):
        ScaleSchedule.parse("0.5@1,1.5@1")  # epochs must strictly increase
    with pytest.raises(ValueError):
        ScaleSchedule.parse("-0.5@1")
    with pytest.raises(ValueError):
        ScaleSchedule.parse("0.5@0")
    with pytest.raises(ValueError):
        ScaleSchedule.parse("junk")
    # decreasing scales are allowed, only flagged
    s = ScaleSchedule.parse("3.0@1,0.5@10")
    assert not s.scales_nondecreasing


def test_multiscale_loss_accumulates():
    x, y = _pair(9, n=10, dim=2)
    s = ScaleSchedule.parse("0.5@1,1.5@3")
    l1 = multiscale_loss(x, y, s, epoch=1)
    l3 = multiscale_loss(x, y, s, epoch=3)
    d05 = mag_distance(x, y, 0.5).normalized
    d15 = mag_distance(x, y, 1.5).normalized
    assert l1 == pytest.approx(d05, abs=1e-12)
    assert l3 == pytest.approx(d05 + d15, abs=1e-12)
    assert multiscale_loss(x, y, s, epoch=3, normalized_loss=True) == \
        pytest.approx((d05 + d15) / 2, abs=1e-12)
    s_later = ScaleSchedule.parse("0.5@5")
    assert multiscale_loss(x, y, s_later, epoch=2) == 0.0


def _fd_grad(x, y, t, normalized, eps=1e-6):
    coords = y.coords.copy()
    g = np.zeros_like(coords)
    for i in range(coords.shape[0]):
        for j in range(coords.shape[1]):
            coords[i, j] += eps
            rep = mag_distance(x, PointSet(coords), t)
            up = rep.normalized if normalized else rep.distance
            coords[i, j] -= 2 * eps
            rep = mag_distance(x, PointSet(coords), t)
            dn = rep.normalized if normalized else rep.distance
            coords[i, j] += eps
            g[i, j] = (up - dn) / (2 * eps)
    return g


@pytest.mark.parametrize("normalized", [False, True])
def test_distance_gradient_matches_fd(normalized):
    for seed in (0, 1, 2):
        rng = RngState(100 + seed)
        x = sample_gaussian(rng.derive(0), 8, 2)
        y = sample_gaussian(rng.derive(1), 6, 2, mean=0.5)
        t = 0.8
        val, grad = _value_and_gradient(x, y, t, normalized, 1e-9)
        rep = mag_distance(x, y, t)
        want = rep.normalized if normalized else rep.distance
        assert val == pytest.approx(want, abs=1e-10)
        fd = _fd_grad(x, y, t, normalized)
        assert np.max(np.abs(grad - fd)) < 1e-5 * max(1.0, np.abs(fd).max())


def test_public_gradient_wrapper():
    x, y = _pair(3, n=6, dim=2)
    grad = mag_distance_gradient(x, y, 0.5)
    assert grad.shape == y.coords.shape
    fd = _fd_grad(x, y, 0.5, normalized=False)
    assert np.max(np.abs(grad - fd)) < 1e-5 * max(1.0, np.abs(fd).max())


def test_gradient_singleton_closed_form():
    # one point each in the line: d = 2*(2/(1+e^{-t g})) - 2 for gap g > 0
    t, g = 1.3, 0.9
    x = PointSet([[0.0]])
    y = PointSet([[g]])
    grad = mag_distance_gradient(x, y, t)
    e = math.exp(-t * g)
    want = 4 * t * e / (1 + e) ** 2
    assert grad[0, 0] == pytest.approx(want, rel=1e-10)


def test_gradient_plateaus_at_large_t():
    x = PointSet([[0.0, 0.0], [1.0, 0.0]])
    y = PointSet([[10.0, 10.0], [12.0, 10.0]])
    grad = mag_distance_gradient(x, y, 50.0)
    assert np.abs(grad).max() < 1e-6


def test_equivalence_relation():
    x = PointSet([[0.0], [5.0]])
    assert magnitude_equivalent(x, x, 1.0)
    y = PointSet([[0.0], [6.0]])
    assert not magnitude_equivalent(x, y, 1.0)
    # duplicated copy has the same support
    xx = PointSet([[0.0], [5.0], [5.0]])
    assert magnitude_equivalent(x, xx, 1.0)


def test_triangle_holds_in_1d():
    rng = RngState(55)
    for k in range(100):
        r = rng.derive(k)
        x = sample_gaussian(r.derive(0), 6, 1)
        y = sample_gaussian(r.derive(1), 6, 1)
        z = sample_gaussian(r.derive(2), 6, 1)
        for t in (0.2, 1.0, 5.0):
            assert check_triangle(x, y, z, t) >= -1e-9


def test_cross_polytope_reduced_matches_dense():
    for dim in (2, 10, 20, 50):
        res = cross_polytope_counterexample(dim, 5.0, full_verify=True)
        assert res.dense_gap == pytest.approx(res.gap, abs=1e-9)
    tiny = cross_polytope_counterexample(1, 5.0)
    assert tiny.slack >= 0  # no violation in one dimension


def test_cross_polytope_high_dim_violation():
    res = cross_polytope_counterexample(500, 5.0)
    assert res.gap == pytest.approx(7.18, abs=0.05)
    assert res.slack < 0
    assert res.x.dim == 500 and len(res.x) == 1000
    assert len(res.z) == 1 and np.all(res.z.coords == 0.0)


def test_bound_check_1d_and_separated():
    x = PointSet([[0.0], [1.0], [2.0]])
    y = PointSet([[0.5], [3.0]])
    for t in (0.1, 1.0, 10.0):
        chk = bound_check(x, y, t)
        assert chk.holds
    # far separated points in the plane: all weightings nonnegative at t=5
    x2 = PointSet([[0.0, 0.0], [10.0, 0.0]])
    y2 = PointSet([[0.0, 10.0], [10.0, 10.0]])
    chk = bound_check(x2, y2, 5.0)
    assert chk.applicable and chk.holds
    # tiny t in higher dim usually has negative weights -> not applicable
    x3, y3 = _pair(2, n=20, dim=5)
    chk3 = bound_check(x3, y3, 0.01)
    assert not chk3.applicable
