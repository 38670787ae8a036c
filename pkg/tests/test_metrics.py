import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from dropflow import metrics as Mt
from dropflow import _kernels
from dropflow.shapes import RadialShape, star_radius

from .conftest import random_star_shape


def annulus_oracle(a, b):
    """pseudo_dist_sq between concentric balls: 2 pi int_{a<->b} |rho - a| rho d rho."""
    lo, hi = min(a, b), max(a, b)
    return 2 * math.pi * quad(lambda r: abs(r - a) * r, lo, hi)[0]


def cartesian_oracle(base, other, n=900):
    """Midpoint rule on a Cartesian grid over the symmetric difference."""
    R = max(base.radii.max(), other.radii.max()) * 1.05
    xs = (np.arange(n) + 0.5) / n * 2 * R - R
    X, Y = np.meshgrid(xs, xs)
    X, Y = X.ravel(), Y.ravel()
    ina = base.contains(X, Y)
    inb = other.contains(X, Y)
    sel = ina ^ inb
    vx, vy = base.points()
    d, _, _ = _kernels.nearest_on_polyline(X[sel], Y[sel], vx, vy)
    return float(d.sum() * (2 * R / n) ** 2)


def test_concentric_balls_closed_forms():
    b1, b15 = RadialShape.ball(1.0, 256), RadialShape.ball(1.5, 256)
    assert Mt.pseudo_dist_sq(b1, b15) == pytest.approx(math.pi / 3, abs=1e-6)
    # the boundary of the larger base is an inscribed polygon: distances shrink by its sagitta
    assert Mt.pseudo_dist_sq(b15, b1) == pytest.approx(7 * math.pi / 24, abs=1e-4)
    assert Mt.pseudo_dist_sq(b15, b1) == pytest.approx(annulus_oracle(1.5, 1.0), abs=1e-4)


@given(st.floats(0.5, 2.0), st.floats(0.5, 2.0))
def test_concentric_balls_match_quadrature(a, b):
    m = 64
    val = Mt.pseudo_dist_sq(RadialShape.ball(a, m), RadialShape.ball(b, m))
    sagitta = a * (1 - math.cos(math.pi / m))
    tol = sagitta * math.pi * abs(a * a - b * b) + 1e-12
    assert val == pytest.approx(annulus_oracle(a, b), abs=tol)


def test_nonradial_pair_matches_cartesian_oracle():
    a = RadialShape.perturbed_ball(1.0, 0.1, 3, 512)
    b = RadialShape.offset_ball(1.1, 0.15, 512)
    assert Mt.pseudo_dist_sq(a, b) == pytest.approx(cartesian_oracle(a, b), rel=1e-2)
    assert Mt.pseudo_dist_sq(b, a) == pytest.approx(cartesian_oracle(b, a), rel=1e-2)


def test_pseudo_gradient_matches_finite_differences(rng):
    a = random_star_shape(rng)
    b = RadialShape(a.radii * (1 + 0.05 * np.cos(2 * a.angles + 0.3)))
    val, g = Mt.pseudo_dist_sq(a, b, return_grad=True)
    eps = 1e-6
    for i in rng.choice(a.m, 8, replace=False):
        Xp = b.radii.copy(); Xp[i] += eps
        Xm = b.radii.copy(); Xm[i] -= eps
        fd = (Mt.pseudo_dist_sq(a, RadialShape(Xp)) - Mt.pseudo_dist_sq(a, RadialShape(Xm))) / (2 * eps)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_pseudo_zero_on_identical():
    s = RadialShape.perturbed_ball(1.0, 0.1, 4, 128)
    assert Mt.pseudo_dist_sq(s, s) == 0.0


def test_hausdorff_examples():
    b1 = RadialShape.ball(1.0, 256)
    assert Mt.hausdorff(b1, RadialShape.ball(1.5, 256)) == pytest.approx(0.5)
    assert Mt.hausdorff(b1, RadialShape.offset_ball(1.0, 0.3, 256)) == pytest.approx(0.3, abs=1e-3)
    assert Mt.hausdorff_sets(b1, RadialShape.ball(1.5, 256)) == pytest.approx(0.5)


def test_areas_for_balls():
    b1, b15 = RadialShape.ball(1.0, 256), RadialShape.ball(1.5, 256)
    assert Mt.area(b1) == pytest.approx(math.pi)
    assert Mt.symm_diff_area(b1, b15) == pytest.approx(math.pi * 1.25)
    assert Mt.boundary_length(b1) == pytest.approx(2 * math.pi, rel=1e-4)


@given(st.integers(0, 10_000))
def test_bracket_sandwich_random_pairs(seed):
    rng = np.random.default_rng(seed)
    a, b = random_star_shape(rng), random_star_shape(rng)
    r = min(star_radius(a), star_radius(b))
    R = max(a.radii.max(), b.radii.max())
    br = Mt.metric_bracket(r, R)
    l2 = Mt.dtheta_l2_sq(a, b)
    d = Mt.pseudo_dist_sq(a, b)
    assert br.lower_const * l2 <= d * (1 + 1e-3) and d <= br.upper_const * l2 * (1 + 1e-3)


@given(st.integers(0, 10_000))
def test_hausdorff_sets_dominated_by_boundary_distance(seed):
    rng = np.random.default_rng(seed)
    a, b = random_star_shape(rng), random_star_shape(rng)
    assert Mt.hausdorff_sets(a, b) <= Mt.hausdorff(a, b) + 1e-12


def test_metric_bracket_validation():
    with pytest.raises(ValueError):
        Mt.metric_bracket(2.0, 1.0)
    br = Mt.metric_bracket(0.5, 2.0)
    assert br.ratio == pytest.approx(0.5 * 0.25 * 0.5 / (0.5 * 2.0))


def test_compare_keys():
    out = Mt.compare(RadialShape.ball(1.0, 64), RadialShape.ball(1.5, 64))
    assert set(out) == {"hausdorff", "pseudo_dist_sq_ab", "pseudo_dist_sq_ba", "symm_diff", "dtheta_l2"}
    assert out["dtheta_l2"] == pytest.approx(0.5 * math.sqrt(2 * math.pi))


def test_triangle_violation_is_logged_not_raised(caplog):
    # nested balls: the square root of the pseudo-distance is not additive along radii
    a, b, c = (RadialShape.ball(r, 64) for r in (1.0, 1.5, 2.0))
    with caplog.at_level(logging.INFO, logger="dropflow.metrics"):
        gap = Mt.triangle_violation(a, b, c)
    assert np.isfinite(gap)
    assert (gap > 0) == any("triangle violation" in r.message for r in caplog.records)


def test_symmetric_difference_constant_one_bound_fails_for_balls():
    # |B_{1+d} \ B_1| = pi (2d + d^2) exceeds H1(dB_1) d = 2 pi d
    d = 0.2
    a, b = RadialShape.ball(1.0, 256), RadialShape.ball(1.0 + d, 256)
    assert Mt.symm_diff_area(a, b) > Mt.boundary_length(a) * Mt.hausdorff_sets(a, b)


@given(st.integers(0, 10_000))
def test_symmetric_difference_steiner_bound(seed):
    rng = np.random.default_rng(seed)
    a, b = random_star_shape(rng), random_star_shape(rng)
    d = Mt.hausdorff_sets(a, b)
    L = max(Mt.boundary_length(a), Mt.boundary_length(b))
    assert Mt.symm_diff_area(a, b) <= L * d + math.pi * d * d
