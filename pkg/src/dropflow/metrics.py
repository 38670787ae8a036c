"""Distances between star-shaped sets.

The pseudo-distance here is the one that drives the minimizing-movement
step: ``pseudo_dist_sq(A, B)`` integrates the Euclidean distance to the
boundary of ``A`` over the symmetric difference ``A \\ B``.  It is not
symmetric and not a metric; :func:`metric_bracket` gives constants that
sandwich it between multiples of the squared L2 distance of radial functions.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .shapes import RadialShape

logger = logging.getLogger(__name__)

N_DIM = 2

_GL_CACHE: dict = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _common(a: RadialShape, b: RadialShape):
    m = max(a.m, b.m)
    return a.resample(m), b.resample(m)


@dataclass(frozen=True)
class MetricBracket:
    lower_const: float
    upper_const: float

    def __post_init__(self):
        if not 0.0 < self.lower_const <= self.upper_const:
            raise ValueError("need 0 < lower_const <= upper_const")

    @property
    def ratio(self) -> float:
        """``C = lower / upper``, the constant of the chain inequality."""
        return self.lower_const / self.upper_const


def area(shape: RadialShape) -> float:
    return float(np.sum(shape.radii ** N_DIM) / N_DIM * shape.dtheta)


def symm_diff_area(a: RadialShape, b: RadialShape) -> float:
    a, b = _common(a, b)
    return float(np.sum(np.abs(a.radii ** N_DIM - b.radii ** N_DIM)) / N_DIM * a.dtheta)


def boundary_length(shape: RadialShape) -> float:
    x, y = shape.points()
    return float(np.sum(np.hypot(np.roll(x, -1) - x, np.roll(y, -1) - y)))


def _one_sided(a: RadialShape, b: RadialShape, outside_only: bool) -> float:
    ax, ay = a.points()
    bx, by = b.points()
    d, _, _ = _kernels.nearest_on_polyline(ax, ay, bx, by)
    if outside_only:
        d = np.where(b.contains(ax, ay), 0.0, d)
    return float(d.max())


def hausdorff(a: RadialShape, b: RadialShape) -> float:
    """Hausdorff distance between the boundary polylines (dominates the set distance)."""
    return max(_one_sided(a, b, False), _one_sided(b, a, False))


def hausdorff_sets(a: RadialShape, b: RadialShape) -> float:
    """Hausdorff distance between the sets themselves.

    ``dist(., B)`` has no local maximum outside ``B``, so the sup over ``A`` is
    attained on its boundary; boundary points inside ``B`` contribute zero.
    """
    return max(_one_sided(a, b, True), _one_sided(b, a, True))


def directional_distance(a: RadialShape, b: RadialShape, theta):
    from .shapes import eval_radius

    return np.abs(np.asarray(eval_radius(a, theta)) - np.asarray(eval_radius(b, theta)))


def dtheta_l2_sq(a: RadialShape, b: RadialShape) -> float:
    """``int |X_a - X_b|^2 dtheta`` on the finer grid."""
    a, b = _common(a, b)
    return float(np.sum((a.radii - b.radii) ** 2) * a.dtheta)


def pseudo_dist_sq(base: RadialShape, other: RadialShape, n_quad: int = 8,
                   return_grad: bool = False):
    """``int_{base ^ other} dist(x, boundary of base) dx`` by polar quadrature.

    For each sample direction the radial segment between the two boundaries
    is integrated with ``n_quad``-point Gauss-Legendre against the Jacobian
    ``rho``.  With ``return_grad`` the exact derivative of this quadrature with
    respect to ``other.radii`` is returned as well (``other`` must then share
    the sample count of ``base``).
    """
    if return_grad and other.m != base.m:
        raise ValueError("gradient requires equal sample counts")
    base, other = _common(base, other)
    xa = base.radii
    xb = other.radii
    th = base.angles
    c, s = np.cos(th), np.sin(th)
    t, w = _gauss_legendre(n_quad)
    mid = 0.5 * (xa + xb)
    half = 0.5 * (xb - xa)
    rho = mid[:, None] + half[:, None] * t[None, :]
    vx, vy = base.points()
    px = (rho * c[:, None]).ravel()
    py = (rho * s[:, None]).ravel()
    d, qx, qy = _kernels.nearest_on_polyline(px, py, vx, vy)
    d = d.reshape(rho.shape)
    f = d * rho
    S = f @ w
    total = float(np.sum(np.abs(half) * S) * base.dtheta)
    if not return_grad:
        return total
    # d/drho of dist along the ray: unit vector from nearest point, dotted with the ray
    dx = px - qx
    dy = py - qy
    dn = np.where(d.ravel() > 0.0, d.ravel(), 1.0)
    ddist = ((dx * np.repeat(c, n_quad) + dy * np.repeat(s, n_quad)) / dn).reshape(rho.shape)
    ddist = np.where(d > 0.0, ddist, 0.0)
    fprime = ddist * rho + d
    grad = 0.5 * np.sign(xb - xa) * S + np.abs(half) * (fprime @ (w * 0.5 * (1.0 + t)))
    return total, grad * base.dtheta


def metric_bracket(r: float, R: float, N: int = N_DIM) -> MetricBracket:
    """Constants with ``lower * int d_theta^2 <= pseudo_dist_sq <= upper * int d_theta^2``
    for sets star-shaped about ``B_r`` and contained in ``B_R``.

    The Jacobian ``rho^(N-1)`` lies in ``[r^(N-1), R^(N-1)]`` and the distance
    to the boundary lies between ``r/R`` times and once the radial distance;
    the radial integral contributes the factor 1/2.
    """
    if not 0 < r <= R:
        raise ValueError("need 0 < r <= R")
    lower = 0.5 * (r / R) * r ** (N - 1)
    upper = 0.5 * R ** (N - 1)
    return MetricBracket(lower, upper)


def compare(a: RadialShape, b: RadialShape) -> dict:
    """Everything the ``metrics`` CLI prints."""
    return {
        "hausdorff": hausdorff(a, b),
        "pseudo_dist_sq_ab": pseudo_dist_sq(a, b),
        "pseudo_dist_sq_ba": pseudo_dist_sq(b, a),
        "symm_diff": symm_diff_area(a, b),
        "dtheta_l2": math.sqrt(dtheta_l2_sq(a, b)),
    }


def triangle_violation(a: RadialShape, b: RadialShape, c: RadialShape) -> float:
    """``pseudo(a,c) - pseudo(a,b) - pseudo(b,c)`` for the square-root pseudo-distance.

    Positive values witness the missing triangle inequality; they are logged
    at INFO level and never treated as errors.
    """
    dac = math.sqrt(pseudo_dist_sq(a, c))
    dab = math.sqrt(pseudo_dist_sq(a, b))
    dbc = math.sqrt(pseudo_dist_sq(b, c))
    gap = dac - dab - dbc
    if gap > 0:
        logger.info("pseudo-distance triangle violation: %s", json.dumps({"gap": gap}))
    return gap
