"""Star-shaped planar domains stored as sampled radial functions.

A :class:`RadialShape` is the set ``{rho * (cos t, sin t) : rho <= X(t)}``
where ``X`` is the piecewise-linear (in angle) interpolant of ``m`` samples
taken at ``t_i = 2 pi i / m``.  Besides plumbing (evaluation, scaling,
translation, morphology) this module carries the geometric predicates used to
monitor the flow: strong star-shapedness, the dilation characterisation of
it, plane-reflection offsets ``s_min`` and the rho-reflection report.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from . import _kernels
from ._kernels import TWO_PI, radial_interp_np

logger = logging.getLogger(__name__)

MIN_RADIUS = 1e-9


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class RadialShape:
    radii: np.ndarray
    center_offset: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        radii = np.array(self.radii, dtype=float).ravel()
        if not _is_power_of_two(radii.size) or radii.size < 64:
            raise ValueError(f"sample count must be a power of two >= 64, got {radii.size}")
        if not np.all(np.isfinite(radii)):
            raise ValueError("radii must be finite")
        if radii.min() < MIN_RADIUS:
            raise ValueError(f"radii must exceed {MIN_RADIUS:g}, got min {radii.min():g}")
        radii.setflags(write=False)
        off = np.array(self.center_offset, dtype=float).reshape(2)
        off.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "center_offset", off)

    # -- constructors ------------------------------------------------------
    @classmethod
    def ball(cls, R: float, m: int = 256) -> "RadialShape":
        return cls(np.full(m, float(R)))

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], m: int = 256) -> "RadialShape":
        th = TWO_PI * np.arange(m) / m
        return cls(np.asarray(func(th), dtype=float) * np.ones(m))

    @classmethod
    def perturbed_ball(cls, R: float, amp: float, mode: int, m: int = 256) -> "RadialShape":
        """``X(t) = R (1 + amp cos(mode t))``."""
        return cls.from_function(lambda t: R * (1.0 + amp * np.cos(mode * t)), m)

    @classmethod
    def offset_ball(cls, R: float, d, m: int = 256) -> "RadialShape":
        """Disk of radius ``R`` centred at ``d`` (scalar means ``(d, 0)``)."""
        c = np.array([d, 0.0]) if np.isscalar(d) else np.asarray(d, dtype=float)
        th = TWO_PI * np.arange(m) / m
        e = np.stack([np.cos(th), np.sin(th)], axis=1)
        cd = e @ c
        disc = cd * cd - (c @ c - R * R)
        if np.any(disc <= 0.0) or c @ c >= R * R:
            raise ValueError("origin must lie inside the offset disk")
        return cls(cd + np.sqrt(disc))

    # -- basic geometry ----------------------------------------------------
    @property
    def m(self) -> int:
        return self.radii.size

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.m

    @property
    def angles(self) -> np.ndarray:
        return TWO_PI * np.arange(self.m) / self.m

    def points(self) -> Tuple[np.ndarray, np.ndarray]:
        th = self.angles
        return self.radii * np.cos(th), self.radii * np.sin(th)

    def dense_points(self, refine: int = 2) -> Tuple[np.ndarray, np.ndarray]:
        """Boundary samples of the piecewise-linear-in-angle curve, ``refine`` per cell."""
        th = TWO_PI * np.arange(self.m * refine) / (self.m * refine)
        r = radial_interp_np(th, self.radii)
        return r * np.cos(th), r * np.sin(th)

    def derivative(self) -> np.ndarray:
        """Centred finite difference ``dX/dtheta`` at the samples."""
        return (np.roll(self.radii, -1) - np.roll(self.radii, 1)) / (2.0 * self.dtheta)

    def resample(self, m: int) -> "RadialShape":
        if m == self.m:
            return self
        th = TWO_PI * np.arange(m) / m
        return RadialShape(radial_interp_np(th, self.radii), self.center_offset)

    def contains(self, x, y, slack: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.hypot(x, y) <= radial_interp_np(np.arctan2(y, x), self.radii) + slack

    def __repr__(self) -> str:
        return f"RadialShape(m={self.m}, min={self.radii.min():.6g}, max={self.radii.max():.6g})"


@dataclass(frozen=True)
class Cone:
    """``apex + {y : <axis, y> >= cos(half_angle) |y|}``."""

    apex: np.ndarray
    axis: np.ndarray
    half_angle: float

    def __post_init__(self):
        if not 0.0 < self.half_angle < math.pi:
            raise ValueError("half_angle must lie strictly inside (0, pi)")
        axis = np.asarray(self.axis, dtype=float).reshape(2)
        norm = np.linalg.norm(axis)
        if norm == 0.0:
            raise ValueError("axis must be non-zero")
        object.__setattr__(self, "axis", axis / norm)
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=float).reshape(2))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(pts) - self.apex
        return d @ self.axis >= math.cos(self.half_angle) * np.linalg.norm(d, axis=1) - 1e-14

    def sample(self, length: float, n_r: int = 16, n_a: int = 16) -> np.ndarray:
        """Points of the cone truncated at distance ``length`` from the apex (apex excluded)."""
        base = math.atan2(self.axis[1], self.axis[0])
        rr = length * np.arange(1, n_r + 1) / n_r
        aa = base + self.half_angle * np.linspace(-1.0, 1.0, n_a)
        R, A = np.meshgrid(rr, aa, indexing="ij")
        return self.apex + np.stack([(R * np.cos(A)).ravel(), (R * np.sin(A)).ravel()], axis=1)


@dataclass
class ReflectionReport:
    directions: np.ndarray
    s_min: np.ndarray
    rho: float
    ball_radius_check: bool

    @property
    def rho_reflection_radius(self) -> float:
        return float(self.s_min.max())

    @property
    def passed(self) -> bool:
        return self.ball_radius_check and self.rho_reflection_radius <= self.rho


# ---------------------------------------------------------------------------
# evaluation and star-shapedness


def eval_radius(shape: RadialShape, angle):
    """Piecewise-linear interpolation of the radial function (2pi periodic)."""
    out = radial_interp_np(np.asarray(angle, dtype=float), shape.radii)
    return float(out) if np.ndim(out) == 0 else out


def tangent_distance(shape: RadialShape) -> np.ndarray:
    """Distance from the origin to the boundary tangent line at each sample."""
    X = shape.radii
    return X * X / np.sqrt(X * X + shape.derivative() ** 2)


def star_radius(shape: RadialShape) -> float:
    """Largest r with every tangent line at distance >= r from the origin."""
    return max(float(tangent_distance(shape).min()), 0.0)


def check_star_shaped(shape: RadialShape, r: float, n_ball: int = 64, n_seg: int = 48,
                      slack: float = 1e-9):
    """Brute force: every segment boundary point -> point of B_r stays in the closed set.

    Returns ``(ok, witness)`` where ``witness`` is ``None`` or the first
    offending ``(boundary_point, ball_point)`` pair.  Segments towards the
    circle ``|z| = r`` are enough because they sweep the convex hull of the
    boundary point and the ball.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    bx, by = shape.points()
    if r == 0.0:
        # segments to the origin: radial graphs are star-shaped about 0
        return True, None
    phi = TWO_PI * np.arange(n_ball) / n_ball
    zx = r * np.cos(phi)
    zy = r * np.sin(phi)
    # cluster samples near the boundary end, where violations first appear
    tau = (np.arange(1, n_seg + 1) / n_seg) ** 2
    for i in range(shape.m):
        px = bx[i] + tau[None, :] * (zx[:, None] - bx[i])
        py = by[i] + tau[None, :] * (zy[:, None] - by[i])
        inside = shape.contains(px, py, slack=slack * shape.radii.max())
        if not inside.all():
            k = int(np.argwhere(~inside.all(axis=1))[0, 0])
            return False, (np.array([bx[i], by[i]]), np.array([zx[k], zy[k]]))
    return True, None


def dilation_condition(shape: RadialShape, eps: float, a: float, n_z: int = 32,
                       refine: int = 2, margin: float = 1e-9) -> bool:
    """``shape`` compactly inside ``(1 + eps) shape + z`` for every ``|z| <= a eps``."""
    if eps <= 0 or a <= 0:
        raise ValueError("eps and a must be positive")
    bx, by = shape.dense_points(refine)
    phi = TWO_PI * np.arange(n_z) / n_z
    rad = a * eps * np.array([1.0, 0.75, 0.5, 0.25])
    zx = np.concatenate([[0.0], (rad[:, None] * np.cos(phi)).ravel()])
    zy = np.concatenate([[0.0], (rad[:, None] * np.sin(phi)).ravel()])
    yx = (bx[:, None] - zx[None, :]) / (1.0 + eps)
    yy = (by[:, None] - zy[None, :]) / (1.0 + eps)
    lim = radial_interp_np(np.arctan2(yy, yx), shape.radii)
    return bool(np.all(np.hypot(yx, yy) < lim - margin * shape.radii.max()))


# ---------------------------------------------------------------------------
# reflections


def _reflection_offset(shape: RadialShape, nu: np.ndarray, tol: float, n_scan: int,
                       depth: int, refine: int) -> float:
    bx, by = shape.dense_points(refine)
    nux, nuy = float(nu[0]), float(nu[1])
    top = float(np.max(bx * nux + by * nuy))
    if top <= 0.0:
        return 0.0
    ts = top * np.arange(n_scan, -1, -1) / n_scan  # descending, ends at 0
    radii = shape.radii
    fail = _kernels.reflection_excess(bx, by, nux, nuy, ts, radii) > tol
    if not fail.any():
        return 0.0
    k = int(np.argmax(fail))
    if k == 0:
        return top
    lo, hi = ts[k], ts[k - 1]  # lo fails, hi passes
    for _ in range(depth):
        if hi - lo <= 0.25 * tol:
            break
        mid = 0.5 * (lo + hi)
        if _kernels.reflection_excess(bx, by, nux, nuy, np.array([mid]), radii)[0] > tol:
            lo = mid
        else:
            hi = mid
    return float(hi)


def s_min(shape: RadialShape, nu, rho: float, tol: Optional[float] = None,
          n_scan: int = 64, depth: int = 40, refine: int = 2) -> float:
    """Smallest plane offset ``s`` along ``nu`` such that for all ``t >= s`` the
    reflection of the cap ``{x.nu > t}`` across the plane lands inside the shape.

    A downward scan locates the highest failing offset and bisection refines it;
    containment is tested on reflected boundary samples with tolerance ``tol``
    (default ``1e-3 * min X``).
    """
    if shape.radii.min() < rho:
        raise ValueError("rho ball not inside shape")
    nu = np.asarray(nu, dtype=float)
    nu = nu / np.linalg.norm(nu)
    if tol is None:
        tol = 1e-3 * shape.radii.min()
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _reflection_offset(shape, nu, tol, n_scan, depth, refine)


def check_rho_reflection(shape: RadialShape, rho: float, n_dir: int = 256,
                         tol: Optional[float] = None, **kw) -> ReflectionReport:
    if rho <= 0:
        raise ValueError("rho must be positive")
    if tol is None:
        tol = 1e-3 * shape.radii.min()
    phi = TWO_PI * np.arange(n_dir) / n_dir
    dirs = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    ball_ok = bool(shape.radii.min() >= rho)
    vals = np.array([_reflection_offset(shape, d, tol, kw.get("n_scan", 64), kw.get("depth", 40),
                                        kw.get("refine", 2)) for d in dirs])
    return ReflectionReport(directions=dirs, s_min=vals, rho=float(rho), ball_radius_check=ball_ok)


def reflection_center(shape: RadialShape, n_dir: int = 64) -> np.ndarray:
    """Translation ``z`` approximately minimising ``sup_nu s_min(nu, shape - z)``.

    Diagnostic only; flows keep the reflection ball at the origin.
    """
    from scipy.optimize import minimize

    def sup_smin(z):
        try:
            moved = translate(shape, -np.asarray(z))
        except ValueError:
            return np.inf
        return check_rho_reflection(moved, 1.0, n_dir=n_dir).rho_reflection_radius

    res = minimize(sup_smin, np.zeros(2), method="Nelder-Mead",
                   options={"xatol": 1e-4, "fatol": 1e-5, "initial_simplex": 0.05 * np.array([[0, 0], [1, 0], [0, 1.0]])})
    return np.asarray(res.x)


def annulus_width(shape: RadialShape) -> float:
    return float(shape.radii.max() - shape.radii.min())


def implied_star_radius_from_reflection(shape: RadialShape, rho: float) -> float:
    """``sqrt(min |x|^2 - rho^2)``: star radius guaranteed by rho-reflection."""
    rmin = float(shape.radii.min())
    if rho >= rmin:
        raise ValueError("rho must be smaller than the minimal radius")
    return math.sqrt(rmin * rmin - rho * rho)


def exterior_cone(shape: RadialShape, i: int, rho: float) -> Cone:
    """Exterior cone at boundary sample ``i`` implied by rho-reflection (cos phi = rho/|x|)."""
    bx, by = shape.points()
    x = np.array([bx[i], by[i]])
    return Cone(apex=x, axis=x, half_angle=math.acos(rho / np.linalg.norm(x)))


def sufficient_reflection_condition(shape: RadialShape, rho: float) -> bool:
    """Normal-alignment and oscillation test that implies rho-reflection."""
    X = shape.radii
    if X.min() < rho:
        return False
    normal_ok = np.all(tangent_distance(shape) ** 2 >= X * X - rho * rho / 5.0)
    osc_ok = (X.max() ** 2 - X.min() ** 2) <= rho * rho
    return bool(normal_ok and osc_ok)


# ---------------------------------------------------------------------------
# transforms


def scale(shape: RadialShape, factor: float) -> RadialShape:
    if factor <= 0:
        raise ValueError("factor must be positive")
    return RadialShape(shape.radii * factor, shape.center_offset * factor)


def translate(shape: RadialShape, z, refine: int = 8) -> RadialShape:
    """Shift the set by ``z`` and re-sample its radial function about the origin."""
    z = np.asarray(z, dtype=float).reshape(2)
    px, py = shape.dense_points(refine)
    px = px + z[0]
    py = py + z[1]
    phi = np.unwrap(np.arctan2(py, px))
    steps = np.diff(np.append(phi, phi[0] + TWO_PI))
    if not np.all(steps > 0.0) or not np.isclose(phi[-1] + steps[-1] - phi[0], TWO_PI):
        raise ValueError("origin exits the domain (or is no longer a star centre)")
    m = shape.m
    th = TWO_PI * np.arange(m) / m
    # rotate the parametrisation so that phi starts in [0, 2pi)
    shift = math.floor(phi[0] / TWO_PI) * TWO_PI
    phi = phi - shift
    phi_ext = np.concatenate([phi - TWO_PI, phi, phi + TWO_PI])
    x_ext = np.tile(px, 3)
    y_ext = np.tile(py, 3)
    j = np.searchsorted(phi_ext, th, side="right") - 1
    ax, ay, bx, by = x_ext[j], y_ext[j], x_ext[j + 1], y_ext[j + 1]
    c, s = np.cos(th), np.sin(th)
    # ray (c, s) * R meets a + t (b - a)
    ex, ey = bx - ax, by - ay
    den = c * ey - s * ex
    R = (ax * ey - ay * ex) / den
    return RadialShape(R, shape.center_offset + z)


def dilate(shape: RadialShape, radius: float, refine: int = 8) -> RadialShape:
    """Radial function of the Minkowski sum with a closed disk."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return shape
    bx, by = shape.dense_points(refine)
    th = shape.angles
    c, s = np.cos(th)[:, None], np.sin(th)[:, None]
    along = bx[None, :] * c + by[None, :] * s
    perp = np.abs(by[None, :] * c - bx[None, :] * s)
    reach = np.where(perp <= radius, along + np.sqrt(np.clip(radius * radius - perp * perp, 0.0, None)), -np.inf)
    return RadialShape(reach.max(axis=1), shape.center_offset)


def erode(shape: RadialShape, radius: float, refine: int = 8, iters: int = 60) -> RadialShape:
    """Radial function of ``{x : dist(x, complement) >= radius}``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if radius == 0:
        return shape
    vx, vy = shape.dense_points(refine)
    th = shape.angles
    c, s = np.cos(th), np.sin(th)
    d0, _, _ = _kernels.nearest_on_polyline(np.zeros(1), np.zeros(1), vx, vy)
    if d0[0] <= radius:
        raise ValueError("erosion leaves no neighbourhood of the origin (empty or not star-shaped)")
    lo = np.zeros(shape.m)
    hi = shape.radii.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        d, _, _ = _kernels.nearest_on_polyline(mid * c, mid * s, vx, vy)
        ok = d >= radius
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return RadialShape(lo, shape.center_offset)
