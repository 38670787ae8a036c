"""Restricted minimizing movements for the drop energy.

One step maps the current base ``w_k`` to a minimiser of

    J(w) + pseudo_dist_sq(w_k, w) / h

over bases that stay star-shaped about ``B_r0`` and move by at most ``M h``.
We minimise in the vector of sampled radii: the movement cap becomes a box
(per-angle ``|X - X_k| <= M h``, which bounds the boundary Hausdorff
distance), the star-shapedness constraint is enforced by backtracking toward
the current iterate (which is always admissible), and the objective and its
exact discrete gradient come from :mod:`dropflow.field` and
:mod:`dropflow.metrics`.  A step is only accepted if it does not increase
the objective, so the discrete energy inequality holds by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize

from . import field as fld
from . import metrics
from .radial import VolumePreserving, radial_energy_rate
from .shapes import MIN_RADIUS, RadialShape, check_rho_reflection, star_radius

logger = logging.getLogger(__name__)


class InfeasibleStep(ValueError):
    """The admissible class is empty or excludes the current iterate."""


@dataclass
class OptSettings:
    max_iter: int = 200
    ftol: float = 1e-14
    gtol: float = 1e-9
    n_quad: int = 8
    backtrack: int = 30
    pattern_rounds: int = 3
    pattern_width: int = 8


@dataclass
class SchemeParams:
    h: float
    M: float
    r0: float
    V: float
    m: int = 128
    n_s: int = 32
    rho: Optional[float] = None
    opt: OptSettings = field(default_factory=OptSettings)

    def __post_init__(self):
        if isinstance(self.opt, dict):
            self.opt = OptSettings(**self.opt)
        for name in ("h", "M", "r0", "V"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rho is not None:
            if self.rho <= 0:
                raise ValueError("rho must be positive")
            if self.rho >= fld.rho_bound(self.V):
                raise ValueError(f"rho={self.rho} not below rho_bound(V)={fld.rho_bound(self.V):.6g}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StepRecord:
    k: int
    t: float
    shape: RadialShape
    lam: float
    energy: float
    pseudo_step_sq: float
    hausdorff_step: float
    rho_sup_smin: Optional[float]
    rho_passed: Optional[bool]
    star_radius: float
    volume: float
    grad_min: float
    grad_max: float
    boundary_gradient: np.ndarray
    objective_slack: float

    @property
    def min_radius(self) -> float:
        return float(self.shape.radii.min())

    @property
    def max_radius(self) -> float:
        return float(self.shape.radii.max())

    def to_json(self) -> dict:
        return {
            "k": self.k, "t": self.t, "lambda": self.lam, "energy": self.energy,
            "pseudo_step_sq": self.pseudo_step_sq, "hausdorff_step": self.hausdorff_step,
            "rho_sup_smin": self.rho_sup_smin, "min_radius": self.min_radius,
            "max_radius": self.max_radius, "grad_min": self.grad_min, "grad_max": self.grad_max,
        }


@dataclass
class FlowTrajectory:
    params: SchemeParams
    steps: List[StepRecord] = field(default_factory=list)
    aborted: bool = False
    reason: Optional[str] = None
    initial_reflection_ok: Optional[bool] = None

    @property
    def shapes(self) -> List[RadialShape]:
        return [s.shape for s in self.steps]

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.steps])

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.steps])

    def decay_slacks(self) -> np.ndarray:
        """``J_k - J_{k+1} - pseudo_step_sq/h`` for each step (>= 0 expected)."""
        E = self.energies
        D = np.array([s.pseudo_step_sq for s in self.steps[1:]])
        return E[:-1] - E[1:] - D / self.params.h


# ---------------------------------------------------------------------------
# one step


class _Objective:
    def __init__(self, current: RadialShape, params: SchemeParams):
        self.current = current
        self.p = params
        self.n_evals = 0

    def __call__(self, X):
        self.n_evals += 1
        shape = RadialShape(X)
        E, gE, _ = fld.energy_and_gradient(shape, self.p.V, self.p.n_s)
        D, gD = metrics.pseudo_dist_sq(self.current, shape, n_quad=self.p.opt.n_quad, return_grad=True)
        return E + D / self.p.h, gE + gD / self.p.h

    def value(self, X) -> float:
        return self(X)[0]


def _projected_gradient(g, X, lb, ub) -> float:
    pg = np.where((X <= lb) & (g > 0), 0.0, g)
    pg = np.where((X >= ub) & (pg < 0), 0.0, pg)
    return float(np.max(np.abs(pg)))


def _pattern_search(obj: _Objective, X, f, lb, ub, width: int, rounds: int, r0: float,
                    halvings: int = 6):
    """Per-angle +/- moves on the coordinates with the largest gradient."""
    for _ in range(rounds):
        _, g = obj(X)
        improved = False
        for i in np.argsort(-np.abs(g))[:width]:
            for sign in (-np.sign(g[i]), np.sign(g[i])):
                delta = 0.25 * (ub[i] - lb[i]) * sign
                for _ in range(halvings):
                    cand = X.copy()
                    cand[i] = np.clip(cand[i] + delta, lb[i], ub[i])
                    fc = obj.value(cand)
                    if fc < f and star_radius(RadialShape(cand)) >= r0:
                        X, f, improved = cand, fc, True
                        break
                    delta *= 0.5
        if not improved:
            break
    return X, f


def jko_step(current: RadialShape, params: SchemeParams, return_info: bool = False):
    """One restricted minimizing-movement step from ``current``.

    Ties (no candidate beats the current objective by more than rounding)
    resolve to the current base, the candidate closest to it.
    """
    if star_radius(current) < params.r0:
        raise InfeasibleStep(f"infeasible admissible class: star radius {star_radius(current):.6g} < r0={params.r0}")
    opt = params.opt
    X0 = current.radii.copy()
    cap = params.M * params.h
    lb = np.maximum(X0 - cap, 10 * MIN_RADIUS)
    ub = X0 + cap
    obj = _Objective(current, params)
    f0 = obj.value(X0)
    res = minimize(obj, X0, jac=True, method="L-BFGS-B", bounds=list(zip(lb, ub)),
                   options={"maxiter": opt.max_iter, "ftol": opt.ftol, "gtol": opt.gtol, "maxcor": 20})
    X1 = np.clip(res.x, lb, ub)
    # backtrack toward the (admissible) current iterate
    X, f = X0, f0
    t = 1.0
    for _ in range(opt.backtrack):
        cand = X0 + t * (X1 - X0)
        if star_radius(RadialShape(cand)) >= params.r0:
            fc = obj.value(cand)
            if fc <= f0:
                X, f = cand, fc
                break
        t *= 0.5
    # line search stalled away from a stationary point: polish by pattern search
    if not res.success and _projected_gradient(obj(X)[1], X, lb, ub) > 100 * opt.gtol:
        X, f = _pattern_search(obj, X, f, lb, ub, opt.pattern_width, opt.pattern_rounds, params.r0)
    if f0 - f <= 4 * np.finfo(float).eps * abs(f0):
        X, f = X0, f0
    out = RadialShape(X, current.center_offset)
    if return_info:
        return out, {"objective": f, "objective0": f0, "n_evals": obj.n_evals,
                     "message": str(res.message), "nit": int(res.nit), "backtrack_t": t}
    return out


# ---------------------------------------------------------------------------
# trajectories


def _record(k: int, t: float, shape: RadialShape, prev: Optional[RadialShape], params: SchemeParams,
            monitor_rho: bool, n_dir: int, objective_slack: float) -> StepRecord:
    drop = fld.drop_profile(shape, params.V, params.n_s)
    if prev is None:
        pd = 0.0
        hd = 0.0
    else:
        pd = metrics.pseudo_dist_sq(prev, shape, n_quad=params.opt.n_quad)
        hd = metrics.hausdorff(prev, shape)
    sup_smin = passed = None
    if monitor_rho and params.rho is not None:
        rep = check_rho_reflection(shape, params.rho, n_dir=n_dir)
        sup_smin, passed = rep.rho_reflection_radius, rep.passed
    g = drop.boundary_gradient
    return StepRecord(k=k, t=t, shape=shape, lam=drop.lam, energy=drop.energy, pseudo_step_sq=pd,
                      hausdorff_step=hd, rho_sup_smin=sup_smin, rho_passed=passed,
                      star_radius=star_radius(shape), volume=drop.volume_check(),
                      grad_min=float(g.min()), grad_max=float(g.max()), boundary_gradient=g,
                      objective_slack=objective_slack)


def run_flow(initial: RadialShape, params: SchemeParams, T: float, monitor_rho: bool = True,
             n_dir: int = 256, require_reflection: bool = True, callback=None) -> FlowTrajectory:
    """Iterate :func:`jko_step` ``ceil(T/h)`` times, recording diagnostics per step.

    With monitoring on and ``params.rho`` set, the initial base must have
    rho-reflection unless ``require_reflection=False`` (then the failure is
    only flagged on the trajectory).  The run aborts, flagged, if the ball
    ``B_rho`` leaves the base or star-shapedness about ``B_r0`` is lost.
    """
    shape = initial.resample(params.m)
    traj = FlowTrajectory(params=params)
    rec = _record(0, 0.0, shape, None, params, monitor_rho, n_dir, 0.0)
    if monitor_rho and params.rho is not None:
        traj.initial_reflection_ok = bool(rec.rho_passed)
        if not rec.rho_passed:
            msg = (f"initial base lacks rho-reflection (sup s_min={rec.rho_sup_smin:.4g} > rho={params.rho})")
            if require_reflection:
                raise ValueError(msg)
            logger.warning(msg)
    traj.steps.append(rec)
    n = int(math.ceil(T / params.h - 1e-12))
    for k in range(1, n + 1):
        prev = shape
        shape, info = jko_step(prev, params, return_info=True)
        rec = _record(k, k * params.h, shape, prev, params, monitor_rho, n_dir,
                      info["objective0"] - info["objective"])
        traj.steps.append(rec)
        if callback is not None:
            callback(rec)
        logger.debug("step %d: J=%.10g d2=%.3e evals=%d", k, rec.energy, rec.pseudo_step_sq, info["n_evals"])
        if params.rho is not None and shape.radii.min() < params.rho:
            traj.aborted, traj.reason = True, "reflection ball left the base"
            break
        if rec.star_radius < params.r0 - 1e-12:
            traj.aborted, traj.reason = True, "star-shapedness lost"
            break
    return traj


# ---------------------------------------------------------------------------
# diagnostics


def best_fit_ball(shape: RadialShape, radius: float, rho: float):
    """Centre ``x`` with ``|x| <= rho`` minimising ``d_H(shape, B_radius(x))``.

    Returns ``(distance, centre)``.
    """

    def proj(x):
        n = np.linalg.norm(x)
        return x if n <= rho else x * (rho / n)

    def dist(x):
        x = proj(np.asarray(x, dtype=float))
        try:
            ball = RadialShape.offset_ball(radius, x, m=shape.m)
        except ValueError:
            return np.inf
        return metrics.hausdorff(shape, ball)

    # least-squares circle fit gives a good start
    px, py = shape.points()
    A = np.column_stack([2 * px, 2 * py, np.ones_like(px)])
    sol, *_ = np.linalg.lstsq(A, px * px + py * py, rcond=None)
    starts = [np.zeros(2), proj(sol[:2])]
    best = (np.inf, np.zeros(2))
    for x0 in starts:
        res = minimize(dist, x0, method="Nelder-Mead",
                       options={"xatol": 1e-7, "fatol": 1e-9, "initial_simplex": x0 + 0.02 * np.array([[0, 0], [1, 0], [0, 1.0]])})
        d = dist(res.x)
        if d < best[0]:
            best = (d, proj(res.x))
    return best


def mean_radius(shape: RadialShape) -> float:
    return float(shape.radii.mean())


def chain_estimate(traj: FlowTrajectory, stride: int = 1):
    """Check ``C/((n-k) h) pseudo(w_k, w_n) <= J_k - J_n`` for recorded pairs.

    ``C`` comes from :func:`metrics.metric_bracket` with ``r`` the smallest
    star radius and ``R`` the largest radius along the trajectory.  Returns
    ``(min_slack, C)`` where slack is ``J_k - J_n - lhs``.
    """
    shapes = traj.shapes
    r = min(s.star_radius for s in traj.steps)
    R = max(s.max_radius for s in traj.steps)
    C = metrics.metric_bracket(r, R).ratio
    E = traj.energies
    h = traj.params.h
    idx = list(range(0, len(shapes), stride))
    if idx[-1] != len(shapes) - 1:
        idx.append(len(shapes) - 1)
    worst = np.inf
    for a, k in enumerate(idx):
        for n in idx[a + 1:]:
            lhs = C / ((n - k) * h) * metrics.pseudo_dist_sq(shapes[k], shapes[n], n_quad=traj.params.opt.n_quad)
            worst = min(worst, E[k] - E[n] - lhs)
    return worst, C


def square_triangle_chain(shapes: List[RadialShape], r: float, R: float) -> float:
    """Slack of ``(C/n) pseudo(w_n, w_1) <= sum_j pseudo(w_{j+1}, w_j)``."""
    C = metrics.metric_bracket(r, R).ratio
    n = len(shapes)
    total = sum(metrics.pseudo_dist_sq(shapes[j + 1], shapes[j]) for j in range(n - 1))
    return total - C / n * metrics.pseudo_dist_sq(shapes[-1], shapes[0])


def _dissipation(shape: RadialShape, g: np.ndarray) -> float:
    X = shape.radii
    Xp = shape.derivative()
    return float(np.sum((g * g - 1.0) ** 2 * np.sqrt(X * X + Xp * Xp)) * shape.dtheta)


def dissipation_check(traj: FlowTrajectory, resolve_factor: float = 10.0) -> List[dict]:
    """Compare discrete energy rates with ``-int_Gamma (|Du|^2 - 1)^2 dsigma``.

    ``floor`` is the same quadrature on the equilibrium ball at the run's
    resolution, i.e. the grid error of the contact angle.  Steps whose
    prediction exceeds ``resolve_factor * floor`` are marked ``resolved``;
    below that the comparison measures discretisation, not dynamics.
    """
    if len(traj.steps) < 2:
        raise ValueError("need at least two steps")
    p = traj.params
    eq = RadialShape.ball(fld.equilibrium_radius(p.V), p.m)
    floor = _dissipation(eq, fld.drop_profile(eq, p.V, p.n_s).boundary_gradient)
    out = []
    for a, b in zip(traj.steps[:-1], traj.steps[1:]):
        pred = -_dissipation(a.shape, a.boundary_gradient)
        rate = (b.energy - a.energy) / p.h
        radial = radial_energy_rate(mean_radius(a.shape), p.V)
        rel = abs(rate - pred) / abs(pred) if pred != 0 else (0.0 if rate == 0 else np.inf)
        out.append({"k": a.k, "rate": rate, "predicted": pred, "radial_reference": radial,
                    "rel_discrepancy": rel, "floor": floor, "resolved": abs(pred) > resolve_factor * floor})
    return out


def radial_trajectory_error(traj: FlowTrajectory, law=None) -> np.ndarray:
    """|mean radius - radial ODE radius| at every recorded step (volume-preserving ODE)."""
    from .radial import radial_ode
    from .velocity import VelocityLaw

    law = law or VelocityLaw.power(2)
    r0 = mean_radius(traj.steps[0].shape)
    t = traj.times
    sol = radial_ode(r0, law, VolumePreserving(traj.params.V), float(t[-1]) + 1e-12, min(1e-3, traj.params.h / 10))
    ref = sol.at(t)
    return np.abs(np.array([mean_radius(s) for s in traj.shapes]) - ref)


def convergence_study(initial: RadialShape, params: SchemeParams, T: float, levels: int = 3, **kw):
    """Run at ``h, h/2, h/4, ...`` and report sup-in-time Hausdorff deviations
    between consecutive levels on the coarse time grid."""
    from dataclasses import replace

    trajs = [run_flow(initial, replace(params, h=params.h / 2 ** j), T, **kw) for j in range(levels)]
    devs = []
    for j in range(levels - 1):
        a, b = trajs[j], trajs[j + 1]
        devs.append(max(metrics.hausdorff(sa.shape, b.steps[2 * i].shape)
                        for i, sa in enumerate(a.steps) if 2 * i < len(b.steps)))
    return trajs, devs


def m_sweep(initial: RadialShape, params: SchemeParams, T: float, Ms, **kw):
    """Trajectories for increasing movement caps and sup-in-time gaps between neighbours."""
    from dataclasses import replace

    trajs = [run_flow(initial, replace(params, M=M), T, **kw) for M in Ms]
    gaps = [max(metrics.hausdorff(x.shape, y.shape) for x, y in zip(a.steps, b.steps))
            for a, b in zip(trajs[:-1], trajs[1:])]
    return trajs, gaps
