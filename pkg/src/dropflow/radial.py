"""Radial reference dynamics.

For a ball of radius ``r`` the contact angle is explicit, so the free
boundary problem collapses to a scalar ODE ``r' = F(slope(r))``:

* fixed multiplier ``lam``:   ``slope = lam r / N``
* volume preserving ``V``:    ``slope = N (N+2) V / (|S^{N-1}| r^{N+1})``

Integration is classical RK4 with a step shrunk near fast growth, and three
events: blow-up (``r > r_max``), extinction (``r`` crosses 0) and equilibrium
(``|r'| < eq_tol``, recorded but not terminal).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .field import N_DIM, sphere_area
from .velocity import VelocityLaw, eval_law


@dataclass(frozen=True)
class VolumePreserving:
    V: float
    N: int = N_DIM

    def slope(self, r: float) -> float:
        return self.N * (self.N + 2) * self.V / (sphere_area(self.N) * r ** (self.N + 1))


@dataclass(frozen=True)
class FixedMultiplier:
    lam: float
    N: int = N_DIM

    def slope(self, r: float) -> float:
        return self.lam * r / self.N


@dataclass
class RadialEvent:
    kind: str                      # none | blowup | extinction | equilibrium
    bracket: Optional[Tuple[float, float]] = None


@dataclass
class RadialSolution:
    t: np.ndarray
    r: np.ndarray
    event: RadialEvent
    equilibrium_time: Optional[float] = None
    notes: list = field(default_factory=list)

    def at(self, t):
        return np.interp(t, self.t, self.r)


def _rhs(law: VelocityLaw, mode, r: float) -> float:
    return float(eval_law(law, mode.slope(max(r, 1e-300))))


def _rk4(law, mode, r, dt):
    k1 = _rhs(law, mode, r)
    k2 = _rhs(law, mode, r + 0.5 * dt * k1)
    k3 = _rhs(law, mode, r + 0.5 * dt * k2)
    k4 = _rhs(law, mode, r + dt * k3)
    return r + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def radial_ode(initial_r: float, law: VelocityLaw, mode, t_end: float, dt: float,
               r_max: float = 1e6, eq_tol: float = 1e-10, growth: float = 0.05,
               dt_min: float = 1e-14) -> RadialSolution:
    """Integrate the radial ODE up to ``t_end`` or a terminal event."""
    if initial_r <= 0 or dt <= 0:
        raise ValueError("need initial_r > 0 and dt > 0")
    ts = [0.0]
    rs = [float(initial_r)]
    t, r = 0.0, float(initial_r)
    t_eq = None
    notes = []
    while t < t_end:
        v = _rhs(law, mode, r)
        if t_eq is None and abs(v) < eq_tol:
            t_eq = t
        # limit relative change per step so blow-up is resolved
        h = min(dt, t_end - t)
        if v != 0.0:
            h = min(h, growth * r / abs(v)) if v > 0 else h
        if h < dt_min:
            notes.append("step size underflow")
            return RadialSolution(np.array(ts), np.array(rs), RadialEvent("blowup", (t, np.inf)), t_eq, notes)
        r_new = _rk4(law, mode, r, h)
        if not np.isfinite(r_new) or r_new > r_max:
            return RadialSolution(np.array(ts), np.array(rs), RadialEvent("blowup", (t, t + h)), t_eq, notes)
        if r_new <= 0.0:
            lo, hi = 0.0, h
            for _ in range(200):
                if hi - lo <= dt_min * max(1.0, t):
                    break
                mid = 0.5 * (lo + hi)
                if _rk4(law, mode, r, mid) > 0.0:
                    lo = mid
                else:
                    hi = mid
            ts.append(t + lo)
            rs.append(_rk4(law, mode, r, lo))
            return RadialSolution(np.array(ts), np.array(rs), RadialEvent("extinction", (t + lo, t + hi)), t_eq, notes)
        t += h
        r = r_new
        ts.append(t)
        rs.append(r)
    kind = "equilibrium" if t_eq is not None else "none"
    bracket = (t_eq, t_eq) if t_eq is not None else None
    return RadialSolution(np.array(ts), np.array(rs), RadialEvent(kind, bracket), t_eq, notes)


def radial_energy_rate(r: float, V: float, N: int = N_DIM) -> float:
    """``dJ/dt`` along the volume-preserving ball flow with ``F(s) = s^2 - 1``.

    ``dJ/dr = |S^{N-1}| r^{N-1} (1 - s^2)`` and ``dr/dt = s^2 - 1``.
    """
    s = VolumePreserving(V, N).slope(r)
    return sphere_area(N) * r ** (N - 1) * (1.0 - s * s) * (s * s - 1.0)
