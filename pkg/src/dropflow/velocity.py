"""Contact-line velocity laws ``V = F(|Du|)`` and checks of their structural hypotheses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

KINDS = ("power", "capped_power", "table")


@dataclass(frozen=True)
class VelocityLaw:
    """A speed law.

    ``power``: ``s**p - 1``.  ``capped_power``: ``min(s**p - 1, M)`` (the
    speed ceiling used by the scheme); ``cap_mode="max"`` gives the literal
    ``max(s**p - 1, M)`` variant, kept only so both readings can be checked.
    ``table``: piecewise-linear through ``breakpoints`` (pairs ``(s, F)``),
    extended linearly past the last two points.
    """

    kind: str
    p: float = 1.0
    M: Optional[float] = None
    breakpoints: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)
    c: Optional[float] = None
    cap_mode: str = "min"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown law kind {self.kind!r}")
        if self.kind == "capped_power" and (self.M is None or self.M <= 0):
            raise ValueError("capped_power needs M > 0")
        if self.cap_mode not in ("min", "max"):
            raise ValueError("cap_mode must be 'min' or 'max'")
        if self.kind == "table":
            bp = np.asarray(self.breakpoints, dtype=float)
            if bp.ndim != 2 or bp.shape[1] != 2 or bp.shape[0] < 2 or np.any(np.diff(bp[:, 0]) <= 0):
                raise ValueError("table needs >= 2 breakpoints with increasing s")

    @classmethod
    def power(cls, p: float) -> "VelocityLaw":
        return cls("power", p=p, c=1.0 if p <= 1 else None)

    @classmethod
    def capped_power(cls, p: float, M: float, cap_mode: str = "min") -> "VelocityLaw":
        return cls("capped_power", p=p, M=M, c=2.0 * (M + 2.0), cap_mode=cap_mode)

    @classmethod
    def table(cls, breakpoints) -> "VelocityLaw":
        return cls("table", breakpoints=tuple(tuple(map(float, b)) for b in breakpoints))

    @classmethod
    def from_config(cls, cfg: dict) -> "VelocityLaw":
        kind = cfg.get("kind")
        if kind == "power":
            return cls.power(float(cfg["p"]))
        if kind == "capped_power":
            return cls.capped_power(float(cfg["p"]), float(cfg["M"]), cfg.get("cap_mode", "min"))
        if kind == "table":
            return cls.table(cfg["breakpoints"])
        raise ValueError(f"unknown law kind {kind!r}")

    def to_config(self) -> dict:
        if self.kind == "power":
            return {"kind": "power", "p": self.p}
        if self.kind == "capped_power":
            return {"kind": "capped_power", "p": self.p, "M": self.M, "cap_mode": self.cap_mode}
        return {"kind": "table", "breakpoints": [list(b) for b in self.breakpoints]}

    def __call__(self, s):
        return eval_law(self, s)

    @property
    def cap_threshold(self) -> float:
        """Slope above which a capped law is constant (inf otherwise)."""
        if self.kind == "capped_power":
            return (self.M + 1.0) ** (1.0 / self.p)
        return np.inf


def eval_law(law: VelocityLaw, s):
    s = np.asarray(s, dtype=float)
    if law.kind == "power":
        out = np.power(np.maximum(s, 0.0), law.p) - 1.0
    elif law.kind == "capped_power":
        base = np.power(np.maximum(s, 0.0), law.p) - 1.0
        out = np.minimum(base, law.M) if law.cap_mode == "min" else np.maximum(base, law.M)
    else:
        bp = np.asarray(law.breakpoints)
        xs, ys = bp[:, 0], bp[:, 1]
        out = np.interp(s, xs, ys)
        lo_slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        hi_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        out = np.where(s < xs[0], ys[0] + lo_slope * (s - xs[0]), out)
        out = np.where(s > xs[-1], ys[-1] + hi_slope * (s - xs[-1]), out)
    return float(out) if out.ndim == 0 else out


def check_monotone(law: VelocityLaw, s_max: float = 10.0, n: int = 10001) -> bool:
    """Strictly increasing below any cap, non-decreasing overall, and ``F(1) = 0``."""
    s = np.linspace(0.0, s_max, n)
    F = eval_law(law, s)
    dF = np.diff(F)
    below = s[1:] <= law.cap_threshold
    ok = np.all(dF[below] > 0.0) and np.all(dF >= 0.0)
    return bool(ok and abs(eval_law(law, 1.0)) <= 1e-12)


def check_assumption2(law: VelocityLaw, c: float, eps_max: float, grid: int = 200,
                      s_max: float = 100.0, tol: float = 1e-12):
    """Evaluate ``(1+e) F(s/(1+e)) + c e - F(s) >= 0`` on an ``(s, e)`` grid.

    Returns ``(passed, worst_margin)``; the margin is the minimum slack found.
    """
    if c <= 0 or eps_max <= 0:
        raise ValueError("c and eps_max must be positive")
    s = np.concatenate([np.linspace(0.0, min(s_max, 10.0), 4 * grid), np.geomspace(10.0, s_max, grid)]) \
        if s_max > 10.0 else np.linspace(0.0, s_max, 4 * grid)
    eps = np.linspace(eps_max / grid, eps_max, grid)
    S, E = np.meshgrid(s, eps, indexing="ij")
    slack = (1.0 + E) * eval_law(law, S / (1.0 + E)) + c * E - eval_law(law, S)
    worst = float(slack.min())
    scale = max(1.0, float(np.abs(eval_law(law, s)).max()))
    return worst >= -tol * scale, worst


def sublinear_bound_check(law: VelocityLaw, c: float, s_max: float = 100.0, n: int = 20001) -> bool:
    """``F(s) <= c s + max((1+s) F(0), 0)`` on a grid of ``[0, s_max]``."""
    if c <= 0:
        raise ValueError("c must be positive")
    s = np.linspace(0.0, s_max, n)
    F0 = eval_law(law, 0.0)
    bound = c * s + np.maximum((1.0 + s) * F0, 0.0)
    return bool(np.all(eval_law(law, s) <= bound + 1e-12))
