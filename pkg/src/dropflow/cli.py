"""Command-line entry point: ``dropflow <subcommand>``.

Exit codes: 0 success, 2 validation error, 3 numerical failure.  Errors are
reported as a single JSON object on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import field as fld
from . import flow, io, metrics
from .radial import FixedMultiplier, VolumePreserving, radial_ode
from .shapes import (RadialShape, annulus_width, check_rho_reflection,
                     implied_star_radius_from_reflection, star_radius)
from .velocity import VelocityLaw

logger = logging.getLogger("dropflow")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    initial: dict
    h: float
    M: float
    r0: float
    T: float
    V: float = 1.0
    m: int = 128
    n_s: int = 32
    rho: Optional[float] = None
    opt: dict = field(default_factory=dict)
    law: dict = field(default_factory=lambda: {"kind": "power", "p": 2.0})
    snapshot_stride: int = 10
    seed: int = 0
    monitor: dict = field(default_factory=lambda: {"rho": True, "dissipation": True})
    sweep: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path = Path(".")) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        missing = [k for k in ("initial", "h", "M", "r0", "T") if k not in d]
        if missing:
            raise ConfigError(f"missing config keys: {missing}")
        cfg = cls(**d)
        if "file" in cfg.initial:
            p = Path(cfg.initial["file"])
            if not p.is_absolute():
                p = base_dir / p
            if not p.exists():
                raise ConfigError(f"initial shape file not found: {p}")
            cfg.initial = {**cfg.initial, "file": str(p)}
        if not cfg.T > 0:
            raise ConfigError("T must be positive")
        if cfg.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        cfg.monitor = {"rho": True, "dissipation": True, **cfg.monitor}
        return cfg

    def scheme_params(self) -> flow.SchemeParams:
        try:
            return flow.SchemeParams(h=float(self.h), M=float(self.M), r0=float(self.r0), V=float(self.V),
                                     m=int(self.m), n_s=int(self.n_s), rho=self.rho,
                                     opt=flow.OptSettings(**self.opt))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def initial_shape(self) -> RadialShape:
        spec = dict(self.initial)
        if "file" in spec:
            return io.read_shape(spec["file"], self.m)
        kind = spec.pop("kind", None)
        R = spec.pop("R", None)
        if "R_over_rstar" in spec:
            R = spec.pop("R_over_rstar") * fld.equilibrium_radius(self.V)
        if R is None:
            raise ConfigError("initial shape needs R or R_over_rstar")
        if kind == "ball":
            return RadialShape.ball(R, self.m)
        if kind == "perturbed_ball":
            return RadialShape.perturbed_ball(R, spec.get("amp", 0.0), int(spec.get("mode", 3)), self.m)
        if kind == "offset_ball":
            return RadialShape.offset_ball(R, spec.get("d", 0.0), self.m)
        raise ConfigError(f"unknown initial shape kind {kind!r}")


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        d = io.read_json(p)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return RunConfig.from_dict(d, p.parent)


# ---------------------------------------------------------------------------


def _validate_law(cfg: RunConfig) -> VelocityLaw:
    law = VelocityLaw.from_config(cfg.law)
    if not (law.kind == "power" and law.p == 2.0):
        # the minimizing-movement step realises F(s) = s^2 - 1 (capped by M through the admissible class)
        raise ConfigError("evolve realises F(s)=s^2-1 only; use law {'kind':'power','p':2}")
    return law


def _prepare(cfg: RunConfig, args):
    if args.snapshot_stride is not None:
        cfg.snapshot_stride = args.snapshot_stride
    if args.seed is not None:
        cfg.seed = args.seed
    _validate_law(cfg)
    params = cfg.scheme_params()
    shape = cfg.initial_shape()
    sr = star_radius(shape)
    if params.r0 > sr:
        raise ConfigError(f"infeasible admissible class: r0={params.r0} exceeds star radius {sr:.6g} of the initial shape")
    return params, shape


def _summary(cfg: RunConfig, traj: flow.FlowTrajectory) -> dict:
    rs = fld.equilibrium_radius(cfg.V)
    final = traj.steps[-1].shape
    d, centre = flow.best_fit_ball(final, rs, cfg.rho or 0.0)
    out = {
        "final_hausdorff_to_ball": d,
        "best_fit_center": list(centre),
        "r_star": rs,
        "energy_drop": traj.steps[0].energy - traj.steps[-1].energy,
        "steps": len(traj.steps) - 1,
        "aborted": traj.aborted,
        "reason": traj.reason,
        "initial_reflection_ok": traj.initial_reflection_ok,
        "min_decay_slack": float(traj.decay_slacks().min()) if len(traj.steps) > 1 else 0.0,
        "config": asdict(cfg),
        "params": traj.params.to_dict(),
    }
    if cfg.monitor.get("dissipation") and len(traj.steps) > 1:
        rep = flow.dissipation_check(traj)
        out["dissipation_final_rel"] = rep[-1]["rel_discrepancy"]
    return out


def _write_run(out: Path, cfg: RunConfig, traj: flow.FlowTrajectory) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    io.write_jsonl(out / "trajectory.jsonl", (s.to_json() for s in traj.steps))
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    last = len(traj.steps) - 1
    for s in traj.steps:
        if s.k % cfg.snapshot_stride == 0 or s.k == last:
            io.write_shape(snaps / f"shape_{s.k:06d}.csv", s.shape)
    summary = _summary(cfg, traj)
    io.write_json(out / "summary.json", summary)
    return summary


def _run(cfg: RunConfig, params, shape) -> flow.FlowTrajectory:
    np.random.seed(cfg.seed % 2 ** 32)
    return flow.run_flow(shape, params, cfg.T, monitor_rho=bool(cfg.monitor.get("rho")),
                         require_reflection=False)


def cmd_evolve(args) -> int:
    cfg = load_config(args.config)
    params, shape = _prepare(cfg, args)
    traj = _run(cfg, params, shape)
    summary = _write_run(Path(args.out), cfg, traj)
    print(io.dumps({k: summary[k] for k in ("final_hausdorff_to_ball", "r_star", "energy_drop", "steps", "aborted")}))
    return EXIT_NUMERICAL if traj.aborted else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    params, shape = _prepare(cfg, args)
    sw = cfg.sweep or {"kind": "h_refinement", "levels": 3}
    out = Path(args.out)
    kw = {"monitor_rho": bool(cfg.monitor.get("rho")), "require_reflection": False}
    if sw.get("kind") == "h_refinement":
        trajs, devs = flow.convergence_study(shape, params, cfg.T, int(sw.get("levels", 3)), **kw)
        labels = [f"h_{params.h / 2 ** j:.6g}" for j in range(len(trajs))]
        report = {"kind": "h_refinement", "h": [params.h / 2 ** j for j in range(len(trajs))], "sup_hausdorff_gaps": devs}
    elif sw.get("kind") == "M":
        Ms = [float(x) for x in sw.get("values", [])]
        if len(Ms) < 2:
            raise ConfigError("M sweep needs at least two values")
        trajs, devs = flow.m_sweep(shape, params, cfg.T, Ms, **kw)
        labels = [f"M_{M:.6g}" for M in Ms]
        report = {"kind": "M", "M": Ms, "sup_hausdorff_gaps": devs}
    else:
        raise ConfigError(f"unknown sweep kind {sw.get('kind')!r}")
    report["final_lambda"] = [t.steps[-1].lam for t in trajs]
    for lab, t in zip(labels, trajs):
        _write_run(out / lab, replace(cfg, h=t.params.h, M=t.params.M), t)
    io.write_json(out / "sweep.json", report)
    print(io.dumps(report))
    return EXIT_NUMERICAL if any(t.aborted for t in trajs) else EXIT_OK


def cmd_check(args) -> int:
    shape = io.read_shape(args.shape)
    rep = check_rho_reflection(shape, args.rho)
    out = {
        "star_radius": star_radius(shape),
        "rho_reflection": {"pass": rep.passed, "sup_smin": rep.rho_reflection_radius,
                           "ball_inside": rep.ball_radius_check},
        "annulus_width": annulus_width(shape),
        "implied_star_radius": implied_star_radius_from_reflection(shape, args.rho),
    }
    print(io.dumps(out))
    return EXIT_OK


def cmd_metrics(args) -> int:
    a = io.read_shape(args.shape_a)
    b = io.read_shape(args.shape_b)
    print(io.dumps(metrics.compare(a, b)))
    return EXIT_OK


def cmd_equilibrium(args) -> int:
    V, N = args.V, args.N
    if V <= 0 or N < 1:
        raise ConfigError("need V > 0 and N >= 1")
    rs = fld.equilibrium_radius(V, N)
    print(io.dumps({"V": V, "N": N, "r_star": rs, "lambda": fld.equilibrium_multiplier(V, N),
                    "energy": fld.ball_energy(rs, V, N), "rho_bound": fld.rho_bound(V, N)}))
    return EXIT_OK


def cmd_radial_ode(args) -> int:
    d = io.read_json(args.config) if args.config else {}
    try:
        law = VelocityLaw.from_config(d.get("law", {"kind": "power", "p": 2}))
        mode_cfg = d.get("mode", {"kind": "volume_preserving", "V": 1.0})
        N = int(mode_cfg.get("N", 2))
        if mode_cfg["kind"] == "volume_preserving":
            mode = VolumePreserving(float(mode_cfg["V"]), N)
        elif mode_cfg["kind"] == "fixed_lambda":
            mode = FixedMultiplier(float(mode_cfg["lam"]), N)
        else:
            raise ConfigError(f"unknown mode {mode_cfg['kind']!r}")
        sol = radial_ode(float(d.get("initial_r", 1.0)), law, mode, float(d.get("t_end", 10.0)),
                         float(d.get("dt", 1e-3)), r_max=float(d.get("r_max", 1e6)))
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from exc
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        io.write_radial_csv(args.out, sol)
    else:
        io.write_radial_csv(sys.stdout, sol)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dropflow", description="Drop wetting-set gradient flow toolkit")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    def run_flags(p, out_required=True):
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=out_required)
        p.add_argument("--snapshot-stride", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("evolve", help="run the minimizing-movement flow")
    run_flags(p)
    p.set_defaults(func=cmd_evolve)
    p = sub.add_parser("sweep", help="h-refinement or M sweep")
    run_flags(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("check", help="geometry report for a shape CSV")
    p.add_argument("shape")
    p.add_argument("--rho", type=float, required=True)
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("metrics", help="distances between two shape CSVs")
    p.add_argument("shape_a")
    p.add_argument("shape_b")
    p.set_defaults(func=cmd_metrics)
    p = sub.add_parser("equilibrium", help="equilibrium ball for volume V")
    p.add_argument("--V", type=float, default=1.0)
    p.add_argument("--N", type=int, default=2)
    p.set_defaults(func=cmd_equilibrium)
    p = sub.add_parser("radial-ode", help="radial reference ODE as CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_radial_ode)
    return ap


def _fail(code: int, kind: str, exc: BaseException) -> int:
    sys.stderr.write(io.dumps({"error": kind, "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, flow.InfeasibleStep, ValueError, TypeError) as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)
    except (fld.SolverError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)


if __name__ == "__main__":
    sys.exit(main())
