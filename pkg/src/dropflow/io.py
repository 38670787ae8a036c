"""File formats: shape CSV, 17-digit JSON, and readers for every output."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, List

import numpy as np

from ._kernels import TWO_PI
from .shapes import RadialShape

DIGITS = 17


def _fmt(x: float) -> str:
    return format(x, f".{DIGITS}g")


def dumps(obj) -> str:
    """Compact, key-sorted JSON with floats at 17 significant digits.

    Non-finite floats become ``null``.
    """
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _fmt(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in sorted(obj.items())) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(dumps(r) + "\n")


def read_jsonl(path) -> List[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- shapes ----------------------------------------------------------------


def write_shape(path, shape: RadialShape) -> None:
    with open(path, "w") as fh:
        fh.write("theta,radius\n")
        for t, r in zip(shape.angles, shape.radii):
            fh.write(f"{_fmt(t)},{_fmt(r)}\n")


def _next_pow2(n: int) -> int:
    return max(64, 1 << (int(n) - 1).bit_length())


def read_shape(path, m: int = None) -> RadialShape:
    """Read a ``theta,radius`` CSV and resample onto a uniform power-of-two grid.

    Angles may be in any order and any period-``2 pi`` representative.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ValueError(f"cannot read shape file: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["theta", "radius"]:
        raise ValueError("shape CSV must start with header 'theta,radius'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:] if (a, b) != ("", "")])
    except (ValueError, TypeError) as exc:
        raise ValueError(f"malformed shape CSV: {exc}") from exc
    if data.ndim != 2 or data.shape[0] < 3:
        raise ValueError("shape CSV needs at least 3 rows")
    th = np.mod(data[:, 0], TWO_PI)
    order = np.argsort(th)
    th, r = th[order], data[order, 1]
    if np.any(np.diff(th) <= 0):
        raise ValueError("duplicate angles in shape CSV")
    m = m or _next_pow2(th.size)
    grid = TWO_PI * np.arange(m) / m
    uniform = th.size == m and np.allclose(th, grid, atol=1e-12)
    if uniform:
        return RadialShape(r)
    # periodic linear interpolation on the given (possibly non-uniform) angles
    thp = np.concatenate([th[-1:] - TWO_PI, th, th[:1] + TWO_PI])
    rp = np.concatenate([r[-1:], r, r[:1]])
    return RadialShape(np.interp(grid, thp, rp))


def write_radial_csv(path_or_fh, sol) -> None:
    lines = ["t,r"] + [f"{_fmt(t)},{_fmt(r)}" for t, r in zip(sol.t, sol.r)]
    br = sol.event.bracket
    if br is None:
        lines.append(f"event,{sol.event.kind}")
    else:
        lines.append(f"event,{sol.event.kind},{_fmt(br[0])},{_fmt(br[1])}")
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_fh, "write"):
        path_or_fh.write(text)
    else:
        Path(path_or_fh).write_text(text)


def read_radial_csv(text: str):
    """Parse radial-ode output into ``(t, r, event_kind, bracket)``."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if lines[0] != "t,r" or not lines[-1].startswith("event,"):
        raise ValueError("not radial-ode output")
    vals = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:-1]])
    ev = lines[-1].split(",")
    bracket = (float(ev[2]), float(ev[3])) if len(ev) == 4 else None
    return vals[:, 0], vals[:, 1], ev[1], bracket

