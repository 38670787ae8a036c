"""Hot geometric kernels.

Every kernel has a numba ``@njit`` implementation and a vectorised numpy
implementation with identical semantics.  The numba path is used when numba
imports cleanly, unless ``DROPFLOW_DISABLE_NUMBA`` is set to a truthy value.
Both paths are always importable so tests can compare them.
"""

from __future__ import annotations

import math
import os

import numpy as np

TWO_PI = 2.0 * math.pi

_DISABLE = os.environ.get("DROPFLOW_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA and not _DISABLE


# ---------------------------------------------------------------------------
# radial interpolation


def radial_interp_np(angles, radii):
    """Piecewise-linear, 2pi-periodic interpolation of ``radii`` at ``angles``."""
    m = radii.shape[0]
    dth = TWO_PI / m
    u = np.mod(angles, TWO_PI) / dth
    i0 = np.floor(u).astype(np.int64)
    frac = u - i0
    i0 = np.mod(i0, m)
    i1 = np.mod(i0 + 1, m)
    return (1.0 - frac) * radii[i0] + frac * radii[i1]


@njit(cache=True)
def _radial_interp_scalar(angle, radii):
    m = radii.shape[0]
    dth = TWO_PI / m
    a = angle % TWO_PI
    u = a / dth
    i0 = int(math.floor(u))
    frac = u - i0
    i0 = i0 % m
    i1 = (i0 + 1) % m
    return (1.0 - frac) * radii[i0] + frac * radii[i1]


# ---------------------------------------------------------------------------
# nearest point on a closed polyline


@njit(cache=True)
def nearest_on_polyline_nb(px, py, vx, vy):
    n = px.shape[0]
    m = vx.shape[0]
    dist = np.empty(n)
    qx = np.empty(n)
    qy = np.empty(n)
    for k in range(n):
        best = np.inf
        bx = 0.0
        by = 0.0
        x = px[k]
        y = py[k]
        for i in range(m):
            j = i + 1
            if j == m:
                j = 0
            ax = vx[i]
            ay = vy[i]
            ex = vx[j] - ax
            ey = vy[j] - ay
            ee = ex * ex + ey * ey
            t = 0.0
            if ee > 0.0:
                t = ((x - ax) * ex + (y - ay) * ey) / ee
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            cx = ax + t * ex
            cy = ay + t * ey
            d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy)
            if d2 < best:
                best = d2
                bx = cx
                by = cy
        dist[k] = math.sqrt(best)
        qx[k] = bx
        qy[k] = by
    return dist, qx, qy


def nearest_on_polyline_np(px, py, vx, vy, chunk=4096):
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    ax = vx[None, :]
    ay = vy[None, :]
    ex = (np.roll(vx, -1) - vx)[None, :]
    ey = (np.roll(vy, -1) - vy)[None, :]
    ee = ex * ex + ey * ey
    safe = np.where(ee > 0.0, ee, 1.0)
    dist = np.empty(px.shape[0])
    qx = np.empty(px.shape[0])
    qy = np.empty(px.shape[0])
    for lo in range(0, px.shape[0], chunk):
        x = px[lo:lo + chunk, None]
        y = py[lo:lo + chunk, None]
        t = np.clip(((x - ax) * ex + (y - ay) * ey) / safe, 0.0, 1.0)
        t = np.where(ee > 0.0, t, 0.0)
        cx = ax + t * ex
        cy = ay + t * ey
        d2 = (x - cx) ** 2 + (y - cy) ** 2
        idx = np.argmin(d2, axis=1)
        rows = np.arange(idx.shape[0])
        dist[lo:lo + chunk] = np.sqrt(d2[rows, idx])
        qx[lo:lo + chunk] = cx[rows, idx]
        qy[lo:lo + chunk] = cy[rows, idx]
    return dist, qx, qy


# ---------------------------------------------------------------------------
# reflection containment


@njit(cache=True)
def reflection_excess_nb(bx, by, nux, nuy, ts, radii):
    """Max of |phi(x)| - X(angle(phi(x))) over cap points x.nu > t, per t."""
    nt = ts.shape[0]
    n = bx.shape[0]
    out = np.full(nt, -np.inf)
    for k in range(nt):
        t = ts[k]
        worst = -np.inf
        for i in range(n):
            p = bx[i] * nux + by[i] * nuy
            if p <= t:
                continue
            d = 2.0 * (p - t)
            rx = bx[i] - d * nux
            ry = by[i] - d * nuy
            r = math.sqrt(rx * rx + ry * ry)
            ex = r - _radial_interp_scalar(math.atan2(ry, rx), radii)
            if ex > worst:
                worst = ex
        out[k] = worst
    return out


def reflection_excess_np(bx, by, nux, nuy, ts, radii):
    p = bx * nux + by * nuy
    ts = np.asarray(ts, dtype=float)
    out = np.full(ts.shape[0], -np.inf)
    for lo in range(0, ts.shape[0], 64):
        t = ts[lo:lo + 64, None]
        d = 2.0 * (p[None, :] - t)
        rx = bx[None, :] - d * nux
        ry = by[None, :] - d * nuy
        ex = np.hypot(rx, ry) - radial_interp_np(np.arctan2(ry, rx), radii)
        ex = np.where(p[None, :] > t, ex, -np.inf)
        out[lo:lo + 64] = ex.max(axis=1)
    return out


# ---------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    nearest_on_polyline = nearest_on_polyline_nb
    reflection_excess = reflection_excess_nb
else:
    nearest_on_polyline = nearest_on_polyline_np
    reflection_excess = reflection_excess_np


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
