"""Height profile, Lagrange multiplier and energy of a drop over a star-shaped base.

The unit-source problem ``-Lap w = 1`` in ``Omega``, ``w = 0`` on the contact
line is solved on the boundary-fitted polar map

    (s, theta) -> s X(theta) (cos theta, sin theta),   0 <= s <= 1.

In these coordinates the Dirichlet integral becomes

    int s (1 + L^2) w_s^2 - 2 L w_s w_theta + w_theta^2 / s  ds dtheta,

with ``L = X'/X`` and area element ``s X^2 ds dtheta``.  We discretise it with
P1 elements on a triangulated ``(s, theta)`` grid (the ``s = 0`` row collapses
to a single pole unknown) and a lumped load vector.  Because the scheme is
variational, ``int w = b^T A^{-1} b`` exactly, the discrete Dirichlet energy
equals ``lambda V`` exactly, and the derivative of the energy with respect to
the sampled radii is available in closed form (used by the flow).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import gamma

from ._kernels import radial_interp_np
from .metrics import area
from .shapes import RadialShape

logger = logging.getLogger(__name__)

N_DIM = 2
DEFAULT_NS = 64


class SolverError(RuntimeError):
    """The linear solve did not reach the residual target."""


def sphere_area(N: int) -> float:
    """``|S^{N-1}|``, surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / gamma(N / 2.0)


# ---------------------------------------------------------------------------
# discretisation


@dataclass
class _Grid:
    n_s: int
    m: int
    ds: float
    dth: float
    s: np.ndarray          # node radii, length n_s + 1
    weights: np.ndarray    # lumped  int hat_j(s) s ds, length n_s + 1


def _grid(n_s: int, m: int) -> _Grid:
    ds = 1.0 / n_s
    s = np.arange(n_s + 1) * ds
    wts = s * ds
    wts[0] = ds * ds / 6.0
    wts[-1] = ds / 2.0 - ds * ds / 6.0
    return _Grid(n_s, m, ds, 2.0 * math.pi / m, s, wts)


def _node_index(g: _Grid) -> np.ndarray:
    """Global unknown per (j, i) node; -1 marks the Dirichlet row j = n_s."""
    idx = np.empty((g.n_s + 1, g.m), dtype=np.int64)
    idx[0, :] = 0
    idx[1:g.n_s, :] = 1 + np.arange((g.n_s - 1) * g.m).reshape(g.n_s - 1, g.m)
    idx[g.n_s, :] = -1
    return idx


def _log_slopes(X: np.ndarray, dth: float) -> np.ndarray:
    """``L_i = (ln X_{i+1} - ln X_i) / dtheta`` on each angular cell."""
    lx = np.log(X)
    return (np.roll(lx, -1) - lx) / dth


def _triangles(g: _Grid):
    """Node triples and geometry of both triangle families.

    Cell (j, i) splits into T1 = (j,i),(j+1,i),(j+1,i+1) and
    T2 = (j,i),(j+1,i+1),(j,i+1).  Returns, per family, the (j, i) index
    arrays of the nodes in the order (gs_minus, gs_plus, gt_minus, gt_plus)
    and the centroid ``s``.
    """
    J, I = np.meshgrid(np.arange(g.n_s), np.arange(g.m), indexing="ij")
    Ip = (I + 1) % g.m
    t1 = dict(gs=((J, I), (J + 1, I)), gt=((J + 1, I), (J + 1, Ip)), sc=g.s[J] + 2.0 * g.ds / 3.0, col=I)
    t2 = dict(gs=((J, Ip), (J + 1, Ip)), gt=((J, I), (J, Ip)), sc=g.s[J] + g.ds / 3.0, col=I)
    return t1, t2


def _assemble(g: _Grid, X: np.ndarray):
    idx = _node_index(g)
    L = _log_slopes(X, g.dth)
    rows, cols, vals = [], [], []
    area_t = 0.5 * g.ds * g.dth
    for tri in _triangles(g):
        (a0, a1), (b0, b1) = tri["gs"], tri["gt"]
        sc = tri["sc"]
        Lc = L[tri["col"]]
        ca = area_t * sc * (1.0 + Lc * Lc) / g.ds ** 2
        cb = -area_t * Lc / (g.ds * g.dth)
        cc = area_t / sc / g.dth ** 2
        # gradient operators as signed node lists
        gs_nodes = [(idx[a0], -1.0), (idx[a1], 1.0)]
        gt_nodes = [(idx[b0], -1.0), (idx[b1], 1.0)]
        for (p, sp_), (q, sq) in [(u, v) for u in gs_nodes for v in gs_nodes]:
            rows.append(p.ravel()); cols.append(q.ravel()); vals.append((ca * sp_ * sq).ravel())
        for (p, sp_), (q, sq) in [(u, v) for u in gt_nodes for v in gt_nodes]:
            rows.append(p.ravel()); cols.append(q.ravel()); vals.append((cc * sp_ * sq).ravel())
        for (p, sp_), (q, sq) in [(u, v) for u in gs_nodes for v in gt_nodes]:
            val = (cb * sp_ * sq).ravel()
            rows.append(p.ravel()); cols.append(q.ravel()); vals.append(val)
            rows.append(q.ravel()); cols.append(p.ravel()); vals.append(val)
    n = 1 + (g.n_s - 1) * g.m
    keep, inverse, indices, indptr = _pattern(g.n_s, g.m, rows, cols)
    data = np.bincount(inverse, weights=np.concatenate(vals)[keep], minlength=indices.size)
    A = sp.csc_matrix((data, indices, indptr), shape=(n, n))
    b = np.zeros(n)
    load = g.weights[:, None] * (X * X)[None, :] * g.dth
    b[0] = load[0].sum()
    b[1:] = load[1:g.n_s].ravel()
    return A, b, idx


_PATTERNS: dict = {}


def _pattern(n_s: int, m: int, rows, cols):
    """CSC structure of the stiffness matrix; depends only on the grid."""
    key = (n_s, m)
    if key not in _PATTERNS:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        keep = (r >= 0) & (c >= 0)
        n = 1 + (n_s - 1) * m
        lin = c[keep].astype(np.int64) * n + r[keep]
        uniq, inverse = np.unique(lin, return_inverse=True)
        indices = (uniq % n).astype(np.int32)
        indptr = np.searchsorted(uniq // n, np.arange(n + 1)).astype(np.int32)
        _PATTERNS[key] = (keep, inverse.ravel(), indices, indptr)
    return _PATTERNS[key]


def _expand(w: np.ndarray, g: _Grid) -> np.ndarray:
    full = np.zeros((g.n_s + 1, g.m))
    full[0, :] = w[0]
    full[1:g.n_s, :] = w[1:].reshape(g.n_s - 1, g.m)
    return full


@dataclass
class UnitSource:
    """Discrete solution of ``-Lap w = 1`` on the mapped grid."""

    shape: RadialShape
    n_s: int
    w: np.ndarray              # (n_s + 1, m) nodal values, pole row repeated
    integral: float            # int w dx
    residual: float
    _grid: _Grid

    @property
    def s(self) -> np.ndarray:
        return self._grid.s

    def physical_nodes(self):
        X = self.shape.radii
        th = self.shape.angles
        r = self.s[:, None] * X[None, :]
        return r * np.cos(th)[None, :], r * np.sin(th)[None, :]

    def boundary_slope(self) -> np.ndarray:
        """``-dw/ds`` at ``s = 1`` from the one-sided three-point stencil."""
        ds = self._grid.ds
        w = self.w
        return -(3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * ds)

    def boundary_gradient(self) -> np.ndarray:
        """``|Dw|`` on the contact line; ``w_s = Dw . X e_r`` and Dw is normal."""
        X = self.shape.radii
        Xp = self.shape.derivative()
        return self.boundary_slope() * np.sqrt(X * X + Xp * Xp) / (X * X)

    def energy_gradient_terms(self):
        """``d/dX_k int w`` (exact for the discrete scheme)."""
        g = self._grid
        X = self.shape.radii
        w = self.w
        L = _log_slopes(X, g.dth)
        area_t = 0.5 * g.ds * g.dth
        P = np.zeros(g.m)
        Q = np.zeros(g.m)
        for tri in _triangles(g):
            (a0, a1), (b0, b1) = tri["gs"], tri["gt"]
            gs = (w[a1] - w[a0]) / g.ds
            gt = (w[b1] - w[b0]) / g.dth
            P += (area_t * tri["sc"] * gs * gs).sum(axis=0)
            Q += (area_t * gs * gt).sum(axis=0)
        dE_dL = 2.0 * L * P - 2.0 * Q
        dE_dX = (np.roll(dE_dL, 1) - dE_dL) / (X * g.dth)
        db_dX = 2.0 * X * g.dth * (g.weights[:, None] * w).sum(axis=0)
        return 2.0 * db_dX - dE_dX

    def integral_direct(self) -> float:
        """``int w`` by a separate cell-midpoint rule (cross-check only)."""
        return float(_cell_midpoint(self, self.w)[1])


def _cell_midpoint(us: UnitSource, u: np.ndarray):
    """Cell-centred quadrature of (int |Du|^2, int u) using central differences."""
    g = us._grid
    X = us.shape.radii
    Xc = 0.5 * (X + np.roll(X, -1))
    L = _log_slopes(X, g.dth)
    up = np.roll(u, -1, axis=1)
    u_s = 0.5 * ((u[1:] - u[:-1]) + (up[1:] - up[:-1])) / g.ds
    u_t = 0.5 * ((up[1:] - u[1:]) + (up[:-1] - u[:-1])) / g.dth
    umid = 0.25 * (u[1:] + u[:-1] + up[1:] + up[:-1])
    sm = (g.s[1:] + g.s[:-1])[:, None] / 2.0
    dens = sm * (1.0 + L * L) * u_s ** 2 - 2.0 * L * u_s * u_t + u_t ** 2 / sm
    cell = g.ds * g.dth
    return float(dens.sum() * cell), float((umid * sm * Xc * Xc).sum() * cell)


def solve_unit_source(shape: RadialShape, n_s: int = DEFAULT_NS, rtol: float = 1e-10) -> UnitSource:
    """Solve ``-Lap w = 1`` in the shape with ``w = 0`` on its boundary."""
    if n_s < 4:
        raise ValueError("n_s too small")
    g = _grid(n_s, shape.m)
    A, b, _ = _assemble(g, shape.radii)
    lu = splu(A, permc_spec="MMD_AT_PLUS_A")
    w = lu.solve(b)
    res = float(np.linalg.norm(A @ w - b) / np.linalg.norm(b))
    if not np.isfinite(res) or res > rtol:
        w = w + lu.solve(b - A @ w)
        res = float(np.linalg.norm(A @ w - b) / np.linalg.norm(b))
        if not np.isfinite(res) or res > rtol:
            raise SolverError(f"linear solve residual {res:.3e} exceeds {rtol:.1e}")
    return UnitSource(shape=shape, n_s=n_s, w=_expand(w, g), integral=float(b @ w), residual=res, _grid=g)


# ---------------------------------------------------------------------------
# drop quantities


@dataclass
class DropField:
    shape: RadialShape
    unit: UnitSource
    lam: float
    volume: float
    dirichlet_energy: float
    boundary_gradient: np.ndarray
    energy: float

    @property
    def grid(self) -> np.ndarray:
        return self.unit.w

    @property
    def u(self) -> np.ndarray:
        return self.lam * self.unit.w

    def volume_check(self) -> float:
        """``int u`` recomputed by the lumped quadrature."""
        g = self.unit._grid
        X = self.shape.radii
        return float(np.sum(g.weights[:, None] * X[None, :] ** 2 * self.u) * g.dth)

    def dirichlet_energy_direct(self) -> float:
        return self.lam ** 2 * _cell_midpoint(self.unit, self.unit.w)[0]

    def evaluate(self, x, y) -> np.ndarray:
        """``u`` at physical points by bilinear interpolation in ``(s, theta)``; zero outside."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        g = self.unit._grid
        m = self.shape.m
        th = np.mod(np.arctan2(y, x), 2.0 * np.pi)
        s = np.hypot(x, y) / radial_interp_np(th, self.shape.radii)
        inside = s < 1.0
        sj = np.clip(s, 0.0, 1.0) / g.ds
        j = np.minimum(sj.astype(int), g.n_s - 1)
        a = sj - j
        ti = th / g.dth
        i = np.floor(ti).astype(int) % m
        b = ti - np.floor(ti)
        i1 = (i + 1) % m
        u = self.u
        val = ((1 - a) * ((1 - b) * u[j, i] + b * u[j, i1])
               + a * ((1 - b) * u[j + 1, i] + b * u[j + 1, i1]))
        return np.where(inside, val, 0.0)

    def to_csv(self, path) -> None:
        """Dump ``(s, theta, w)`` for external plotting."""
        s = np.repeat(self.unit.s, self.shape.m)
        th = np.tile(self.shape.angles, self.unit.s.size)
        np.savetxt(path, np.column_stack([s, th, self.unit.w.ravel()]), delimiter=",",
                   header="s,theta,w", comments="", fmt="%.17g")


def drop_profile(shape: RadialShape, V: float, n_s: int = DEFAULT_NS,
                 unit: Optional[UnitSource] = None) -> DropField:
    if V <= 0:
        raise ValueError("volume must be positive")
    if unit is None:
        unit = solve_unit_source(shape, n_s)
    lam = V / unit.integral
    dir_e = lam * lam * unit.integral
    return DropField(shape=shape, unit=unit, lam=lam, volume=V, dirichlet_energy=dir_e,
                     boundary_gradient=lam * unit.boundary_gradient(),
                     energy=dir_e + area(shape))


def lagrange_multiplier(shape: RadialShape, V: float, n_s: int = DEFAULT_NS) -> float:
    """``lambda = V / int w``: the constant source giving the profile volume ``V``."""
    if V <= 0:
        raise ValueError("volume must be positive")
    return V / solve_unit_source(shape, n_s).integral


def energy(shape: RadialShape, V: float, n_s: int = DEFAULT_NS) -> float:
    """``int |Du|^2 + |Omega| = lambda V + |Omega|``."""
    return drop_profile(shape, V, n_s).energy


def energy_and_gradient(shape: RadialShape, V: float, n_s: int = DEFAULT_NS):
    """Energy ``V^2 / int w + area`` and its exact derivative in the radii."""
    unit = solve_unit_source(shape, n_s)
    I = unit.integral
    dI = unit.energy_gradient_terms()
    val = V * V / I + area(shape)
    grad = -V * V / (I * I) * dI + shape.radii * shape.dtheta
    return val, grad, unit


# ---------------------------------------------------------------------------
# radial closed forms


def ball_multiplier(R: float, V: float, N: int = N_DIM) -> float:
    return N * N * (N + 2) * V / (sphere_area(N) * R ** (N + 2))


def ball_energy(R: float, V: float, N: int = N_DIM) -> float:
    return ball_multiplier(R, V, N) * V + sphere_area(N) * R ** N / N


def ball_boundary_gradient(R: float, V: float, N: int = N_DIM) -> float:
    """``|Du|`` on the boundary of the ball profile of volume ``V``."""
    return N * (N + 2) * V / (sphere_area(N) * R ** (N + 1))


def equilibrium_radius(V: float, N: int = N_DIM) -> float:
    """Radius where the volume-``V`` ball profile meets the plane with unit slope."""
    if V <= 0 or N < 1:
        raise ValueError("need V > 0 and N >= 1")
    return (N * (N + 2) * V / sphere_area(N)) ** (1.0 / (N + 1))


def equilibrium_multiplier(V: float, N: int = N_DIM) -> float:
    return N / equilibrium_radius(V, N)


def rho_bound(V: float, N: int = N_DIM, strict: bool = False) -> float:
    """Largest reflection radius covered by the all-time ball-containment estimate.

    ``strict=True`` returns the more conservative ``V^(1/(N+1)) / 10``.
    """
    if V <= 0:
        raise ValueError("volume must be positive")
    if strict:
        return 0.1 * V ** (1.0 / (N + 1))
    c_n = 5.0 ** (-(N + 2) / (N + 1)) * (N * (N + 2) / sphere_area(N)) ** (1.0 / (N + 1))
    return c_n * V ** (1.0 / (N + 1))
