"""Planar grids, manifold-valued fields, energies and traces on circles.

Nodes sit on a uniform lattice; a cell is used when its four corners are
inside the domain.  Inside a cell the field is the bilinear interpolant of its
corner values, so every derivative below is a blend of forward differences
along the cell edges.  Cell integrals use the 2x2 Gauss rule.  Cells crossed by
the boundary of an integration region are sub-sampled with a linear ramp on
the signed distance, which keeps the region area second-order accurate.

A cell whose corner values wind around a circle factor contains a vortex core
that no grid function can represent.  Energies replace the interpolant there
by the ideal core |Du| = lambda/(2 pi r) centred in the cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import integrate as sp_integrate

from .manifold import (
    GAP_LIMIT,
    TWO_PI,
    HomotopyCharge,
    TargetManifold,
    angle_increments,
    loop_charge,
    project,
)
from .textio import fmt_float

GAUSS_1D = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))
MANIFOLD_TOL = 1e-10


class TraceError(ValueError):
    """Raised when a circle leaves the resolved part of the domain."""


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Uniform node lattice over a planar domain.

    ``holes`` perforates the domain with disks whose circles are free (natural)
    boundaries; cells cut by a hole carry the fraction of their area left
    outside it.  Only the outer ring of inside nodes is a Dirichlet boundary.
    """

    kind: str
    params: tuple
    h: float
    origin: tuple
    nx: int
    ny: int
    holes: tuple = ()

    def __post_init__(self):
        if self.kind not in ("unit_disk", "rectangle", "annulus"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not self.h > 0:
            raise ValueError("spacing must be positive")

    # geometry of the continuum domain
    def contains(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if self.kind == "unit_disk":
            return x * x + y * y < 1.0
        if self.kind == "rectangle":
            w, ht = self.params
            return (np.abs(x) < w / 2) & (np.abs(y) < ht / 2)
        r_in, r_out = self.params
        r2 = x * x + y * y
        return (r2 > r_in * r_in) & (r2 < r_out * r_out)

    def dist_to_boundary(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if self.kind == "unit_disk":
            return 1.0 - np.hypot(x, y)
        if self.kind == "rectangle":
            w, ht = self.params
            return np.minimum(w / 2 - np.abs(x), ht / 2 - np.abs(y))
        r_in, r_out = self.params
        r = np.hypot(x, y)
        return np.minimum(r_out - r, r - r_in)

    @property
    def center(self) -> tuple:
        return (0.0, 0.0)

    @property
    def spec(self) -> str:
        if self.kind == "unit_disk":
            return "unit_disk"
        return self.kind + ":" + ",".join(fmt_float(v) for v in self.params)

    # lattice
    @cached_property
    def xs(self):
        return self.origin[0] + self.h * np.arange(self.nx)

    @cached_property
    def ys(self):
        return self.origin[1] + self.h * np.arange(self.ny)

    @cached_property
    def XY(self):
        return np.meshgrid(self.xs, self.ys)

    @cached_property
    def base_inside(self):
        X, Y = self.XY
        return self.contains(X, Y)

    def _hole_distance(self, x, y):
        d = np.full(np.shape(x), np.inf)
        for cx, cy, rho in self.holes:
            d = np.minimum(d, np.hypot(x - cx, y - cy) - rho)
        return d

    @cached_property
    def _cell_data(self):
        X, Y = self.XY
        base = self.base_inside
        if self.holes:
            cand = base & (self._hole_distance(X, Y) > -1.5 * self.h)
        else:
            cand = base
        cells = cand[:-1, :-1] & cand[:-1, 1:] & cand[1:, :-1] & cand[1:, 1:]
        frac = np.ones(cells.shape)
        if self.holes:
            cx = X[:-1, :-1] + 0.5 * self.h
            cy = Y[:-1, :-1] + 0.5 * self.h
            dc = self._hole_distance(cx, cy)
            near = cells & (np.abs(dc) < self.h)
            m = 16
            off = ((np.arange(m) + 0.5) / m - 0.5) * self.h
            jj, ii = np.nonzero(near)
            if jj.size:
                px = cx[jj, ii][:, None, None] + off[None, None, :]
                py = cy[jj, ii][:, None, None] + off[None, :, None]
                w = _ramp(self._hole_distance(px, py), self.h / m)
                frac[jj, ii] = w.mean(axis=(1, 2))
            frac[cells & (dc <= -self.h)] = 0.0
            cells = cells & (frac > 1e-12)
        return cells, frac

    @cached_property
    def inside(self):
        if not self.holes:
            return self.base_inside.copy()
        X, Y = self.XY
        cells = self._cell_data[0]
        corner = np.zeros_like(self.base_inside)
        corner[:-1, :-1] |= cells
        corner[:-1, 1:] |= cells
        corner[1:, :-1] |= cells
        corner[1:, 1:] |= cells
        return self.base_inside & ((self._hole_distance(X, Y) >= 0) | corner)

    @cached_property
    def index(self):
        idx = np.full((self.ny, self.nx), -1, dtype=np.int64)
        idx[self.inside] = np.arange(int(self.inside.sum()))
        return idx

    @property
    def n_inside(self) -> int:
        return int(self.inside.sum())

    @cached_property
    def node_xy(self):
        X, Y = self.XY
        return np.column_stack([X[self.inside], Y[self.inside]])

    @cached_property
    def boundary_mask(self):
        base = self.base_inside
        pad = np.pad(base, 1, constant_values=False)
        all_nb = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
        return self.inside & ~all_nb

    @cached_property
    def boundary_idx(self):
        return self.index[self.boundary_mask]

    @cached_property
    def free_idx(self):
        free = self.inside & ~self.boundary_mask
        return self.index[free]

    @cached_property
    def cells(self):
        if not self.holes:
            ins = self.inside
            return ins[:-1, :-1] & ins[:-1, 1:] & ins[1:, :-1] & ins[1:, 1:]
        return self._cell_data[0]

    @cached_property
    def cell_index(self):
        idx = np.full(self.cells.shape, -1, dtype=np.int64)
        idx[self.cells] = np.arange(int(self.cells.sum()))
        return idx

    @cached_property
    def cell_corners(self):
        """Node indices (n00, n10, n01, n11) for every cell; x runs along the second index."""
        jj, ii = np.nonzero(self.cells)
        idx = self.index
        return np.column_stack([idx[jj, ii], idx[jj, ii + 1], idx[jj + 1, ii], idx[jj + 1, ii + 1]])

    @cached_property
    def cell_centers(self):
        jj, ii = np.nonzero(self.cells)
        return np.column_stack([self.xs[ii] + 0.5 * self.h, self.ys[jj] + 0.5 * self.h])

    @cached_property
    def cell_weight(self):
        if not self.holes:
            return np.ones(int(self.cells.sum()))
        return self._cell_data[1][self.cells]

    @cached_property
    def operators(self):
        """Sparse Gauss-point derivative operators (Dx, Dy) and quadrature weights."""
        corners = self.cell_corners
        nc = corners.shape[0]
        h = self.h
        rows, cols, vx, vy = [], [], [], []
        g = 0
        for eta in GAUSS_1D:
            for xi in GAUSS_1D:
                r = 4 * np.arange(nc) + g
                # d/dx: (1-eta)(u10-u00) + eta(u11-u01); d/dy: (1-xi)(u01-u00) + xi(u11-u10)
                cx = np.array([-(1 - eta), 1 - eta, -eta, eta]) / h
                cy = np.array([-(1 - xi), -xi, 1 - xi, xi]) / h
                for k in range(4):
                    rows.append(r)
                    cols.append(corners[:, k])
                    vx.append(np.full(nc, cx[k]))
                    vy.append(np.full(nc, cy[k]))
                g += 1
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        shape = (4 * nc, self.n_inside)
        dx = sp.csr_matrix((np.concatenate(vx), (rows, cols)), shape=shape)
        dy = sp.csr_matrix((np.concatenate(vy), (rows, cols)), shape=shape)
        w = np.repeat(self.cell_weight, 4) * (h * h / 4.0)
        return dx, dy, w

    @cached_property
    def stiffness(self):
        dx, dy, w = self.operators
        wm = sp.diags(w)
        return (dx.T @ wm @ dx + dy.T @ wm @ dy).tocsr()

    def boundary_loops(self) -> list:
        """Boundary nodes ordered by angle about the domain centre, one array per component."""
        b = self.boundary_idx
        xy = self.node_xy[b]
        ang = np.arctan2(xy[:, 1], xy[:, 0])
        rad = np.hypot(xy[:, 0], xy[:, 1])
        if self.kind == "annulus":
            mid = 0.5 * (self.params[0] + self.params[1])
            groups = [rad >= mid, rad < mid]
        else:
            groups = [np.ones(len(b), bool)]
        loops = []
        for sel in groups:
            order = np.lexsort((rad[sel], ang[sel]))
            loops.append(b[sel][order])
        return loops


def _lattice(extent_x: float, extent_y: float, h: float):
    nx = 2 * int(math.ceil(extent_x / h - 1e-9)) + 4
    ny = 2 * int(math.ceil(extent_y / h - 1e-9)) + 4
    return (-(nx - 1) * h / 2, -(ny - 1) * h / 2), nx, ny


def unit_disk(h: float) -> DomainGrid:
    origin, nx, ny = _lattice(1.0, 1.0, h)
    return DomainGrid("unit_disk", (), float(h), origin, nx, ny)


def rectangle(w: float, ht: float, h: float) -> DomainGrid:
    origin, nx, ny = _lattice(w / 2, ht / 2, h)
    return DomainGrid("rectangle", (float(w), float(ht)), float(h), origin, nx, ny)


def annulus(r_in: float, r_out: float, h: float) -> DomainGrid:
    if not 0 <= r_in < r_out:
        raise ValueError("annulus needs 0 <= r_in < r_out")
    origin, nx, ny = _lattice(r_out, r_out, h)
    return DomainGrid("annulus", (float(r_in), float(r_out)), float(h), origin, nx, ny)


def make_domain(spec: str, h: float) -> DomainGrid:
    """Build a grid from ``"unit_disk"``, ``"rectangle:w,h"`` or ``"annulus:r_in,r_out"``."""
    s = str(spec).strip().lower()
    name, _, rest = s.partition(":")
    try:
        args = [float(v) for v in rest.split(",")] if rest else []
    except ValueError as exc:
        raise ValueError(f"bad domain parameters in {spec!r}") from exc
    if name in ("unit_disk", "disk") and not args:
        return unit_disk(h)
    if name == "rectangle" and len(args) == 2:
        return rectangle(args[0], args[1], h)
    if name == "annulus" and len(args) == 2:
        return annulus(args[0], args[1], h)
    raise ValueError(f"unknown domain {spec!r}")


def perforate(grid: DomainGrid, holes: Sequence) -> DomainGrid:
    holes = tuple((float(cx), float(cy), float(r)) for cx, cy, r in holes)
    return DomainGrid(grid.kind, grid.params, grid.h, grid.origin, grid.nx, grid.ny, holes)


# --------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class DiscreteField:
    grid: DomainGrid
    target: TargetManifold
    values: np.ndarray
    boundary_data: np.ndarray = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_inside, self.target.ambient_dim):
            raise ValueError(f"values must have shape {(self.grid.n_inside, self.target.ambient_dim)}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        if self.target.kind != "euclidean":
            blocks = vals.reshape(len(vals), self.target.n_factors, 2)
            err = np.abs(np.sqrt(np.sum(blocks * blocks, axis=-1)) - 1.0)
            if err.size and err.max() > MANIFOLD_TOL:
                raise ValueError("values violate the manifold constraint")
        bidx = self.grid.boundary_idx
        if self.boundary_data is None:
            bd = vals[bidx].copy()
        else:
            bd = np.array(self.boundary_data, dtype=float)
            if bd.shape != (len(bidx), self.target.ambient_dim):
                raise ValueError("boundary data has the wrong shape")
            if not np.array_equal(vals[bidx], bd):
                raise ValueError("boundary nodes must hold the boundary data exactly")
        vals.flags.writeable = False
        bd.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "boundary_data", bd)

    def with_values(self, values) -> "DiscreteField":
        return DiscreteField(self.grid, self.target, values, self.boundary_data)

    @cached_property
    def coeffs(self):
        """Bilinear coefficients per cell: I = u00 + xi*a + eta*b + xi*eta*c."""
        c = self.grid.cell_corners
        u = self.values
        u00, u10, u01, u11 = u[c[:, 0]], u[c[:, 1]], u[c[:, 2]], u[c[:, 3]]
        return u10 - u00, u01 - u00, u11 - u10 - u01 + u00

    @cached_property
    def plaquettes(self):
        """Per-cell winding vectors and an unresolved flag (gap of at least pi)."""
        k = self.target.n_factors
        c = self.grid.cell_corners
        nc = c.shape[0]
        charges = np.zeros((nc, k), dtype=np.int64)
        unresolved = np.zeros(nc, dtype=bool)
        u = self.values
        cycle = [c[:, 0], c[:, 1], c[:, 3], c[:, 2]]  # counter-clockwise
        for f in range(k):
            tot = np.zeros(nc)
            for s in range(4):
                a = u[cycle[s], 2 * f:2 * f + 2]
                b = u[cycle[(s + 1) % 4], 2 * f:2 * f + 2]
                inc = angle_increments(a, b)
                unresolved |= np.abs(inc) >= GAP_LIMIT
                tot += inc
            charges[:, f] = np.rint(tot / TWO_PI).astype(np.int64)
        charges[unresolved] = 0
        lam = TWO_PI * np.sqrt(np.sum(charges.astype(float) ** 2, axis=1))
        return charges, unresolved, lam

    @property
    def singular_cells(self):
        charges, unresolved, _ = self.plaquettes
        return np.any(charges != 0, axis=1) & ~unresolved


def field_from_array(grid: DomainGrid, target: TargetManifold, full: np.ndarray) -> DiscreteField:
    """Field from an array of shape (ny, nx, ambient) sampled at every node."""
    return DiscreteField(grid, target, np.asarray(full)[grid.inside])


# --------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class Region:
    """Integration region: union of ``include`` disks (or the whole domain) minus ``exclude`` disks."""

    include: tuple = ()
    exclude: tuple = ()

    def distances(self, x, y):
        if self.include:
            d_in = np.full(np.shape(x), -np.inf)
            for cx, cy, r in self.include:
                d_in = np.maximum(d_in, r - np.hypot(x - cx, y - cy))
        else:
            d_in = np.full(np.shape(x), np.inf)
        d_ex = np.full(np.shape(x), np.inf)
        for cx, cy, r in self.exclude:
            d_ex = np.minimum(d_ex, np.hypot(x - cx, y - cy) - r)
        return d_in, d_ex


def disks_region(disks, exclude=()) -> Region:
    return Region(tuple((float(a), float(b), float(r)) for a, b, r in disks),
                  tuple((float(a), float(b), float(r)) for a, b, r in exclude))


def annulus_region(center, r_in: float, r_out: float) -> Region:
    cx, cy = center
    exclude = ((float(cx), float(cy), float(r_in)),) if r_in > 0 else ()
    return Region(((float(cx), float(cy), float(r_out)),), exclude)


def perforated_region(points, rho: float) -> Region:
    return Region((), tuple((float(x), float(y), float(rho)) for x, y in points))


def _ramp(d, width):
    return np.clip(0.5 + d / width, 0.0, 1.0)


def _quadrature(grid: DomainGrid, region: Region | None, m: int):
    """Quadrature nodes (cell, xi, eta, weight) and the covered fraction of each cell."""
    nc = grid.cell_centers.shape[0]
    h = grid.h
    gx = np.array([GAUSS_1D[0], GAUSS_1D[1], GAUSS_1D[0], GAUSS_1D[1]])
    gy = np.array([GAUSS_1D[0], GAUSS_1D[0], GAUSS_1D[1], GAUSS_1D[1]])
    area = grid.cell_weight * h * h
    if region is None:
        cells = np.repeat(np.arange(nc), 4)
        return cells, np.tile(gx, nc), np.tile(gy, nc), np.repeat(area / 4, 4), grid.cell_weight.copy()
    cc = grid.cell_centers
    d_in, d_ex = region.distances(cc[:, 0], cc[:, 1])
    half = h / math.sqrt(2.0) * 1.000001
    clean = (d_in > half) & (d_ex > half)
    out = (d_in < -half) | (d_ex < -half)
    cut = ~clean & ~out
    frac = np.where(clean, 1.0, 0.0) * grid.cell_weight
    ci = np.nonzero(clean)[0]
    parts_c = [np.repeat(ci, 4)]
    parts_x = [np.tile(gx, len(ci))]
    parts_y = [np.tile(gy, len(ci))]
    parts_w = [np.repeat(area[ci] / 4, 4)]
    ku = np.nonzero(cut)[0]
    if ku.size:
        s = (np.arange(m) + 0.5) / m
        sx, sy = np.meshgrid(s, s)
        sx = sx.ravel()
        sy = sy.ravel()
        x0 = cc[ku, 0] - 0.5 * h
        y0 = cc[ku, 1] - 0.5 * h
        px = x0[:, None] + sx[None, :] * h
        py = y0[:, None] + sy[None, :] * h
        a, b = region.distances(px, py)
        w = _ramp(a, h / m) * _ramp(b, h / m)
        frac[ku] = w.mean(axis=1) * grid.cell_weight[ku]
        parts_c.append(np.repeat(ku, m * m))
        parts_x.append(np.tile(sx, len(ku)))
        parts_y.append(np.tile(sy, len(ku)))
        parts_w.append((w * (area[ku] / (m * m))[:, None]).ravel())
    return (np.concatenate(parts_c), np.concatenate(parts_x), np.concatenate(parts_y),
            np.concatenate(parts_w), frac)


def _grad_sq(u: DiscreteField, cells, xi, eta, coeffs=None):
    a, b, c = coeffs if coeffs is not None else u.coeffs
    h = u.grid.h
    ac = a[cells]
    bc = b[cells]
    cc = c[cells]
    gx = (ac + eta[:, None] * cc) / h
    gy = (bc + xi[:, None] * cc) / h
    return np.sum(gx * gx + gy * gy, axis=1)


@lru_cache(maxsize=64)
def core_cell_constant(p: float) -> float:
    """Integral of |y|^-p over the unit square centred at the origin (infinite for p >= 2)."""
    if p >= 2.0:
        return math.inf
    val, _ = sp_integrate.quad(lambda t: (2.0 * math.cos(t)) ** (p - 2.0), 0.0, math.pi / 4,
                               epsabs=1e-14, epsrel=1e-13)
    return 8.0 * val / (2.0 - p)


def core_cell_energy(lam: float, p: float, h: float) -> float:
    """p-energy of the ideal core lambda/(2 pi r) over one cell centred on the vortex."""
    if lam == 0.0:
        return 0.0
    c = core_cell_constant(float(p))
    if math.isinf(c):
        return math.inf
    return (lam / TWO_PI) ** p * h ** (2.0 - p) * c / p


def region_energy(u: DiscreteField, p: float, region: Region | None = None, m: int = 8) -> float:
    """Integral of |Du|^p/p over ``region`` (whole domain when None)."""
    cells, xi, eta, w, frac = _quadrature(u.grid, region, m)
    sing = u.singular_cells
    keep = ~sing[cells]
    s = _grad_sq(u, cells[keep], xi[keep], eta[keep])
    total = float(np.sum(w[keep] * s ** (p / 2.0))) / p
    if np.any(sing):
        lam = u.plaquettes[2]
        for k in np.nonzero(sing & (frac > 0))[0]:
            total += frac[k] * core_cell_energy(float(lam[k]), p, u.grid.h)
    return total


def p_energy(u: DiscreteField, p: float) -> float:
    """Discrete p-Dirichlet energy of ``u`` over the whole domain."""
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    return region_energy(u, p, None)


def integrate_gradient(u: DiscreteField, fn: Callable, region: Region | None = None, m: int = 8,
                       coeffs=None) -> float:
    """Integral of fn(|Du|, x, y) over ``region``; vortex cells use the ideal core sampled on an m x m grid."""
    grid = u.grid
    cells, xi, eta, w, frac = _quadrature(grid, region, m)
    sing = u.singular_cells if coeffs is None else np.zeros(len(grid.cell_centers), bool)
    keep = ~sing[cells]
    cc = grid.cell_centers
    h = grid.h
    xk = cc[cells[keep], 0] + (xi[keep] - 0.5) * h
    yk = cc[cells[keep], 1] + (eta[keep] - 0.5) * h
    g = np.sqrt(_grad_sq(u, cells[keep], xi[keep], eta[keep], coeffs))
    total = float(np.sum(w[keep] * fn(g, xk, yk)))
    ks = np.nonzero(sing & (frac > 0))[0]
    if ks.size:
        lam = u.plaquettes[2][ks]
        s = (np.arange(m) + 0.5) / m - 0.5
        sx, sy = np.meshgrid(s, s)
        ox = sx.ravel() * h
        oy = sy.ravel() * h
        r = np.hypot(ox, oy)
        px = cc[ks, 0][:, None] + ox[None, :]
        py = cc[ks, 1][:, None] + oy[None, :]
        if region is not None:
            a, b = region.distances(px, py)
            wr = _ramp(a, h / m) * _ramp(b, h / m)
        else:
            wr = np.ones(px.shape)
        gi = lam[:, None] / (TWO_PI * r[None, :])
        area = grid.cell_weight[ks] * h * h / (m * m)
        total += float(np.sum(wr * area[:, None] * fn(gi, px, py)))
    return total


def gradient_samples(u: DiscreteField, m: int = 4, region: Region | None = None):
    """|Du| on an m x m midpoint grid in every cell, with area weights (ideal core in vortex cells)."""
    grid = u.grid
    h = grid.h
    nc = grid.cell_centers.shape[0]
    s = (np.arange(m) + 0.5) / m
    sx, sy = np.meshgrid(s, s)
    sx = sx.ravel()
    sy = sy.ravel()
    cells = np.repeat(np.arange(nc), m * m)
    xi = np.tile(sx, nc)
    eta = np.tile(sy, nc)
    g = np.sqrt(_grad_sq(u, cells, xi, eta))
    cc = grid.cell_centers
    px = cc[cells, 0] + (xi - 0.5) * h
    py = cc[cells, 1] + (eta - 0.5) * h
    sing = u.singular_cells[cells]
    if np.any(sing):
        lam = u.plaquettes[2][cells[sing]]
        g[sing] = lam / (TWO_PI * np.hypot(px[sing] - cc[cells[sing], 0], py[sing] - cc[cells[sing], 1]))
    w = np.repeat(grid.cell_weight * h * h / (m * m), m * m)
    if region is not None:
        a, b = region.distances(px, py)
        w = w * _ramp(a, h / m) * _ramp(b, h / m)
    return g, w


def weak_lp_quasinorm(values, weights, p: float, t_max: float = math.inf) -> float:
    """sup over t <= t_max of t^p * |{values > t}| for a weighted sample."""
    v = np.asarray(values, float)
    w = np.asarray(weights, float)
    order = np.argsort(-v, kind="stable")
    v = v[order]
    cum = np.cumsum(w[order])
    ok = (v <= t_max) & (v > 0)
    best = float(np.max(v[ok] ** p * cum[ok])) if np.any(ok) else 0.0
    if math.isfinite(t_max):
        above = float(np.sum(w[v >= t_max]))
        best = max(best, t_max ** p * above)
    return best


# --------------------------------------------------------------------------
# circles


def default_circle_samples(h: float, radius: float) -> int:
    # odd counts avoid aliasing with the symmetry of the lattice
    return max(65, 8 * int(math.ceil(4.0 * math.pi * radius / h)) + 1)


def _circle_points(center, radius: float, n: int):
    t = TWO_PI * np.arange(n) / n
    return center[0] + radius * np.cos(t), center[1] + radius * np.sin(t), t


def _locate(grid: DomainGrid, x, y, radius=None, center=None):
    fx = (x - grid.origin[0]) / grid.h
    fy = (y - grid.origin[1]) / grid.h
    i = np.floor(fx).astype(np.int64)
    j = np.floor(fy).astype(np.int64)
    ok = (i >= 0) & (i < grid.nx - 1) & (j >= 0) & (j < grid.ny - 1)
    if not np.all(ok):
        raise TraceError("trace outside domain")
    cid = grid.cell_index[j, i]
    if np.any(cid < 0):
        raise TraceError("trace outside domain")
    return cid, fx - i, fy - j


def _check_circle(grid: DomainGrid, center, radius: float, n: int):
    if n < 16:
        raise ValueError("at least 16 samples are required")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if float(grid.dist_to_boundary(center[0], center[1])) < radius + grid.h:
        raise TraceError("trace outside domain")


def circle_trace(u: DiscreteField, center, radius: float, n_samples: int = 128):
    """Bilinear samples of ``u`` at equispaced angles on a circle, re-projected to the target."""
    _check_circle(u.grid, center, radius, n_samples)
    x, y, _ = _circle_points(center, radius, n_samples)
    cid, xi, eta = _locate(u.grid, x, y)
    corners = u.grid.cell_corners[cid]
    v = u.values
    a, b, c = (arr[cid] for arr in u.coeffs)
    vals = v[corners[:, 0]] + xi[:, None] * a + eta[:, None] * b + (xi * eta)[:, None] * c
    return project(u.target, vals)


def circle_charge(u: DiscreteField, center, radius: float, n_samples: int | None = None) -> HomotopyCharge:
    n = n_samples or default_circle_samples(u.grid.h, radius)
    return loop_charge(u.target, circle_trace(u, center, radius, n))


def circle_gradient_norms(u: DiscreteField, center, radius: float, n_samples: int | None = None):
    """|Du| at equispaced points of a circle and the common arc-length weight.

    The derivative is that of the bilinear interpolant, i.e. the limit of
    central differences of interpolated values.
    """
    n = n_samples or default_circle_samples(u.grid.h, radius)
    _check_circle(u.grid, center, radius, n)
    x, y, _ = _circle_points(center, radius, n)
    cid, xi, eta = _locate(u.grid, x, y)
    g = np.sqrt(_grad_sq(u, cid, xi, eta))
    return g, TWO_PI * radius / n


def circle_energy_density(u: DiscreteField, center, radius: float, q: float, n_samples: int | None = None) -> float:
    """Integral of |Du|^q/q over the circle of given centre and radius."""
    g, ds = circle_gradient_norms(u, center, radius, n_samples)
    return float(np.sum(g ** q)) * ds / q


# --------------------------------------------------------------------------
# singular configurations


@dataclass(frozen=True)
class SingularityConfiguration:
    points: tuple
    separation_radius: float
    unresolved: tuple = ()

    def __post_init__(self):
        for _, q in self.points:
            if q.is_zero():
                raise ValueError("charges in a configuration must be nonzero")

    @property
    def locations(self):
        return [loc for loc, _ in self.points]

    @property
    def charges(self):
        return [q for _, q in self.points]

    @property
    def lams(self):
        return [q.lam for _, q in self.points]


def separation_radius(grid: DomainGrid, locations) -> float:
    if not locations:
        return math.inf
    best = math.inf
    for k, (x, y) in enumerate(locations):
        best = min(best, float(grid.dist_to_boundary(x, y)))
        for x2, y2 in locations[k + 1:]:
            best = min(best, math.hypot(x - x2, y - y2))
    return best


def make_configuration(grid: DomainGrid, points, unresolved=()) -> SingularityConfiguration:
    pts = tuple(((float(x), float(y)), q) for (x, y), q in points)
    return SingularityConfiguration(pts, separation_radius(grid, [p for p, _ in pts]), tuple(unresolved))


# --------------------------------------------------------------------------
# constructors


def _angle(grid: DomainGrid, center=(0.0, 0.0), nodes=None):
    xy = grid.node_xy if nodes is None else grid.node_xy[nodes]
    return np.arctan2(xy[:, 1] - center[1], xy[:, 0] - center[0])


def _circle_block(theta):
    return np.column_stack([np.cos(theta), np.sin(theta)])


def hedgehog(grid: DomainGrid, center=(0.0, 0.0), degree: int = 1) -> DiscreteField:
    """The circle-valued map ((x - c)/|x - c|)^degree sampled at the nodes."""
    from .manifold import CIRCLE
    return DiscreteField(grid, CIRCLE, _circle_block(degree * _angle(grid, center)))


def boundary_values(grid: DomainGrid, target: TargetManifold, spec: str) -> np.ndarray:
    """Boundary datum at the boundary nodes from a named generator.

    ``degree:<d>`` (circle), ``winding:<w1>,<w2>`` (torus), ``constant``, and
    ``wave:<amp>,<k>`` (smooth degree-zero data).
    """
    s = str(spec).strip().lower()
    name, _, rest = s.partition(":")
    th = _angle(grid, grid.center, grid.boundary_idx)
    nb = len(th)
    if name == "constant":
        out = np.zeros((nb, target.ambient_dim))
        if target.kind != "euclidean":
            out[:, 0::2] = 1.0
        return out
    try:
        args = [float(v) for v in rest.split(",")] if rest else []
    except ValueError as exc:
        raise ValueError(f"bad boundary parameters in {spec!r}") from exc
    if name == "degree" and len(args) == 1 and target.kind == "circle":
        d = int(args[0])
        if d != args[0]:
            raise ValueError("degree must be an integer")
        return _circle_block(d * th)
    if name == "winding" and len(args) == 2 and target.kind == "torus":
        w1, w2 = (int(a) for a in args)
        if (w1, w2) != tuple(args):
            raise ValueError("windings must be integers")
        return np.hstack([_circle_block(w1 * th), _circle_block(w2 * th)])
    if name == "wave" and len(args) == 2:
        amp, k = args
        phase = amp * np.sin(k * th)
        if target.kind == "euclidean":
            out = np.zeros((nb, target.ambient_dim))
            out[:, 0] = phase
            return out
        return np.hstack([_circle_block(phase)] * target.n_factors)
    raise ValueError(f"boundary generator {spec!r} does not fit target {target.name}")


def boundary_charge(grid: DomainGrid, target: TargetManifold, g: np.ndarray) -> HomotopyCharge:
    """Charge of the boundary datum along the outer boundary loop."""
    if target.kind == "euclidean":
        return HomotopyCharge(())
    outer = grid.boundary_loops()[0]
    pos = {int(n): k for k, n in enumerate(grid.boundary_idx)}
    return loop_charge(target, g[[pos[int(n)] for n in outer]])


# --------------------------------------------------------------------------
# snapshots


def write_snapshot(u: DiscreteField, path) -> None:
    """CSV ``x,y,inside,v1..v_nu`` with one row per node in row-major order."""
    grid = u.grid
    nu = u.target.ambient_dim
    header = "x,y,inside," + ",".join(f"v{k + 1}" for k in range(nu))
    lines = [header]
    idx = grid.index
    vals = u.values
    nan_row = ",".join(["nan"] * nu)
    for j in range(grid.ny):
        y = fmt_float(grid.ys[j])
        for i in range(grid.nx):
            k = idx[j, i]
            x = fmt_float(grid.xs[i])
            if k >= 0:
                lines.append(f"{x},{y},1," + ",".join(fmt_float(v) for v in vals[k]))
            else:
                lines.append(f"{x},{y},0,{nan_row}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path, grid: DomainGrid, target: TargetManifold) -> DiscreteField:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.shape[0] != grid.nx * grid.ny or data.shape[1] != 3 + target.ambient_dim:
        raise ValueError("snapshot does not match the grid")
    inside = data[:, 2].reshape(grid.ny, grid.nx) > 0.5
    if not np.array_equal(inside, grid.inside):
        raise ValueError("snapshot mask does not match the grid")
    vals = data[:, 3:].reshape(grid.ny, grid.nx, -1)[grid.inside]
    return DiscreteField(grid, target, vals)
