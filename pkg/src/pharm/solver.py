"""Minimizers of the p-Dirichlet energy with fixed boundary values.

Descent is a preconditioned projected gradient method: the tangential part of
the energy gradient is smoothed by the inverse of the grid Laplacian on free
nodes, the iterate moves along that direction and is re-projected to the
target node by node, and the step length comes from Armijo backtracking.
Vortex cores make |Du| unbounded, so the density is regularized as
((|Du|^2 + eps^2)^(p/2))/p.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .field import (
    DiscreteField,
    DomainGrid,
    boundary_charge,
)
from .manifold import TWO_PI, HomotopyCharge, ProjectionError, TargetManifold, project

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Raised when descent produces a non-finite energy."""


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 4000
    grad_tol: float = 1e-4
    initial_step: float = 1.0
    backtracking_factor: float = 0.5
    armijo_c: float = 1e-4
    eps: float = 1e-6
    refresh: int = 25

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0 < self.backtracking_factor < 1:
            raise ValueError("backtracking_factor must lie in (0, 1)")
        if not 0 < self.armijo_c < 0.5:
            raise ValueError("armijo_c must lie in (0, 0.5)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> "SolverOptions":
        d = dict(d or {})
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown solver options: {sorted(bad)}")
        return cls(**d)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class ContinuationLadder:
    exponents: tuple
    options: tuple = ()

    def __post_init__(self):
        ex = tuple(float(p) for p in self.exponents)
        if not ex:
            raise ValueError("ladder needs at least one exponent")
        if any(not 1.0 < p < 2.0 for p in ex):
            raise ValueError("ladder exponents must lie in (1, 2)")
        if any(b <= a for a, b in zip(ex, ex[1:])):
            raise ValueError("ladder exponents must be strictly increasing")
        opts = tuple(self.options) or (SolverOptions(),)
        if len(opts) == 1:
            opts = opts * len(ex)
        if len(opts) != len(ex):
            raise ValueError("need one set of solver options or one per exponent")
        object.__setattr__(self, "exponents", ex)
        object.__setattr__(self, "options", opts)

    def __iter__(self):
        return iter(zip(self.exponents, self.options))

    def __len__(self):
        return len(self.exponents)


@dataclass
class SolverResult:
    field: DiscreteField
    p: float
    energy: float
    iterations: int
    grad_norm: float
    converged: bool
    flag: str
    log: list = dc_field(default_factory=list)

    @property
    def status(self) -> str:
        return "locally minimizing candidate" if self.converged else f"not converged ({self.flag})"

    def log_rows(self):
        return [("iter", "energy", "grad_norm", "step")] + [tuple(r) for r in self.log]


# --------------------------------------------------------------------------
# linear algebra


@lru_cache(maxsize=8)
def _free_factor(grid: DomainGrid):
    """LU factors of the free-node block of the grid Laplacian."""
    K = grid.stiffness
    free = grid.free_idx
    Kff = K[free][:, free].tocsc()
    shift = 1e-12 * float(Kff.diagonal().mean())
    return splu((Kff + shift * sp.identity(len(free), format="csc")).tocsc())


def _weighted_factor(grid: DomainGrid, weights: np.ndarray):
    dx, dy, w = grid.operators
    wm = sp.diags(w * weights)
    K = (dx.T @ wm @ dx + dy.T @ wm @ dy).tocsr()
    free = grid.free_idx
    Kff = K[free][:, free].tocsc()
    shift = 1e-12 * float(Kff.diagonal().mean())
    return splu((Kff + shift * sp.identity(len(free), format="csc")).tocsc())


class _Energy:
    """Regularized discrete energy and its gradient on one grid."""

    def __init__(self, grid: DomainGrid, p: float, eps: float):
        self.dx, self.dy, self.w = grid.operators
        self.p = p
        self.eps2 = eps * eps

    def value(self, u):
        gx = self.dx @ u
        gy = self.dy @ u
        s = np.sum(gx * gx + gy * gy, axis=1) + self.eps2
        return float(np.sum(self.w * s ** (self.p / 2))) / self.p

    def value_grad(self, u):
        gx = self.dx @ u
        gy = self.dy @ u
        s = np.sum(gx * gx + gy * gy, axis=1) + self.eps2
        e = float(np.sum(self.w * s ** (self.p / 2))) / self.p
        coef = self.w * s ** (self.p / 2 - 1)
        grad = self.dx.T @ (coef[:, None] * gx) + self.dy.T @ (coef[:, None] * gy)
        return e, grad, s


def _tangential(target: TargetManifold, u, g):
    if target.kind == "euclidean":
        return g
    k = target.n_factors
    ub = u.reshape(len(u), k, 2)
    gb = g.reshape(len(g), k, 2)
    dot = np.sum(ub * gb, axis=-1, keepdims=True)
    return (gb - dot * ub).reshape(g.shape)


def descend(init: DiscreteField, p: float, opts: SolverOptions) -> SolverResult:
    """Projected preconditioned descent for p in (1, 2] from ``init``."""
    grid = init.grid
    target = init.target
    if not 1.0 < p <= 2.0:
        raise ValueError("p must lie in (1, 2]")
    if opts.eps > 1e-8 / grid.h ** 2:
        raise ValueError("eps is too large for this grid")
    free = grid.free_idx
    energy = _Energy(grid, p, opts.eps)
    u = np.array(init.values)
    e, grad, s = energy.value_grad(u)
    if not math.isfinite(e):
        raise SolverError("divergence")
    h2 = grid.h ** 2
    lu = _free_factor(grid)
    alpha_prev = opts.initial_step
    history = []
    flag = "max_iters"
    converged = False
    gnorm = math.inf
    it = 0
    flat = 0
    for it in range(opts.max_iters + 1):
        t = _tangential(target, u, grad)[free]
        gnorm = float(np.max(np.abs(t))) / h2 if t.size else 0.0
        if gnorm <= opts.grad_tol:
            converged = True
            flag = "converged"
            break
        if it == opts.max_iters:
            break
        if p < 2.0 and opts.refresh and it % opts.refresh == 0 and it > 0:
            cw = (s ** (p / 2 - 1)).reshape(-1, 4).mean(axis=1)
            lu = _weighted_factor(grid, np.repeat(cw, 4))
        d = -lu.solve(t)
        slope = float(np.sum(t * d))
        if slope >= 0:
            d = -t
            slope = -float(np.sum(t * t))
        alpha = min(opts.initial_step, 2.0 * alpha_prev)
        accepted = False
        while alpha >= 1e-14:
            trial = u.copy()
            try:
                trial[free] = project(target, u[free] + alpha * d)
            except ProjectionError:
                alpha *= opts.backtracking_factor
                continue
            e_new = energy.value(trial)
            if not math.isfinite(e_new):
                raise SolverError("divergence")
            if e_new <= e + opts.armijo_c * alpha * slope:
                accepted = True
                break
            alpha *= opts.backtracking_factor
        if not accepted:
            flag = "stalled"
            break
        if e_new > e:
            raise SolverError("energy increased on an accepted step")
        flat = flat + 1 if e - e_new <= 1e-14 * max(1.0, abs(e)) else 0
        u = trial
        alpha_prev = alpha
        e, grad, s = energy.value_grad(u)
        history.append((it + 1, e, gnorm, alpha))
        if flat >= 10:
            flag = "stalled"
            break
    out = init.with_values(u)
    return SolverResult(out, p, e, it, gnorm, converged, flag, history)


# --------------------------------------------------------------------------
# initialization


def harmonic_extension(grid: DomainGrid, bvals) -> np.ndarray:
    """Componentwise discrete harmonic extension of boundary values to every inside node."""
    bvals = np.asarray(bvals, float)
    squeeze = bvals.ndim == 1
    if squeeze:
        bvals = bvals[:, None]
    K = grid.stiffness
    free = grid.free_idx
    bidx = grid.boundary_idx
    out = np.zeros((grid.n_inside, bvals.shape[1]))
    out[bidx] = bvals
    rhs = -(K[free][:, bidx] @ bvals)
    out[free] = _free_factor(grid).solve(rhs)
    return out[:, 0] if squeeze else out


def unit_splitting(total: HomotopyCharge) -> list:
    """Decompose a charge into signed unit charges, one per winding."""
    out = []
    k = len(total.windings)
    for f, w in enumerate(total.windings):
        e = [0] * k
        e[f] = 1 if w > 0 else -1
        out.extend([HomotopyCharge(tuple(e))] * abs(w))
    return out


def default_points(grid: DomainGrid, total: HomotopyCharge, spread: float = 0.5) -> list:
    units = unit_splitting(total)
    if len(units) == 1:
        return [(grid.center, units[0])]
    cx, cy = grid.center
    return [((cx + spread * math.cos(TWO_PI * j / len(units)), cy + spread * math.sin(TWO_PI * j / len(units))), q)
            for j, q in enumerate(units)]


def phase_field(grid: DomainGrid, target: TargetManifold, g, points) -> DiscreteField:
    """Field exp(i(sum of vortex phases + harmonic correction)) matching g on the boundary.

    The correction is the harmonic extension of the boundary phase left after
    removing the vortex phases; it exists when the charges sum to that of g.
    """
    g = np.asarray(g, float)
    xy = grid.node_xy
    bidx = grid.boundary_idx
    pos = np.empty(grid.n_inside, dtype=np.int64)
    pos[bidx] = np.arange(len(bidx))
    blocks = []
    for f in range(target.n_factors):
        theta = np.zeros(grid.n_inside)
        for (ax, ay), q in points:
            w = q.windings[f]
            if w:
                theta += w * np.arctan2(xy[:, 1] - ay, xy[:, 0] - ax)
        gb = g[:, 2 * f:2 * f + 2]
        resid = np.arctan2(gb[:, 1], gb[:, 0]) - theta[bidx]
        psi_b = np.empty(len(bidx))
        for loop in grid.boundary_loops():
            r = resid[pos[loop]]
            un = np.unwrap(r)
            closing = np.angle(np.exp(1j * (r[0] - r[-1])))
            if abs(un[-1] + closing - un[0]) > 1e-6:
                raise ValueError("point charges do not match the boundary charge")
            psi_b[pos[loop]] = un
        psi = harmonic_extension(grid, psi_b)
        ang = theta + psi
        blocks.append(np.column_stack([np.cos(ang), np.sin(ang)]))
    vals = np.hstack(blocks)
    vals[bidx] = g
    return DiscreteField(grid, target, vals, g)


def initial_field(grid: DomainGrid, target: TargetManifold, g, seed: int | None = None,
                  points=None, perturbation: float = 0.0) -> DiscreteField:
    """Starting map in the homotopy sector of ``g``.

    Nonzero total charge starts from vortex phases at ``points`` (unit charges
    near the centre by default); zero charge starts from the projected
    harmonic extension.  ``perturbation`` adds seeded noise before projection.
    """
    g = np.asarray(g, float)
    if target.kind == "euclidean":
        vals = harmonic_extension(grid, g)
        return DiscreteField(grid, target, vals, g)
    total = boundary_charge(grid, target, g)
    if points is None and not total.is_zero():
        points = default_points(grid, total)
    if points:
        u = phase_field(grid, target, g, points)
    else:
        vals = harmonic_extension(grid, g)
        try:
            blocks = vals.reshape(len(vals), target.n_factors, 2)
            if np.min(np.linalg.norm(blocks, axis=-1)) < 1e-3:
                raise ProjectionError("ambiguous projection")
            vals = project(target, vals)
            vals[grid.boundary_idx] = g
            u = DiscreteField(grid, target, vals, g)
        except ProjectionError:
            u = phase_field(grid, target, g, [])
    if perturbation > 0:
        rng = np.random.default_rng(seed)
        vals = np.array(u.values)
        free = grid.free_idx
        vals[free] = project(target, vals[free] + perturbation * rng.standard_normal((len(free), target.ambient_dim)))
        u = u.with_values(vals)
    return u


# --------------------------------------------------------------------------
# public entry points


def solve_p_harmonic(grid: DomainGrid, g, p: float, init: DiscreteField, opts: SolverOptions | None = None) -> SolverResult:
    opts = opts or SolverOptions()
    if not 1.0 < p < 2.0:
        raise ValueError("p must lie in (1, 2)")
    if init.grid is not grid:
        raise ValueError("initial field lives on a different grid")
    if not np.array_equal(init.values[grid.boundary_idx], np.asarray(g, float)):
        raise ValueError("initial field does not respect the boundary data")
    res = descend(init, p, opts)
    log.info("p=%.4g: %s after %d iterations, energy %.10g, grad %.3g", p, res.flag, res.iterations,
             res.energy, res.grad_norm)
    return res


def minimize_p_harmonic(grid: DomainGrid, g, p: float, init: DiscreteField, opts: SolverOptions | None = None) -> DiscreteField:
    """Locally minimizing candidate of the p-energy with boundary values ``g``."""
    res = solve_p_harmonic(grid, g, p, init, opts)
    if not res.converged:
        warnings.warn(f"solver stopped without meeting the tolerance ({res.flag})", RuntimeWarning, stacklevel=2)
    return res.field


def run_ladder(grid: DomainGrid, g, ladder: ContinuationLadder, init: DiscreteField | None = None,
               target: TargetManifold | None = None, seed: int | None = None, reports: bool = True,
               delta: float | None = None):
    """Warm-started continuation in p; returns (p, field, report) per ladder step.

    ``results`` of the individual solves are attached to the reports under
    ``solver``; pass ``reports=False`` to get ``SolverResult`` objects instead.
    """
    from .energetics import energy_report

    if init is None:
        if target is None:
            raise ValueError("need an initial field or a target")
        init = initial_field(grid, target, g, seed=seed)
    out = []
    cur = init
    for p, opts in ladder:
        res = solve_p_harmonic(grid, g, p, cur, opts)
        cur = res.field
        if reports:
            out.append((p, cur, energy_report(cur, p, solver=res, delta=delta)))
        else:
            out.append((p, cur, res))
    return out
