"""Singular, renormalized and configuration energies.

The singular energy of a boundary charge is the cheapest way of splitting it
into nonzero charges, each charge costing lambda^p / (p (2 pi)^(p-1)).  For
circle and torus targets the charges form an integer lattice, so the optimum
is found by enumeration.

The renormalized energy subtracts the logarithmic cost of the vortices from
the Dirichlet energy outside small disks and lets the disks shrink.  It is
computed two ways: directly on a ladder of radii, and as the far-field energy
plus a radial integral of circle energies.  Both ladders are extrapolated the
same way, so their agreement measures quadrature error only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Sequence

import mpmath
import numpy as np

from .field import (
    DiscreteField,
    DomainGrid,
    Region,
    SingularityConfiguration,
    annulus_region,
    boundary_charge,
    circle_charge,
    circle_energy_density,
    gradient_samples,
    perforate,
    perforated_region,
    region_energy,
    weak_lp_quasinorm,
)
from .manifold import TWO_PI, HomotopyCharge, TargetManifold, WindingError, lambda_of
from .textio import write_csv

TIE_RTOL = 1e-12


class ConfigurationError(ValueError):
    """Raised for singular configurations that cannot be evaluated."""


class HomotopySectorError(RuntimeError):
    """Raised when descent changes the charge carried by a hole."""


# --------------------------------------------------------------------------
# resolutions


@dataclass(frozen=True)
class Resolution:
    charges: tuple

    def __post_init__(self):
        cs = tuple(sorted(self.charges))
        if any(c.is_zero() for c in cs):
            raise ValueError("a resolution holds nonzero charges only")
        object.__setattr__(self, "charges", cs)

    def total(self, rank: int) -> HomotopyCharge:
        out = HomotopyCharge((0,) * rank)
        for c in self.charges:
            out = out + c
        return out

    def value(self, p: float) -> float:
        return sum(charge_cost(c, p) for c in self.charges)

    def __len__(self):
        return len(self.charges)

    def __str__(self):
        return "{" + ", ".join(str(c) for c in self.charges) + "}"


def charge_cost(q: HomotopyCharge, p: float) -> float:
    lam = q.lam
    return lam ** p / (p * TWO_PI ** (p - 1))


def _cost_mp(charges, p) -> mpmath.mpf:
    with mpmath.workdps(60):
        pm = mpmath.mpf(p)
        tot = mpmath.mpf(0)
        for c in charges:
            lam = 2 * mpmath.pi * mpmath.sqrt(sum(mpmath.mpf(w) ** 2 for w in c.windings))
            tot += lam ** pm / (pm * (2 * mpmath.pi) ** (pm - 1))
        return tot


def _candidates(total: HomotopyCharge):
    bound = max(1, total.l1)
    k = len(total.windings)
    cands = []
    for w in itertools.product(range(-bound, bound + 1), repeat=k):
        if any(w):
            cands.append(HomotopyCharge(w))
    return sorted(cands, key=lambda c: (c.lam, c.windings))


@lru_cache(maxsize=256)
def _enumerate(total: HomotopyCharge, p: float):
    """All resolutions whose value is within the tie tolerance of the optimum."""
    if total.is_zero():
        return 0.0, (Resolution(()),)
    cands = _candidates(total)
    k = len(total.windings)
    unit = sum(abs(w) for w in total.windings) * charge_cost(HomotopyCharge((1,) + (0,) * (k - 1)), p)
    best = [unit * (1 + 1e-9)]
    found = []

    def rec(start, remaining, acc, chosen):
        if acc > best[0] * (1 + TIE_RTOL):
            return
        if all(w == 0 for w in remaining):
            if chosen:
                found.append((acc, tuple(chosen)))
                best[0] = min(best[0], acc)
            return
        for idx in range(start, len(cands)):
            c = cands[idx]
            cost = charge_cost(c, p)
            if acc + cost > best[0] * (1 + TIE_RTOL):
                break  # candidates are sorted by cost
            rec(idx, tuple(r - w for r, w in zip(remaining, c.windings)), acc + cost, chosen + [c])

    rec(0, total.windings, 0.0, [])
    vbest = min(v for v, _ in found)
    near = [ch for v, ch in found if v <= vbest * (1 + 1e-9)]
    # settle near-ties in extended precision
    exact = [(_cost_mp(ch, p), ch) for ch in near]
    mbest = min(v for v, _ in exact)
    with mpmath.workdps(60):
        tied = [ch for v, ch in exact if abs(v - mbest) <= mpmath.mpf(10) ** -40 * (1 + abs(mbest))]
    res = sorted({Resolution(ch) for ch in tied}, key=lambda r: (len(r), [c.windings for c in r.charges]))
    return float(mbest), tuple(res)


def optimal_resolutions(total: HomotopyCharge, p: float) -> tuple:
    """Every minimal resolution, fewest charges first."""
    if p < 1:
        raise ValueError("p must be at least 1")
    return _enumerate(total, float(p))[1]


def minimal_resolution(total: HomotopyCharge, p: float):
    """(resolution, value) minimizing the summed charge cost; ties go to fewer charges, then lexicographic."""
    if p < 1:
        raise ValueError("p must be at least 1")
    value, res = _enumerate(total, float(p))
    return res[0], value


def singular_energy(total: HomotopyCharge, p: float) -> float:
    return minimal_resolution(total, p)[1]


def is_atomic(q: HomotopyCharge) -> bool:
    """A charge is atomic when splitting it never lowers the cost at p = 2."""
    return math.isclose(singular_energy(q, 2.0), q.lam ** 2 / (4 * math.pi), rel_tol=1e-12)


def h_term(lams: Sequence[float]) -> float:
    """Sum of lambda^2/(8 pi) (1 + log((2 pi/lambda)^2))."""
    out = 0.0
    for lam in lams:
        if not lam > 0:
            raise ValueError("trivial charge has no H-term")
        out += lam * lam / (8 * math.pi) * (1.0 + math.log((TWO_PI / lam) ** 2))
    return out


def h_term_expanded(lams: Sequence[float]) -> float:
    """Same quantity written as lambda^2/(8 pi) - lambda^2/(4 pi) log(lambda/(2 pi))."""
    return sum(lam * lam / (8 * math.pi) - lam * lam / (4 * math.pi) * math.log(lam / TWO_PI) for lam in lams)


@dataclass
class ContinuityReport:
    total: HomotopyCharge
    p_grid: list
    f: list
    resolutions: list
    lipschitz_bound: float
    max_slope: float

    @property
    def passed(self) -> bool:
        return self.max_slope <= self.lipschitz_bound * (1 + 1e-12)

    def rows(self):
        return [(p, f, str(r)) for p, f, r in zip(self.p_grid, self.f, self.resolutions)]


def check_p_continuity(total: HomotopyCharge, p_grid: Sequence[float], systole: float = TWO_PI) -> ContinuityReport:
    """Tabulate f(p) = (2 pi)^(p-1) p E_sg(p) and compare its slopes with the local Lipschitz bound."""
    ps = [float(p) for p in p_grid]
    if any(not 1.5 <= p <= 2.0 for p in ps):
        raise ValueError("p grid must lie in [1.5, 2]")
    f, res = [], []
    for p in ps:
        r, v = minimal_resolution(total, p)
        f.append(TWO_PI ** (p - 1) * p * v)
        res.append(r)
    m = max(f) if f else 0.0
    lip = max(abs(systole * math.log(systole)), abs(m * math.log(m)) if m > 0 else 0.0)
    slope = 0.0
    for i in range(len(ps)):
        for j in range(i + 1, len(ps)):
            if ps[i] != ps[j]:
                slope = max(slope, abs(f[i] - f[j]) / abs(ps[i] - ps[j]))
    return ContinuityReport(total, ps, f, res, lip, slope)


# --------------------------------------------------------------------------
# scalar kernels


def annulus_lower_bound(lam: float, sigma: float, rho: float, p: float) -> float:
    """Least p-energy of a map on the annulus sigma < |x - a| < rho whose circles carry length lam."""
    if not 0 <= sigma < rho:
        raise ValueError("need 0 <= sigma < rho")
    if lam == 0:
        return 0.0
    if p == 2.0:
        if sigma == 0:
            raise ValueError("divergent bound")
        return lam * lam / (4 * math.pi) * math.log(rho / sigma)
    return (rho ** (2 - p) - sigma ** (2 - p)) * lam ** p / (TWO_PI ** (p - 1) * p * (2 - p))


def taylor_young_gap(a, b, p):
    """(3-p)/2 b^p minus the left side a^p/p + a^(p-1)(b-a) + (1-1/p)(b-a)_+^p; float64, vectorized."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    p = np.asarray(p, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        apm1 = np.where(a == 0, np.where(p == 1, 1.0, 0.0), a ** (p - 1))
        lhs = a ** p / p + apm1 * (b - a) + (1 - 1 / p) * np.maximum(b - a, 0.0) ** p
    return (3 - p) / 2 * b ** p - lhs


def _taylor_young_gap_mp(a, b, p):
    with mpmath.workdps(50):
        a, b, p = mpmath.mpf(a), mpmath.mpf(b), mpmath.mpf(p)
        apm1 = mpmath.mpf(1) if (a == 0 and p == 1) else a ** (p - 1)
        lhs = a ** p / p + apm1 * (b - a) + (1 - 1 / p) * max(b - a, 0) ** p
        return (3 - p) / 2 * b ** p - lhs


def count_taylor_young_violations(a, b, p, tol: float = 1e-12) -> int:
    """Number of triples breaking the inequality; near-ties are re-checked in extended precision."""
    gap = taylor_young_gap(a, b, p)
    scale = 1.0 + np.asarray(b, float) ** np.asarray(p, float)
    close = np.nonzero(gap < tol * scale)[0]
    bad = 0
    for k in close:
        g = _taylor_young_gap_mp(float(a[k]), float(b[k]), float(p[k]))
        if g < -mpmath.mpf(10) ** -35 * (1 + abs(mpmath.mpf(float(b[k])))):
            bad += 1
    return bad


def hanner_predicate_holds(p: float, x: float) -> bool:
    """For p in (1, 2] and x >= 0: 2 >= (1+x)^p + |1-x|^p only when x = 0."""
    if x == 0:
        return True
    val = (1 + x) ** p + abs(1 - x) ** p - 2.0
    if val > 1e-12:
        return True
    # precision must resolve 1 + x
    with mpmath.workdps(30 + int(2 * max(0.0, -math.log10(x)))):
        pm, xm = mpmath.mpf(p), mpmath.mpf(x)
        return (1 + xm) ** pm + abs(1 - xm) ** pm - 2 > 0


def hanner_grid_violations(ps: Sequence[float], xs: Sequence[float]) -> int:
    return sum(0 if hanner_predicate_holds(p, x) else 1 for p in ps for x in xs)


def shifted_singularity_integral(a: float, p: float) -> float:
    """Integral over the unit disk of |1/|x| - 1/|x - a||^p for a point (a, 0) with 0 < a < 1/2.

    Polar quadrature about the origin outside a small disk around a, and
    polar quadrature about a inside it, each with the algebraic weight
    r^(1-p) taken out so the inner integrands stay bounded.
    """
    from scipy import integrate

    if not 0 < a < 0.5:
        raise ValueError("need 0 < a < 1/2")
    s = a / 2  # radius of the disk handled in coordinates centred at a

    def inner_about_origin(theta):
        c, sn = math.cos(theta), math.sin(theta)

        def f(r):
            d = math.hypot(r * c - a, r * sn)
            return abs(1.0 - r / d) ** p

        # chord of the ray through the small disk
        bq = a * c
        disc = bq * bq - (a * a - s * s)
        pieces = [(0.0, 1.0)]
        if disc > 0:
            r1, r2 = bq - math.sqrt(disc), bq + math.sqrt(disc)
            if r2 > 0:
                pieces = [(0.0, max(r1, 0.0)), (r2, 1.0)]
        tot = 0.0
        for lo, hi in pieces:
            if hi <= lo:
                continue
            if lo == 0.0:
                v, _ = integrate.quad(f, 0.0, hi, weight="alg", wvar=(1 - p, 0), limit=200)
            else:
                v, _ = integrate.quad(lambda r: r * r ** (-p) * f(r), lo, hi, limit=200)
            tot += v
        return tot

    def inner_about_a(theta):
        c, sn = math.cos(theta), math.sin(theta)

        def f(r):
            d = math.hypot(a + r * c, r * sn)
            return abs(r / d - 1.0) ** p

        v, _ = integrate.quad(f, 0.0, s, weight="alg", wvar=(1 - p, 0), limit=200)
        return v

    edge = math.asin(s / a)
    outer, _ = integrate.quad(inner_about_origin, -math.pi, math.pi, points=[-edge, 0.0, edge], limit=400)
    near, _ = integrate.quad(inner_about_a, -math.pi, math.pi, points=[0.0], limit=400)
    return outer + near


def shifted_singularity_bounds(a: float, p: float):
    """Lower and upper bounds for the shifted-singularity integral when |a| < 1/2."""
    lo = 2 ** (1 - p) * 3 ** (p - 2) * math.pi * a ** (2 - p) / (2 - p)
    hi = 2 ** 5 * math.pi * a ** (2 - p) / (2 - p)
    return lo, hi


# --------------------------------------------------------------------------
# renormalized energies


def _validate(u: DiscreteField, sing: SingularityConfiguration):
    if not sing.points:
        raise ConfigurationError("invalid configuration: no charges")
    h = u.grid.h
    if not sing.separation_radius > 4 * h:
        raise ConfigurationError("invalid configuration: separation radius below 4h")


def radius_ladder(u: DiscreteField, sing: SingularityConfiguration, sigma: float | None = None):
    h = u.grid.h
    if sigma is None:
        sigma = min(sing.separation_radius / 2 - 2 * h, 0.5)
    if not sigma >= 4 * h:
        raise ConfigurationError("invalid configuration: disks too small for the grid")
    ladder = [sigma]
    while ladder[-1] / 2 >= 4 * h:
        ladder.append(ladder[-1] / 2)
    return ladder


def extrapolate(values: Sequence[float]):
    """Limit of a sequence sampled at halving radii, fitted as E0 + c rho^alpha on the last three values.

    Returns (estimate, alpha or None); the last value is returned unchanged
    when the fit is not trustworthy.
    """
    if len(values) < 3:
        return values[-1], None
    e1, e2, e3 = values[-3:]
    d1, d2 = e2 - e1, e3 - e2
    if d2 == 0.0:
        return e3, None
    ratio = d1 / d2
    if not ratio > 0:
        return e3, None
    alpha = math.log2(ratio)
    if not 0.25 <= alpha <= 4.0:
        return e3, None
    return e3 + d2 / (2 ** alpha - 1), alpha


def _log_cost(lams, rho):
    return sum(l * l for l in lams) / (4 * math.pi) * math.log(1.0 / rho)


def _gauss_legendre(lo, hi, n_panels, order=4):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n_panels + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mids[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass
class RenormalizedDetail:
    radii: list
    limit_ladder: list
    integral_ladder: list
    limit: float
    integral: float
    alpha_limit: float | None
    alpha_integral: float | None

    @property
    def raw_smallest(self) -> float:
        """Value at the smallest radius; a lower bound on the limit since the ladder is non-increasing in rho."""
        return self.limit_ladder[-1]

    def as_dict(self) -> dict:
        return {
            "radii": self.radii,
            "limit_ladder": self.limit_ladder,
            "integral_ladder": self.integral_ladder,
            "limit": self.limit,
            "integral": self.integral,
            "raw_smallest_radius": self.raw_smallest,
        }


def renormalized_energy_detail(u: DiscreteField, sing: SingularityConfiguration, sigma: float | None = None,
                               routes=("limit", "integral")) -> RenormalizedDetail:
    _validate(u, sing)
    h = u.grid.h
    locs = sing.locations
    lams = sing.lams
    radii = radius_ladder(u, sing, sigma)
    lim_vals, int_vals = [], []
    if "limit" in routes:
        for rho in radii:
            reg = perforated_region(locs, rho)
            lim_vals.append(region_energy(u, 2.0, reg) - _log_cost(lams, rho))
    if "integral" in routes:
        sig = radii[0]
        far = region_energy(u, 2.0, perforated_region(locs, sig))
        base = far - _log_cost(lams, sig)
        acc = 0.0
        int_vals.append(base)
        for k in range(1, len(radii)):
            lo, hi = radii[k], radii[k - 1]
            n_panels = max(1, int(math.ceil((hi - lo) / (h / 2))))
            nodes, weights = _gauss_legendre(lo, hi, n_panels)
            for (cx, cy), lam in zip(locs, lams):
                dens = np.array([circle_energy_density(u, (cx, cy), r, 2.0) for r in nodes])
                acc += float(np.sum(weights * (dens - lam * lam / (4 * math.pi * nodes))))
            int_vals.append(base + acc)
    lim, a_lim = extrapolate(lim_vals) if lim_vals else (math.nan, None)
    itg, a_int = extrapolate(int_vals) if int_vals else (math.nan, None)
    return RenormalizedDetail(radii, lim_vals, int_vals, lim, itg, a_lim, a_int)


def renormalized_energy(u: DiscreteField, sing: SingularityConfiguration, route: str = "limit") -> float:
    """Finite part of the Dirichlet energy as the vortex disks shrink (route ``limit`` or ``integral``)."""
    route = route.lower()
    if route not in ("limit", "integral"):
        raise ValueError("route must be 'limit' or 'integral'")
    d = renormalized_energy_detail(u, sing, routes=(route,))
    return d.limit if route == "limit" else d.integral


def p_renormalized_energy(u: DiscreteField, sing: SingularityConfiguration, p: float) -> float:
    """p-energy minus the divergent vortex cost sum lambda^p / ((2 pi)^(p-1) p (2-p)).

    Evaluated as the energy outside disks of radius rho minus the cost of the
    complementary annuli, extrapolated to rho = 0; the discrete energy inside
    a core is not trusted.
    """
    if not 1.0 <= p < 2.0:
        raise ValueError("p must lie in [1, 2)")
    if not sing.points:
        return p_energy_plain(u, p)
    _validate(u, sing)
    lams = sing.lams
    vals = []
    for rho in radius_ladder(u, sing):
        e = region_energy(u, p, perforated_region(sing.locations, rho))
        cost = sum(l ** p for l in lams) * (1 - rho ** (2 - p)) / (TWO_PI ** (p - 1) * p * (2 - p))
        vals.append(e - cost)
    return extrapolate(vals)[0]


def p_energy_plain(u: DiscreteField, p: float) -> float:
    return region_energy(u, p, None)


def config_energy(grid: DomainGrid, g, sing: SingularityConfiguration, rho: float, target: TargetManifold,
                  opts=None, return_field: bool = False):
    """Least Dirichlet energy outside disks of radius rho around the points, minus their logarithmic cost.

    The holes have free boundaries; descent starts in the prescribed homotopy
    sector and the charges are re-read afterwards.
    """
    from .solver import SolverOptions, descend, phase_field

    if not sing.points:
        raise ConfigurationError("invalid configuration: no charges")
    if not 0 < rho < sing.separation_radius:
        raise ConfigurationError("invalid configuration: rho must lie below the separation radius")
    h = grid.h
    pts = sorted(sing.points, key=lambda pq: (pq[0][0], pq[0][1], pq[1].windings))
    for i, ((x, y), _) in enumerate(pts):
        if float(grid.dist_to_boundary(x, y)) <= rho + 3 * h:
            raise ConfigurationError("invalid configuration: disk leaves the domain")
        for (x2, y2), _ in pts[i + 1:]:
            if math.hypot(x - x2, y - y2) <= 2 * rho + 2 * h:
                raise ConfigurationError("invalid configuration: disks overlap")
    total = boundary_charge(grid, target, np.asarray(g, float))
    acc = HomotopyCharge((0,) * target.n_factors)
    for _, q in pts:
        acc = acc + q
    if acc != total:
        raise ConfigurationError("invalid configuration: charges do not add up to the boundary charge")
    pgrid = perforate(grid, [(x, y, rho) for (x, y), _ in pts])
    init = phase_field(pgrid, target, g, pts)
    opts = opts or SolverOptions(max_iters=3000, grad_tol=1e-3, refresh=0)
    res = descend(init, 2.0, opts)
    u = res.field
    for (x, y), q in pts:
        try:
            got = circle_charge(u, (x, y), rho + 2 * h)
        except WindingError as exc:
            raise HomotopySectorError("left homotopy sector") from exc
        if got != q:
            raise HomotopySectorError("left homotopy sector")
    dx, dy, w = pgrid.operators
    gx = dx @ u.values
    gy = dy @ u.values
    energy = 0.5 * float(np.sum(w * np.sum(gx * gx + gy * gy, axis=1)))
    value = energy - _log_cost([q.lam for _, q in pts], rho)
    return (value, res) if return_field else value


# --------------------------------------------------------------------------
# reports


@dataclass
class BoundRow:
    name: str
    lhs: float
    rhs: float
    slack: float
    informational: bool = False

    @property
    def passed(self) -> bool:
        if any(map(math.isnan, (self.lhs, self.rhs))):
            return False
        return self.lhs <= self.rhs + self.slack

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "pass": self.passed, "informational": self.informational}


def write_certificates(path, rows: Sequence[BoundRow]) -> None:
    write_csv(path, ["bound_name", "lhs", "rhs", "slack", "pass"],
              [(r.name, r.lhs, r.rhs, r.slack, r.passed) for r in rows])


@dataclass
class EnergyReport:
    p: float
    total_energy: float
    e_sg_p: float
    e_sg_2: float
    e_ren_limit: float | None
    e_ren_integral: float | None
    e_ren_p: float | None
    h_term: float | None
    weak_lp_quasinorm: float
    per_singularity: list
    bounds: list
    boundary_charge: HomotopyCharge | None = None
    unresolved: list = dc_field(default_factory=list)
    notes: list = dc_field(default_factory=list)
    solver: dict | None = None
    e_ren_raw: float | None = None

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "total_energy": self.total_energy,
            "e_sg_p": self.e_sg_p,
            "e_sg_2": self.e_sg_2,
            "e_ren_limit": self.e_ren_limit,
            "e_ren_integral": self.e_ren_integral,
            "e_ren_raw_smallest_radius": self.e_ren_raw,
            "e_ren_p": self.e_ren_p,
            "h_term": self.h_term,
            "weak_lp_quasinorm": self.weak_lp_quasinorm,
            "boundary_charge": None if self.boundary_charge is None else list(self.boundary_charge.windings),
            "per_singularity": [
                {"x": loc[0], "y": loc[1], "charge": list(q.windings), "lambda": lam}
                for loc, q, lam in self.per_singularity
            ],
            "unresolved": [list(x) for x in self.unresolved],
            "bounds": [b.as_dict() for b in self.bounds],
            "solver": self.solver,
            "notes": list(self.notes),
        }


def local_bound_rows(u: DiscreteField, sing: SingularityConfiguration, p: float) -> list:
    """Circle and annulus inequalities around each detected singularity."""
    rows = []
    h = u.grid.h
    systole = u.target.systole
    for (cx, cy), q in sing.points:
        lam = q.lam
        reach = min(float(u.grid.dist_to_boundary(cx, cy)), sing.separation_radius) / 2 - 2 * h
        if reach < 8 * h:
            continue
        r = reach / 2
        try:
            trace_q = circle_charge(u, (cx, cy), r)
        except Exception:
            continue
        lam_t = trace_q.lam
        dens_p = circle_energy_density(u, (cx, cy), r, p)
        dens_2 = circle_energy_density(u, (cx, cy), r, 2.0)
        tag = f"({cx:.4f},{cy:.4f})"
        rows.append(BoundRow(f"circle lower bound {tag}", lam_t ** p / (p * (TWO_PI * r) ** (p - 1)), dens_p,
                             0.05 * dens_p))
        if lam_t > 0:
            lhs = dens_p - lam_t ** p / (p * (TWO_PI * r) ** (p - 1))
            rhs = (TWO_PI * r / lam_t) ** (2 - p) * (dens_2 - lam_t ** 2 / (4 * math.pi * r))
            rows.append(BoundRow(f"hoelder circle estimate {tag}", lhs, rhs, 0.05 * dens_p))
        g, ds = _circle_grad(u, (cx, cy), r)
        eta = lam_t
        lhs = eta ** p / (p * (TWO_PI * r) ** (p - 1)) + (1 - 1 / p) * float(
            np.sum(np.maximum(g - eta / (TWO_PI * r), 0.0) ** p)) * ds
        rows.append(BoundRow(f"mixed circle inequality {tag}", lhs, (3 - p) * p / 2 * dens_p, 0.05 * dens_p))
        sig, rho = reach / 4, reach
        e_ann = region_energy(u, p, annulus_region((cx, cy), sig, rho))
        bound = annulus_lower_bound(lam, sig, rho, p)
        rows.append(BoundRow(f"annulus lower bound {tag}", bound, e_ann, 0.1 * bound))
        sys_bound = annulus_lower_bound(systole, sig, rho, p) if math.isfinite(systole) else math.inf
        # below the systole bound (with slack for discretization) the traces must be trivial
        triggered = e_ann < 0.9 * sys_bound
        ok = (not triggered) or trace_q.is_zero()
        rows.append(BoundRow(f"triviality certificate {tag}", 0.0 if ok else 1.0, 0.0, 0.0))
    return rows


def _circle_grad(u, center, r):
    from .field import circle_gradient_norms
    return circle_gradient_norms(u, center, r)


def marcinkiewicz_row(u: DiscreteField, sing: SingularityConfiguration, m: int = 4):
    g, w = gradient_samples(u, m)
    wl2 = weak_lp_quasinorm(g, w, 2.0, t_max=1.0 / (4 * u.grid.h))
    lhs = sum(l * l for l in sing.lams) / (4 * math.pi)
    return wl2, BoundRow("weak-L2 lower bound", lhs, wl2, 0.05 * max(lhs, 1e-300))


def energy_report(u: DiscreteField, p: float, solver=None, delta: float | None = None,
                  sing: SingularityConfiguration | None = None) -> EnergyReport:
    """Every functional of one (field, p) pair together with the local inequality checks."""
    from .ballgrowth import detect_singularities, growth_bound_rows

    notes = []
    target = u.target
    if target.kind == "euclidean":
        total = HomotopyCharge(())
    else:
        total = boundary_charge(u.grid, target, u.boundary_data)
    e_tot = region_energy(u, p, None)
    e_sg_p = singular_energy(total, p)
    e_sg_2 = singular_energy(total, 2.0)
    if sing is None:
        sing = detect_singularities(u)
    per = [(loc, q, q.lam) for loc, q in sing.points]
    e_lim = e_int = e_p = e_raw = hterm = None
    bounds = []
    if not sing.points:
        notes.append("renormalized energy skipped: no charges")
    else:
        hterm = h_term(sing.lams)
        try:
            det = renormalized_energy_detail(u, sing)
            e_lim, e_int, e_raw = det.limit, det.integral, det.raw_smallest
            e_p = p_renormalized_energy(u, sing, p)
        except ConfigurationError as exc:
            notes.append(f"renormalized energy skipped: {exc}")
        bounds.extend(local_bound_rows(u, sing, p))
    wl2, row = marcinkiewicz_row(u, sing)
    if sing.points:
        bounds.append(row)
    if sing.unresolved:
        notes.append(f"{len(sing.unresolved)} unresolved core(s) reported separately")
    if delta is not None and sing.points:
        try:
            bounds.extend(growth_bound_rows(u, p, delta, sing))
        except Exception as exc:  # recorded, never fatal
            notes.append(f"ball growth skipped: {exc}")
    sdict = None
    if solver is not None:
        sdict = {"iterations": solver.iterations, "flag": solver.flag, "grad_norm": solver.grad_norm,
                 "status": solver.status}
    return EnergyReport(p, e_tot, e_sg_p, e_sg_2, e_lim, e_int, e_p, hterm, wl2, per, bounds, total,
                        [tuple(x) for x in sing.unresolved], notes, sdict, e_raw)
