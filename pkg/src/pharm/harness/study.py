"""Continuation studies: ladder, energies, ball growth, diagnostics and persistence."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from ..ballgrowth import GrowthError, detect_singularities, grow_balls, growth_bound_rows
from ..energetics import (
    BoundRow,
    ConfigurationError,
    HomotopySectorError,
    config_energy,
    energy_report,
    write_certificates,
)
from ..field import (
    boundary_charge,
    disks_region,
    integrate_gradient,
    make_configuration,
    perforated_region,
    region_energy,
    write_snapshot,
)
from ..solver import initial_field, run_ladder, solve_p_harmonic
from ..textio import write_csv, write_json
from .config import StudyConfig

log = logging.getLogger(__name__)

NARROW_RADII = (0.05, 0.1, 0.2)
STRONG_RADIUS = 0.2


def ptag(p: float) -> str:
    return f"{p:g}"


def richardson(ps, values):
    """Value at p = 2 of the polynomial through the last (up to three) points, in x = 2 - p."""
    xs = [2.0 - p for p in ps][-3:]
    ys = list(values)[-3:]
    est = 0.0
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        w = 1.0
        for j, xj in enumerate(xs):
            if j != i:
                w *= (0.0 - xj) / (xi - xj)
        est += w * yi
    return est


# --------------------------------------------------------------------------
# ladder


def point_seeds(seed: int, n: int) -> list:
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(n)]


def solve_ladder(cfg: StudyConfig, grid, g, parallel: bool = False) -> list:
    """SolverResult per ladder exponent; warm-started unless ``parallel``."""
    target = cfg.manifold()
    ladder = cfg.continuation()
    if not parallel:
        init = initial_field(grid, target, g, seed=cfg.seed, perturbation=cfg.perturbation)
        return [res for _, _, res in run_ladder(grid, g, ladder, init=init, reports=False)]
    seeds = point_seeds(cfg.seed, len(ladder))

    def one(k):
        p, opts = ladder.exponents[k], ladder.options[k]
        init = initial_field(grid, target, g, seed=seeds[k], perturbation=cfg.perturbation)
        return solve_p_harmonic(grid, g, p, init, opts)

    with ThreadPoolExecutor() as pool:
        return list(pool.map(one, range(len(ladder))))


# --------------------------------------------------------------------------
# diagnostics


def narrow_rows(u, p, sing, limit_mass):
    total = (2 - p) * region_energy(u, p, None)
    rows = []
    for r in NARROW_RADII:
        if sing.points:
            reg = disks_region([(x, y, r) for x, y in sing.locations])
            mass = (2 - p) * region_energy(u, p, reg)
        else:
            mass = 0.0
        frac = mass / total if total > 0 else 0.0
        flim = mass / limit_mass if limit_mass > 0 else 0.0
        rows.append({"p": p, "r": r, "mass": mass, "total": total, "fraction": frac, "fraction_of_limit": flim})
    return rows


def strong_gap(u, ustar, p, sing_star) -> float:
    """Integral of |Du - Du*|^p away from the vortices of u*."""
    a, b, c = u.coeffs
    a2, b2, c2 = ustar.coeffs
    diff = (a - a2, b - b2, c - c2)
    reg = perforated_region(sing_star.locations, STRONG_RADIUS) if sing_star.points else None
    return integrate_gradient(u, lambda gr, x, y: gr ** p, reg, coeffs=diff)


def scan_candidates(cfg: StudyConfig, grid, sing_star) -> list:
    step, ext = cfg.scan["step"], cfg.scan["extent"]
    pts = sing_star.points
    cx, cy = grid.center
    if len(pts) == 1:
        n = int(math.floor(ext / step + 1e-9))
        offs = [k * step for k in range(-n, n + 1)]
        q = pts[0][1]
        return [[((cx + dx, cy + dy), q)] for dy in offs for dx in offs]
    cands = []
    for f in (0.8, 0.9, 1.0, 1.1, 1.2):
        cands.append([((cx + f * (x - cx), cy + f * (y - cy)), q) for (x, y), q in pts])
    for dx, dy in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
        cands.append([((x + dx, y + dy), q) for (x, y), q in pts])
    return cands


def config_scan(cfg: StudyConfig, g_fn, sing_star) -> dict:
    """Configuration energy over a coarse family of point sets (a diagnostic, not a certified minimization)."""
    grid = cfg.grid(int(cfg.scan["resolution"]))
    g = g_fn(grid)
    target = cfg.manifold()
    rows = []
    best = None
    for k, pts in enumerate(scan_candidates(cfg, grid, sing_star)):
        status, val = "ok", math.nan
        try:
            sing = make_configuration(grid, pts)
            val = config_energy(grid, g, sing, cfg.scan["rho"], target)
        except (ConfigurationError, HomotopySectorError) as exc:
            status = str(exc)
        rows.append({"index": k, "points": [[x, y, list(q.windings)] for (x, y), q in pts],
                     "value": val, "status": status})
        if status == "ok" and (best is None or val < best["value"]):
            best = rows[-1]
    return {"resolution": int(cfg.scan["resolution"]), "rho": cfg.scan["rho"], "rows": rows, "best": best}


def match_distance(locs_a, locs_b) -> float:
    """Largest distance after pairing the two point sets in sorted order."""
    if len(locs_a) != len(locs_b) or not locs_a:
        return math.inf
    a = sorted(locs_a)
    b = sorted(locs_b)
    return max(math.hypot(x1 - x2, y1 - y2) for (x1, y1), (x2, y2) in zip(a, b))


# --------------------------------------------------------------------------
# report


@dataclass
class LadderEntry:
    p: float
    result: object
    report: object
    growth: object = None
    growth_error: str | None = None
    growth_rows: list = dc_field(default_factory=list)

    @property
    def bounds(self):
        return list(self.report.bounds) + list(self.growth_rows)


@dataclass
class StudyReport:
    config: StudyConfig
    entries: list
    extrapolation: dict
    trajectories: list
    narrow: list
    strong: list
    scan: dict | None
    diagnostics: list
    notes: list = dc_field(default_factory=list)

    def bound_matrix(self) -> list:
        rows = []
        for e in self.entries:
            for b in e.bounds:
                rows.append((b.name, e.p, b.lhs, b.rhs, b.slack, b.passed, b.informational))
        for b in self.diagnostics:
            rows.append((b.name, "", b.lhs, b.rhs, b.slack, b.passed, b.informational))
        return rows

    def failed(self) -> list:
        return [r[0] + (f" p={r[1]}" if r[1] != "" else "") for r in self.bound_matrix() if not r[5] and not r[6]]

    def as_dict(self) -> dict:
        ladder = []
        for e in self.entries:
            r = e.report
            ladder.append({
                "p": e.p,
                "energy": r.total_energy,
                "scaled_energy": (2 - e.p) * r.total_energy,
                "e_sg_p": r.e_sg_p,
                "e_ren_limit": r.e_ren_limit,
                "e_ren_integral": r.e_ren_integral,
                "e_ren_p": r.e_ren_p,
                "singularities": len(r.per_singularity),
                "solver": r.solver,
                "growth_error": e.growth_error,
            })
        fails = self.failed()
        return {
            "seed": self.config.seed,
            "config": self.config.as_dict(),
            "ladder": ladder,
            "extrapolation": self.extrapolation,
            "trajectories": self.trajectories,
            "narrow_convergence": self.narrow,
            "strong_convergence": self.strong,
            "config_scan": self.scan,
            "diagnostics": [b.as_dict() for b in self.diagnostics],
            "summary": {"bound_rows": len(self.bound_matrix()), "failed": fails},
            "notes": self.notes,
        }


def run_study(cfg: StudyConfig, parallel: bool = False, out: str | None = None, write: bool = True,
              scan: bool = True) -> StudyReport:
    grid = cfg.grid()
    target = cfg.manifold()
    g = cfg.boundary_data(grid)
    total = boundary_charge(grid, target, g)
    results = solve_ladder(cfg, grid, g, parallel)
    entries = []
    notes = []
    for res in results:
        p = res.p
        u = res.field
        sing = detect_singularities(u)
        rep = energy_report(u, p, solver=res, sing=sing)
        entry = LadderEntry(p, res, rep)
        if sing.points:
            try:
                coll = grow_balls(u, p, cfg.delta, sing)
                entry.growth = coll
                entry.growth_rows = growth_bound_rows(u, p, cfg.delta, sing, coll)
            except (GrowthError, ValueError) as exc:
                entry.growth_error = str(exc)
                notes.append(f"p={ptag(p)}: ball growth skipped: {exc}")
        entries.append(entry)

    ps = [e.p for e in entries]
    scaled = [(2 - e.p) * e.report.total_energy for e in entries]
    e_sg2 = entries[-1].report.e_sg_2
    extrap = {
        "scaled_energy_raw": [[p, v] for p, v in zip(ps, scaled)],
        "richardson": richardson(ps, scaled),
        "points_used": ps[-3:],
        "e_sg_2": e_sg2,
    }

    trajectories = []
    for e in entries:
        for k, (loc, q, lam) in enumerate(e.report.per_singularity):
            trajectories.append({"p": e.p, "index": k, "x": loc[0], "y": loc[1], "charge": list(q.windings),
                                 "distance_to_center": math.hypot(loc[0] - grid.center[0], loc[1] - grid.center[1])})

    star = entries[-1]
    ustar = star.result.field
    sing_star = detect_singularities(ustar)
    narrow = []
    for e in entries:
        narrow.extend(narrow_rows(e.result.field, e.p, detect_singularities(e.result.field), e_sg2))
    strong = [{"p": e.p, "gap": strong_gap(e.result.field, ustar, e.p, sing_star)} for e in entries[:-1]]

    diagnostics = []
    ren = star.report.e_ren_limit
    hterm = star.report.h_term
    if sing_star.points and ren is not None:
        for e in entries:
            excess = e.report.total_energy - e.report.e_sg_2 / (2 - e.p)
            diagnostics.append(BoundRow(f"energy excess upper bound p={ptag(e.p)}", excess, ren + hterm,
                                        0.1 * (1 + abs(hterm))))
            diagnostics.append(BoundRow(f"energy excess lower window p={ptag(e.p)}", ren - 0.1, excess, 0.0))
        rho = cfg.scan["rho"]
        try:
            cval = config_energy(grid, g, sing_star, rho, target)
            slack = 0.1 * (1 + abs(cval))
            diagnostics.append(BoundRow("configuration energy below renormalized energy", cval, ren, slack))
            diagnostics.append(BoundRow("renormalized energy near configuration energy", ren, cval, slack))
        except (ConfigurationError, HomotopySectorError) as exc:
            notes.append(f"configuration bracket skipped: {exc}")
        r01 = [row for row in narrow if row["p"] == star.p and row["r"] == 0.1]
        if r01:
            diagnostics.append(BoundRow(f"narrow concentration within 0.1 at p={ptag(star.p)}", 0.9,
                                        r01[0]["fraction"], 0.0))
            diagnostics.append(BoundRow(f"narrow concentration within 0.1 relative to the limit mass at p={ptag(star.p)}",
                                        0.9, r01[0]["fraction_of_limit"], 0.0, informational=True))
    elif not sing_star.points:
        notes.append("renormalized energy skipped: no charges")

    scan_out = None
    if scan and sing_star.points:
        scan_out = config_scan(cfg, cfg.boundary_data, sing_star)
        if scan_out["best"] is not None:
            locs = [(x, y) for x, y, _ in scan_out["best"]["points"]]
            d = match_distance(sing_star.locations, locs)
            scan_out["distance_to_minimizer"] = d
            diagnostics.append(BoundRow("vortex location against configuration scan minimizer", d, 0.05, 0.0))
    report = StudyReport(cfg, entries, extrap, trajectories, narrow, strong, scan_out, diagnostics, notes)
    if write:
        write_study(report, Path(out or cfg.out))
    if not total.is_zero() and not sing_star.points:
        log.warning("boundary charge %s but no singularity detected", total)
    return report


def write_entry(entry: LadderEntry, outdir: Path, seed: int) -> None:
    tag = ptag(entry.p)
    write_snapshot(entry.result.field, outdir / f"field_p{tag}.csv")
    rep = entry.report.as_dict()
    rep["seed"] = seed
    rep["bounds"] = [b.as_dict() for b in entry.bounds]
    rep["growth_error"] = entry.growth_error
    write_json(outdir / f"report_p{tag}.json", rep)
    write_csv(outdir / f"iterations_p{tag}.csv", *_split(entry.result.log_rows()))
    write_certificates(outdir / f"certificates_p{tag}.csv", entry.bounds)
    if entry.growth is not None:
        write_json(outdir / f"growth_p{tag}.json", entry.growth.events_json())


def _split(rows):
    return rows[0], rows[1:]


def write_study(rep: StudyReport, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    seed = rep.config.seed
    for e in rep.entries:
        write_entry(e, outdir, seed)
    write_csv(outdir / "ladder.csv",
              ["p", "energy", "scaled_energy", "e_sg_p", "e_ren_limit", "e_ren_integral", "e_ren_p", "iterations",
               "flag", "grad_norm"],
              [(e.p, e.report.total_energy, (2 - e.p) * e.report.total_energy, e.report.e_sg_p,
                _nan(e.report.e_ren_limit), _nan(e.report.e_ren_integral), _nan(e.report.e_ren_p),
                e.result.iterations, e.result.flag, e.result.grad_norm) for e in rep.entries])
    write_csv(outdir / "trajectories.csv", ["p", "index", "x", "y", "charge", "distance_to_center"],
              [(t["p"], t["index"], t["x"], t["y"], " ".join(map(str, t["charge"])), t["distance_to_center"])
               for t in rep.trajectories])
    write_csv(outdir / "narrow_convergence.csv", ["p", "r", "mass", "total", "fraction", "fraction_of_limit"],
              [(r["p"], r["r"], r["mass"], r["total"], r["fraction"], r["fraction_of_limit"]) for r in rep.narrow])
    write_csv(outdir / "strong_convergence.csv", ["p", "gap"], [(r["p"], r["gap"]) for r in rep.strong])
    write_csv(outdir / "bounds_matrix.csv", ["bound_name", "p", "lhs", "rhs", "slack", "pass", "informational"],
              rep.bound_matrix())
    if rep.scan is not None:
        write_csv(outdir / "config_scan.csv", ["index", "points", "value", "status"],
                  [(r["index"], " ".join(f"{x:g}:{y:g}" for x, y, _ in r["points"]), r["value"], r["status"])
                   for r in rep.scan["rows"]])
    write_json(outdir / "study.json", rep.as_dict())


def _nan(v):
    return math.nan if v is None else v
