"""Invariant suites runnable from the command line."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ballgrowth import Disk, grow_balls, merge_disks
from ..energetics import (
    check_p_continuity,
    count_taylor_young_violations,
    h_term,
    h_term_expanded,
    hanner_grid_violations,
    is_atomic,
    minimal_resolution,
    optimal_resolutions,
    p_renormalized_energy,
    renormalized_energy_detail,
    shifted_singularity_bounds,
    shifted_singularity_integral,
    singular_energy,
)
from ..field import annulus, gradient_samples, hedgehog, make_configuration, region_energy, unit_disk, weak_lp_quasinorm
from ..manifold import HomotopyCharge

SUITES = ("geometry", "scalar", "energetics", "all")


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


# --------------------------------------------------------------------------
# geometry


def random_collections(n_cases: int = 1000, max_disks: int = 12, seed: int = 0):
    rng = np.random.default_rng(seed)
    for _ in range(n_cases):
        k = int(rng.integers(1, max_disks + 1))
        centers = rng.uniform(0.0, 10.0, size=(k, 2))
        radii = rng.uniform(0.0, 2.0, size=k)
        yield [Disk(tuple(c), float(r)) for c, r in zip(centers, radii)]


def sampled_coverage(inputs, outputs, n: int = 24) -> bool:
    t = 2 * math.pi * np.arange(n) / n
    for d in inputs:
        xs = np.concatenate([[d.center[0]], d.center[0] + d.radius * np.cos(t)])
        ys = np.concatenate([[d.center[1]], d.center[1] + d.radius * np.sin(t)])
        ok = False
        for o in outputs:
            if np.all(np.hypot(xs - o.center[0], ys - o.center[1]) <= o.radius * (1 + 1e-12) + 1e-12):
                ok = True
                break
        if not ok:
            return False
    return True


def merging_suite(n_cases: int = 1000, seed: int = 0) -> dict:
    worst = 0.0
    disjoint = covered = 0
    for disks in random_collections(n_cases, seed=seed):
        out = merge_disks(disks).disks
        a = math.fsum(d.radius for d in disks)
        b = math.fsum(d.radius for d in out)
        worst = max(worst, abs(a - b))
        if all(not out[i].meets(out[j]) for i in range(len(out)) for j in range(i + 1, len(out))):
            disjoint += 1
        if sampled_coverage(disks, out) and all(any(o.contains(d) for o in out) for d in disks):
            covered += 1
    return {"cases": n_cases, "max_radii_sum_error": worst, "disjoint": disjoint, "covered": covered}


def geometry_checks() -> list:
    out = []
    m = merging_suite()
    out.append(Check("merging lemma on random collections",
                     m["max_radii_sum_error"] <= 1e-12 and m["disjoint"] == m["cases"] and m["covered"] == m["cases"], m))
    pair = merge_disks([Disk((0, 0), 1), Disk((1.5, 0), 1)]).disks
    out.append(Check("symmetric pair merges to the midpoint",
                     len(pair) == 1 and abs(pair[0].center[0] - 0.75) < 1e-15 and pair[0].radius == 2.0,
                     {"disks": [d.as_dict() for d in pair]}))
    chain_in = [Disk((0, 0), 1), Disk((1.8, 0), 1), Disk((3.6, 0), 1)]
    chain = merge_disks(chain_in).disks
    out.append(Check("chain merges to one disk of radius 3",
                     len(chain) == 1 and abs(chain[0].radius - 3) < 1e-12 and sampled_coverage(chain_in, chain),
                     {"disks": [d.as_dict() for d in chain]}))
    g = unit_disk(1 / 64)
    coll = grow_balls(hedgehog(g), 1.5, 0.5)
    d = coll.disks
    out.append(Check("single vortex grows one disk of diameter delta",
                     len(d) == 1 and abs(2 * d[0].radius - 0.5) <= g.h and math.hypot(*d[0].center) <= 2 * g.h,
                     {"disks": [x.as_dict() for x in d]}))
    return out


# --------------------------------------------------------------------------
# scalar


def scalar_checks() -> list:
    out = []
    rng = np.random.default_rng(1)
    n = 100_000
    a = rng.uniform(0, 10, n)
    b = rng.uniform(0, 10, n)
    p = rng.uniform(1, 2, n)
    bad = count_taylor_young_violations(a, b, p)
    out.append(Check("Taylor-Young scalar inequality on random triples", bad == 0, {"triples": n, "violations": bad}))
    ps = np.linspace(1.01, 2.0, 100)
    xs = np.concatenate([[0.0], np.logspace(-6, 1, 200)])
    bad = hanner_grid_violations(ps, xs)
    out.append(Check("Hanner-type predicate on a (p, x) grid", bad == 0,
                     {"points": len(ps) * len(xs), "violations": bad}))
    for av in (0.1, 0.3):
        for pv in (1.5, 1.9):
            val = shifted_singularity_integral(av, pv)
            lo, hi = shifted_singularity_bounds(av, pv)
            out.append(Check(f"shifted singularity sandwich a={av} p={pv}", lo <= val <= hi,
                             {"lower": lo, "value": val, "upper": hi}))
    vals = {d: singular_energy(HomotopyCharge((d,)), 2.0) for d in range(-4, 5)}
    out.append(Check("circle singular energy at p=2 is |d| pi",
                     all(abs(v - abs(d) * math.pi) <= 1e-12 * (1 + abs(d)) for d, v in vals.items()),
                     {str(d): v for d, v in vals.items()}))
    r15, v15 = minimal_resolution(HomotopyCharge((1, 1)), 1.5)
    r2 = optimal_resolutions(HomotopyCharge((1, 1)), 2.0)
    ok = len(r15) == 1 and len(r2) == 2 and {len(r) for r in r2} == {1, 2}
    out.append(Check("torus (1,1) optimum switches to a tie at p=2", ok,
                     {"p1.5": str(r15), "value1.5": v15, "p2": [str(r) for r in r2]}))
    grid11 = list(np.linspace(1.5, 2.0, 11))
    for q in (HomotopyCharge((1,)), HomotopyCharge((3,)), HomotopyCharge((1, 1)), HomotopyCharge((2, -1))):
        rep = check_p_continuity(q, grid11)
        out.append(Check(f"p-continuity Lipschitz bound for {q}", rep.passed,
                         {"max_slope": rep.max_slope, "bound": rep.lipschitz_bound}))
    bad = []
    for rank in (1, 2):
        rng_w = range(-4, 5)
        for w in (np.array(np.meshgrid(*[rng_w] * rank)).reshape(rank, -1).T):
            q = HomotopyCharge(tuple(int(v) for v in w))
            if q.is_zero() or q.l1 > 4:
                continue
            res, _ = minimal_resolution(q, 2.0)
            bad.extend(str(c) for c in res.charges if not is_atomic(c))
    out.append(Check("charges of p=2 minimal resolutions are atomic", not bad, {"non_atomic": bad}))
    lams = [2 * math.pi, 2 * math.pi * math.sqrt(2), 4 * math.pi]
    h1, h2 = h_term(lams), h_term_expanded(lams)
    out.append(Check("H-term matches its expanded form", abs(h1 - h2) <= 1e-12 * abs(h1), {"h": h1, "expanded": h2}))
    return out


# --------------------------------------------------------------------------
# energetics


def energetics_checks(inv_h: int = 128) -> list:
    out = []
    g = unit_disk(1 / inv_h)
    u = hedgehog(g)
    sing = make_configuration(g, [((0.0, 0.0), HomotopyCharge((1,)))])
    det = renormalized_energy_detail(u, sing)
    agree = abs(det.limit - det.integral) <= 1e-3 * (1 + abs(det.limit))
    out.append(Check("hedgehog renormalized energy vanishes by both routes",
                     abs(det.limit) <= 0.05 and abs(det.integral) <= 0.05 and agree, det.as_dict()))
    vals = {str(p): p_renormalized_energy(u, sing, p) for p in (1.5, 1.7, 1.9)}
    out.append(Check("hedgehog p-renormalized energy vanishes", all(abs(v) <= 0.05 for v in vals.values()), vals))
    ga = annulus(0.25, 1.0, 1 / inv_h)
    e = region_energy(hedgehog(ga), 2.0)
    ref = math.pi * math.log(4.0)
    out.append(Check("hedgehog on an annulus attains the annulus bound", abs(e - ref) <= 0.03 * ref,
                     {"energy": e, "bound": ref}))
    gv, w = gradient_samples(u)
    wl = weak_lp_quasinorm(gv, w, 2.0, t_max=1 / (4 * g.h))
    out.append(Check("hedgehog weak-L2 quasinorm is pi", abs(wl - math.pi) <= 0.05 * math.pi, {"value": wl}))
    return out


def run_suite(name: str) -> dict:
    if name not in SUITES:
        raise KeyError(name)
    parts = ("geometry", "scalar", "energetics") if name == "all" else (name,)
    fns = {"geometry": geometry_checks, "scalar": scalar_checks, "energetics": energetics_checks}
    checks = []
    for part in parts:
        checks.extend(fns[part]())
    return {"suite": name, "passed": all(c.passed for c in checks), "checks": [c.as_dict() for c in checks]}
