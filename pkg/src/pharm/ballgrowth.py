"""Vortex detection, merging disks, expansion of circles and the U-field.

Disks grow from the detected vortices with radius s * E_sg^{p'}(charge) in a
shared parameter s.  Touching disks are merged into one disk whose radius is
the sum of the two, and the merged disk waits until the growth law catches up
with it.  The circles swept along the way are recorded as edges of a forest;
the U-field and its level sets are read off that forest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .energetics import (
    BoundRow,
    annulus_lower_bound,
    singular_energy,
)
from .field import (
    DiscreteField,
    SingularityConfiguration,
    TraceError,
    circle_charge,
    disks_region,
    integrate_gradient,
    make_configuration,
    region_energy,
)
from .manifold import TWO_PI, HomotopyCharge, ProjectionError, WindingError


class GrowthError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# detection


def _cluster_charge(u: DiscreteField, cx, cy, r0):
    """Charge read on the smallest resolvable circle of radius at least r0."""
    h = u.grid.h
    r = r0
    for _ in range(12):
        try:
            return circle_charge(u, (cx, cy), r)
        except (WindingError, TraceError):
            r += 2 * h
    return None


def detect_singularities(u: DiscreteField) -> SingularityConfiguration:
    """Plaquette windings clustered by 8-connectivity, one point per cluster with nonzero charge."""
    grid = u.grid
    if u.target.n_factors == 0:
        return make_configuration(grid, [])
    charges, unresolved, _ = u.plaquettes
    nonzero = np.any(charges != 0, axis=1)
    flagged = nonzero | unresolved
    cidx = grid.cell_index
    img = np.zeros(cidx.shape, dtype=bool)
    valid = cidx >= 0
    img[valid] = flagged[cidx[valid]]
    labels, n = ndimage.label(img, structure=np.ones((3, 3), dtype=int))
    cc = grid.cell_centers
    points, loose = [], []
    for lab in range(1, n + 1):
        cells = cidx[labels == lab]
        q = charges[cells].sum(axis=0)
        w = np.abs(charges[cells]).sum(axis=1).astype(float)
        if w.sum() > 0:
            cx, cy = (cc[cells] * w[:, None]).sum(axis=0) / w.sum()
        else:
            cx, cy = cc[cells].mean(axis=0)
        cx, cy = float(cx), float(cy)
        if np.any(unresolved[cells]):
            loose.append((cx, cy))
            reach = float(np.max(np.hypot(cc[cells, 0] - cx, cc[cells, 1] - cy))) + grid.h
            got = _cluster_charge(u, cx, cy, reach + 2 * grid.h)
            if got is None:
                continue
            charge = got
        else:
            charge = HomotopyCharge(tuple(int(v) for v in q))
        if not charge.is_zero():
            points.append(((cx, cy), charge))
    points.sort(key=lambda pq: (pq[0][0], pq[0][1]))
    return make_configuration(grid, points, tuple(sorted(loose)))


# --------------------------------------------------------------------------
# merging disks


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float
    charge: HomotopyCharge | None = None

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    def meets(self, other: "Disk") -> bool:
        """Closed disks intersect."""
        return math.hypot(self.center[0] - other.center[0], self.center[1] - other.center[1]) <= self.radius + other.radius

    def contains(self, other: "Disk", tol: float = 1e-12) -> bool:
        d = math.hypot(self.center[0] - other.center[0], self.center[1] - other.center[1])
        return d + other.radius <= self.radius + tol * max(1.0, self.radius)

    def as_dict(self) -> dict:
        q = self.charge
        return {"cx": self.center[0], "cy": self.center[1], "r": self.radius,
                "charge": None if q is None else list(q.windings)}


@dataclass
class DiskCollection:
    disks: list
    history: list = dc_field(default_factory=list)
    edges: list = dc_field(default_factory=list)
    p: float | None = None
    delta: float | None = None

    @property
    def radii_sum(self) -> float:
        return sum(d.radius for d in self.disks)

    def events_json(self) -> list:
        out = []
        for ev in self.history:
            row = {"type": ev["type"], "s": ev["s"], "disks": [d.as_dict() for d in ev["disks"]]}
            for k in ("s_start", "merged"):
                if k in ev:
                    row[k] = ev[k]
            out.append(row)
        return out


def merge_pair(a: Disk, b: Disk, charge=None) -> Disk:
    r = a.radius + b.radius
    if r > 0:
        cx = (a.radius * a.center[0] + b.radius * b.center[0]) / r
        cy = (a.radius * a.center[1] + b.radius * b.center[1]) / r
    else:
        cx = 0.5 * (a.center[0] + b.center[0])
        cy = 0.5 * (a.center[1] + b.center[1])
    return Disk((cx, cy), r, charge)


def _first_meeting_pair(disks):
    for i in range(len(disks)):
        for j in range(i + 1, len(disks)):
            if disks[i].meets(disks[j]):
                return i, j
    return None


def merge_disks(disks) -> DiskCollection:
    """Replace meeting pairs (lexicographically first) by their merged disk until pairwise disjoint."""
    cur = [d if isinstance(d, Disk) else Disk(d[0], d[1]) for d in disks]
    history = []
    while True:
        pair = _first_meeting_pair(cur)
        if pair is None:
            break
        i, j = pair
        q = None
        if cur[i].charge is not None and cur[j].charge is not None:
            q = cur[i].charge + cur[j].charge
        cur[i] = merge_pair(cur[i], cur[j], q)
        del cur[j]
        history.append({"type": "merge", "s": None, "merged": [i, j], "disks": list(cur)})
    return DiskCollection(cur, history)


# --------------------------------------------------------------------------
# expansion of circles


def conjugate(p: float) -> float:
    return p / (p - 1)


def circle_length_scale(q: HomotopyCharge, p: float) -> float:
    """((2 pi)^(p'-1) p' E_sg^{p'}(q))^(1/p'), the numerator of U on a circle carrying q."""
    pc = conjugate(p)
    e = singular_energy(q, pc)
    return (TWO_PI ** (pc - 1) * pc * e) ** (1 / pc)


@dataclass
class _Node:
    center: tuple
    charge: HomotopyCharge
    rate: float
    anchor: float  # radius when created
    children: list
    r_end: float | None = None

    def radius(self, s):
        return max(self.anchor, s * self.rate)


def _trace_charge(u, center, r):
    try:
        return circle_charge(u, center, r)
    except (WindingError, TraceError, ProjectionError) as exc:
        raise GrowthError(f"insufficient resolution at radius {r:.6g}") from exc


def grow_balls(u: DiscreteField, p: float, delta: float, sing: SingularityConfiguration | None = None) -> DiskCollection:
    """Expansion of circles from the detected vortices until the diameters sum to delta."""
    if not 1 < p <= 2:
        raise ValueError("p must lie in (1, 2]")
    if not delta > 0:
        raise ValueError("delta must be positive")
    grid = u.grid
    h = grid.h
    if sing is None:
        sing = detect_singularities(u)
    if not sing.points:
        raise GrowthError("no nonzero charge to grow from")
    reach = min(float(grid.dist_to_boundary(x, y)) for x, y in sing.locations)
    if delta > reach + 1e-12:
        raise GrowthError("singularities too close to the boundary for this delta")
    pc = conjugate(p)
    nodes = []
    active = []
    for (x, y), q in sing.points:
        nodes.append(_Node((x, y), q, singular_energy(q, pc), 0.0, []))
        active.append(len(nodes) - 1)

    def disks_at(s):
        return [Disk(nodes[k].center, nodes[k].radius(s), nodes[k].charge) for k in active]

    def diam_sum(s):
        return 2 * sum(nodes[k].radius(s) for k in active)

    def touching(s):
        return _first_meeting_pair(disks_at(s)) is not None

    history = [{"type": "seed", "s": 0.0, "disks": disks_at(0.0)}]
    s = 0.0
    while True:
        rate = sum(nodes[k].rate for k in active)
        if rate <= 0 and diam_sum(s) < delta:
            history.append({"type": "stop", "s": s, "disks": disks_at(s)})
            break
        # parameter at which the stopping rule fires
        lo, hi = s, max(s, 1e-12)
        while diam_sum(hi) < delta:
            hi = 2 * hi if hi > 0 else 1e-6
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if diam_sum(mid) < delta:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        s_stop = hi
        if not touching(s_stop):
            history.append({"type": "grow", "s_start": s, "s": s_stop, "disks": disks_at(s_stop)})
            history.append({"type": "stop", "s": s_stop, "disks": disks_at(s_stop)})
            s = s_stop
            break
        lo, hi = s, s_stop
        vmax = max(nodes[k].rate for k in active)
        while (hi - lo) * vmax > h / 10:
            mid = 0.5 * (lo + hi)
            if touching(mid):
                hi = mid
            else:
                lo = mid
        s_c = hi
        history.append({"type": "grow", "s_start": s, "s": s_c, "disks": disks_at(s_c)})
        while True:
            cur = disks_at(s_c)
            pair = _first_meeting_pair(cur)
            if pair is None:
                break
            i, j = pair
            ki, kj = active[i], active[j]
            for k in (ki, kj):
                nodes[k].r_end = nodes[k].radius(s_c)
            merged = merge_pair(cur[i], cur[j])
            q = _trace_charge(u, merged.center, merged.radius)
            nodes.append(_Node(merged.center, q, singular_energy(q, pc), merged.radius, [ki, kj]))
            active[i] = len(nodes) - 1
            del active[j]
            history.append({"type": "merge", "s": s_c, "merged": [i, j], "disks": disks_at(s_c)})
        s = s_c
    for k in active:
        nodes[k].r_end = nodes[k].radius(s)
    edges = [dict(center=n.center, charge=n.charge, r_start=n.anchor, r_end=n.r_end,
                  scale=circle_length_scale(n.charge, p) if not n.charge.is_zero() else 0.0,
                  children=list(n.children), root=k in active)
             for k, n in enumerate(nodes)]
    return DiskCollection(disks_at(s), history, edges, p, delta)


def final_traces(u: DiscreteField, coll: DiskCollection) -> list:
    """Charges read on the final circles; with the boundary charge they form a resolution."""
    return [_trace_charge(u, d.center, d.radius) for d in coll.disks]


# --------------------------------------------------------------------------
# U-field


def _level_disks(coll: DiskCollection, t: float) -> list:
    """Disjoint disks forming {U > t}."""
    edges = coll.edges
    out = []

    def visit(k):
        e = edges[k]
        lim = e["scale"] / (TWO_PI * t) if t > 0 else math.inf
        if lim > e["r_start"] and e["scale"] > 0:
            out.append((e["center"], min(e["r_end"], lim)))
            return
        for c in e["children"]:
            visit(c)

    for k, e in enumerate(edges):
        if e["root"]:
            visit(k)
    return out


@dataclass
class UField:
    coll: DiskCollection
    values: np.ndarray  # samples at the grid nodes inside the domain

    def at(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = np.zeros(np.broadcast(x, y).shape)
        for e in self.coll.edges:
            if e["scale"] <= 0:
                continue
            d = np.hypot(x - e["center"][0], y - e["center"][1])
            inside = d < e["r_end"]
            val = e["scale"] / (TWO_PI * np.maximum(d, max(e["r_start"], 1e-300)))
            out = np.where(inside, np.maximum(out, val), out)
        return out

    def breakpoints(self) -> list:
        ts = set()
        for e in self.coll.edges:
            if e["scale"] <= 0:
                continue
            for r in (e["r_start"], e["r_end"]):
                if r > 0:
                    ts.add(e["scale"] / (TWO_PI * r))
        return sorted(ts)

    def volume(self, t) -> float:
        return sum(math.pi * r * r for _, r in _level_disks(self.coll, t))

    def perimeter(self, t) -> float:
        return sum(TWO_PI * r for _, r in _level_disks(self.coll, t))

    def _sup(self, fn, power):
        best = 0.0
        for b in self.breakpoints():
            for t in (b * (1 - 1e-12), b * (1 + 1e-12)):
                best = max(best, t ** power * fn(t))
        return best

    def weak_volume(self, p: float) -> float:
        """sup_t t^p vol{U > t}; attained at a breakpoint of the level-set structure."""
        return self._sup(self.volume, p)

    def weak_perimeter(self, p: float) -> float:
        return self._sup(self.perimeter, p - 1)

    def min_positive(self) -> float:
        v = self.values[self.values > 0]
        return float(v.min()) if v.size else 0.0


@dataclass
class MixedEstimateReport:
    p: float
    delta_eff: float
    excess_integral: float
    singular_block: float
    mixed_rhs: float
    weak_volume: float
    weak_volume_bound: float
    weak_volume_bound_printed: float
    weak_perimeter: float
    weak_perimeter_bound: float
    energy: float

    def rows(self, slack: float = 0.1) -> list:
        lhs = self.excess_integral + self.singular_block
        return [
            BoundRow("mixed weak-Lp estimate", lhs, self.mixed_rhs, slack * self.mixed_rhs),
            BoundRow("U-field level-set volume", self.weak_volume, self.weak_volume_bound,
                     slack * self.weak_volume_bound),
            BoundRow("U-field level-set volume (printed constant)", self.weak_volume,
                     self.weak_volume_bound_printed, slack * self.weak_volume_bound_printed, informational=True),
            BoundRow("U-field level-set perimeter", self.weak_perimeter, self.weak_perimeter_bound,
                     slack * self.weak_perimeter_bound),
        ]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def build_u_field(u: DiscreteField, coll: DiskCollection, p: float, delta: float | None = None):
    """U-field of a growth history together with its three mixed estimates."""
    uf = UField(coll, np.zeros(0))
    xy = u.grid.node_xy
    uf.values = uf.at(xy[:, 0], xy[:, 1])
    pc = conjugate(p)
    finals = [(d.center[0], d.center[1], d.radius) for d in coll.disks]
    reg = disks_region(finals)
    e_in = region_energy(u, p, reg) if finals else 0.0
    e_all = region_energy(u, p, None)
    delta_eff = coll.radii_sum
    if not coll.edges or e_in == 0.0:
        return uf, MixedEstimateReport(p, delta_eff, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, e_all)
    excess = (p - 1) / p * integrate_gradient(u, lambda g, x, y: np.maximum(g - uf.at(x, y), 0.0) ** p, reg)
    e_sg_sum = sum(singular_energy(d.charge, pc) for d in coll.disks if d.charge is not None)
    block = (TWO_PI * delta_eff) ** (2 - p) / (p ** (2 - p) * (p - 1) ** (p - 1)) * e_sg_sum ** (p - 1)
    rhs = (3 - p) * p / 2 * e_in
    wv = uf.weak_volume(p)
    c_true = (2 - p) * pc ** (p - 1) * TWO_PI ** (2 - p) / 2
    c_printed = (2 - p) * p ** (p - 1) / (2 * (p - 1) ** (p - 1) * TWO_PI ** (2 - p))
    wp = uf.weak_perimeter(p)
    sysl = u.target.systole
    c_per = (2 - p) * TWO_PI ** (3 - p) * pc ** (p - 1) / sysl
    rep = MixedEstimateReport(p, delta_eff, excess, block, rhs, wv, c_true * e_all, c_printed * e_all,
                              wp, c_per * e_all, e_all)
    return uf, rep


# --------------------------------------------------------------------------
# certificates


def edge_annulus_rows(u: DiscreteField, coll: DiskCollection, p: float, slack: float = 0.1) -> list:
    """Measured p-energy of every swept annulus against the annulus lower bound."""
    rows = []
    for e in coll.edges:
        r0, r1 = e["r_start"], e["r_end"]
        if not r1 > r0 or e["charge"].is_zero():
            continue
        if p == 2.0 and r0 == 0:
            continue
        cx, cy = e["center"]
        reg = disks_region([(cx, cy, r1)], [(cx, cy, r0)] if r0 > 0 else [])
        bound = annulus_lower_bound(e["charge"].lam, r0, r1, p)
        rows.append(BoundRow(f"annulus lower bound on swept annulus ({cx:.4f},{cy:.4f}) [{r0:.4f},{r1:.4f}]",
                             bound, region_energy(u, p, reg), slack * bound))
    return rows


def _subtree(coll, k):
    out = [k]
    for c in coll.edges[k]["children"]:
        out.extend(_subtree(coll, c))
    return out


def swept_integral(coll: DiskCollection, p: float, ids) -> float:
    """(2-p) * sum over edges of the integral of E_sg^{p'}^{p-1} r^{1-p} dr."""
    pc = conjugate(p)
    tot = 0.0
    for k in ids:
        e = coll.edges[k]
        if e["charge"].is_zero():
            continue
        en = singular_energy(e["charge"], pc)
        tot += en ** (p - 1) * (e["r_end"] ** (2 - p) - e["r_start"] ** (2 - p))
    return tot


def growth_certificate_rows(u: DiscreteField, coll: DiskCollection, p: float) -> list:
    """Swept-annulus inequality for the full final collection and for each final disk."""
    pc = conjugate(p)
    roots = [k for k, e in enumerate(coll.edges) if e["root"]]
    rows = []
    groups = [("all final disks", roots)] + [(f"final disk {i}", [k]) for i, k in enumerate(roots)]
    if len(roots) == 1:
        groups = groups[:1]
    for name, sel in groups:
        rad = sum(coll.edges[k]["r_end"] for k in sel)
        esg = sum(singular_energy(coll.edges[k]["charge"], pc) for k in sel)
        lhs = esg ** (p - 1) * rad ** (2 - p)
        ids = [i for k in sel for i in _subtree(coll, k)]
        rhs = swept_integral(coll, p, ids)
        rows.append(BoundRow(f"expansion of circles ({name})", lhs, rhs, 1e-9 * max(rhs, 1.0)))
    return rows


def disk_lower_bound_row(u: DiscreteField, coll: DiskCollection, p: float, slack: float = 0.1) -> BoundRow:
    """delta^(2-p) E_sg^{p'}(boundary)^(p-1) against the energy in the final disks, delta the radii sum."""
    from .field import boundary_charge
    pc = conjugate(p)
    total = boundary_charge(u.grid, u.target, u.boundary_data)
    lhs = coll.radii_sum ** (2 - p) * singular_energy(total, pc) ** (p - 1)
    reg = disks_region([(d.center[0], d.center[1], d.radius) for d in coll.disks])
    rhs = (2 - p) * (p - 1) ** (p - 1) / (TWO_PI / p) ** (2 - p) * region_energy(u, p, reg)
    return BoundRow("energy in grown disks lower bound", lhs, rhs, slack * rhs)


def growth_bound_rows(u: DiscreteField, p: float, delta: float, sing=None, coll=None) -> list:
    """All certificates attached to one growth history (grown here unless ``coll`` is given)."""
    if p >= 2:
        return []
    if coll is None:
        coll = grow_balls(u, p, delta, sing)
    rows = edge_annulus_rows(u, coll, p)
    rows.extend(growth_certificate_rows(u, coll, p))
    rows.append(disk_lower_bound_row(u, coll, p))
    _, rep = build_u_field(u, coll, p, delta)
    rows.extend(rep.rows())
    return rows
