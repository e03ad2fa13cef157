import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pharm.ballgrowth import (
    Disk,
    GrowthError,
    build_u_field,
    circle_length_scale,
    conjugate,
    detect_singularities,
    edge_annulus_rows,
    final_traces,
    grow_balls,
    growth_bound_rows,
    merge_disks,
)
from pharm.energetics import singular_energy
from pharm.field import DiscreteField, hedgehog, make_configuration, unit_disk
from pharm.harness.verify import sampled_coverage
from pharm.manifold import CIRCLE, TORUS, HomotopyCharge

Q1 = HomotopyCharge((1,))


def vortices(grid, centers, target=CIRCLE):
    z = grid.node_xy[:, 0] + 1j * grid.node_xy[:, 1]
    w = np.ones_like(z)
    for cx, cy in centers:
        d = z - (cx + 1j * cy)
        w = w * d / np.abs(d)
    return DiscreteField(grid, target, np.column_stack([w.real, w.imag]))


@pytest.fixture(scope="module")
def grid64():
    return unit_disk(1 / 64)


# ------------------------------------------------------------------ detection


def test_detect_hedgehog(grid64):
    sing = detect_singularities(hedgehog(grid64))
    assert sing.charges == [Q1]
    assert math.hypot(*sing.locations[0]) <= 2 * grid64.h


def test_detect_constant(grid64):
    v = np.tile([1.0, 0.0], (grid64.n_inside, 1))
    assert detect_singularities(DiscreteField(grid64, CIRCLE, v)).points == ()


def test_detect_torus_product(grid64):
    th = np.arctan2(grid64.node_xy[:, 1], grid64.node_xy[:, 0])
    v = np.column_stack([np.cos(th), np.sin(th), np.cos(-th), np.sin(-th)])
    sing = detect_singularities(DiscreteField(grid64, TORUS, v))
    assert sing.charges == [HomotopyCharge((1, -1))]


def test_detect_two_vortices(grid64):
    sing = detect_singularities(vortices(grid64, [(-0.3, 0.0), (0.3, 0.0)]))
    assert sing.charges == [Q1, Q1]
    assert sing.locations[0][0] < 0 < sing.locations[1][0]


def test_detect_unresolved_core(grid64):
    # the centred degree-2 core has a pi gap on this lattice; its charge is read from circles
    sing = detect_singularities(hedgehog(grid64, degree=2))
    assert sing.charges == [HomotopyCharge((2,))] or sing.unresolved


# ------------------------------------------------------------------ merging


def test_merge_examples():
    out = merge_disks([Disk((0, 0), 1), Disk((1.5, 0), 1)]).disks
    assert len(out) == 1 and out[0].center == (0.75, 0.0) and out[0].radius == 2.0
    inp = [Disk((0, 0), 1), Disk((3, 0), 1)]
    assert merge_disks(inp).disks == inp
    chain = [Disk((0, 0), 1), Disk((1.8, 0), 1), Disk((3.6, 0), 1)]
    out = merge_disks(chain).disks
    assert len(out) == 1 and out[0].radius == pytest.approx(3.0, abs=1e-12)
    assert sampled_coverage(chain, out)


def test_merge_charges_add():
    out = merge_disks([Disk((0, 0), 1, Q1), Disk((1, 0), 1, HomotopyCharge((-1,)))]).disks
    assert out[0].charge == HomotopyCharge((0,))


disks_strategy = st.lists(
    st.tuples(st.floats(0, 10), st.floats(0, 10), st.floats(0, 2)), min_size=1, max_size=12)


@given(disks_strategy)
def test_merging_lemma(raw):
    inp = [Disk((x, y), r) for x, y, r in raw]
    out = merge_disks(inp).disks
    assert abs(math.fsum(d.radius for d in inp) - math.fsum(d.radius for d in out)) <= 1e-12
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            assert not out[i].meets(out[j])
    assert all(any(o.contains(d) for o in out) for d in inp)
    assert sampled_coverage(inp, out)


# ------------------------------------------------------------------ growth


def test_single_vortex_growth(grid64):
    coll = grow_balls(hedgehog(grid64), 1.5, 0.5)
    (d,) = coll.disks
    assert 2 * d.radius == pytest.approx(0.5, abs=grid64.h)
    assert math.hypot(*d.center) <= 2 * grid64.h
    assert [ev["type"] for ev in coll.history] == ["seed", "grow", "stop"]


def test_two_separated_vortices(grid64):
    u = vortices(grid64, [(-0.3, 0.0), (0.3, 0.0)])
    coll = grow_balls(u, 1.6, 0.2)
    assert len(coll.disks) == 2
    assert [d.charge for d in coll.disks] == [Q1, Q1]
    assert abs(coll.disks[0].radius - coll.disks[1].radius) <= grid64.h
    assert not coll.disks[0].meets(coll.disks[1])
    assert not any(ev["type"] == "merge" for ev in coll.history)


def test_two_close_vortices_merge():
    grid = unit_disk(1 / 128)
    u = vortices(grid, [(-0.05, 0.0), (0.05, 0.0)])
    coll = grow_balls(u, 1.6, 0.5)
    assert sum(ev["type"] == "merge" for ev in coll.history) == 1
    (d,) = coll.disks
    assert d.charge == HomotopyCharge((2,))
    assert final_traces(u, coll) == [HomotopyCharge((2,))]


def test_history_monotone_and_stopping(grid64):
    u = vortices(grid64, [(-0.3, 0.1), (0.25, -0.2)])
    coll = grow_balls(u, 1.7, 0.4)
    s = [ev["s"] for ev in coll.history]
    assert all(b >= a for a, b in zip(s, s[1:]))
    assert 2 * coll.radii_sum == pytest.approx(0.4, abs=grid64.h)


def test_growth_errors(grid64):
    v = np.tile([1.0, 0.0], (grid64.n_inside, 1))
    with pytest.raises(GrowthError, match="no nonzero charge"):
        grow_balls(DiscreteField(grid64, CIRCLE, v), 1.5, 0.3)
    with pytest.raises(GrowthError, match="too close to the boundary"):
        grow_balls(vortices(grid64, [(0.8, 0.0)]), 1.5, 0.5)


def test_insufficient_resolution(grid64):
    # two vortices inside an antipodal checkerboard: the circle traced after they merge is unresolved
    z = grid64.node_xy[:, 0] + 1j * grid64.node_xy[:, 1]
    w = (z - 0.1) / np.abs(z - 0.1) * (z + 0.1) / np.abs(z + 0.1)
    ij = np.rint((grid64.node_xy - np.array(grid64.origin)) / grid64.h).astype(int)
    w = np.where(np.abs(z) < 0.15, w, np.where((ij[:, 0] + ij[:, 1]) % 2 == 0, 1.0, -1.0))
    u = DiscreteField(grid64, CIRCLE, np.column_stack([w.real, w.imag]))
    sing = make_configuration(grid64, [((-0.1, 0.0), Q1), ((0.1, 0.0), Q1)])
    with pytest.raises(GrowthError, match="insufficient resolution at radius"):
        grow_balls(u, 1.5, 0.6, sing)


def test_length_scale():
    p = 1.5
    pc = conjugate(p)
    assert pc == 3.0
    # for a unit charge the numerator is lambda itself
    assert circle_length_scale(Q1, p) == pytest.approx(2 * math.pi, rel=1e-12)
    assert singular_energy(Q1, pc) > 0


# ------------------------------------------------------------------ U-field


def test_u_field_constant_like():
    grid = unit_disk(1 / 32)
    v = np.tile([1.0, 0.0], (grid.n_inside, 1))
    u = DiscreteField(grid, CIRCLE, v)
    from pharm.ballgrowth import DiskCollection
    uf, rep = build_u_field(u, DiskCollection([]), 1.5)
    assert np.all(uf.values == 0)
    assert rep.weak_volume == 0 and rep.weak_perimeter == 0 and rep.excess_integral == 0


def test_u_field_hedgehog(grid64):
    u = hedgehog(grid64)
    coll = grow_balls(u, 1.5, 1.0)
    uf, rep = build_u_field(u, coll, 1.5, 1.0)
    # U = 1/|x| inside the grown disk; its level sets are disks of radius 1/t
    assert uf.at(0.25, 0.0) == pytest.approx(4.0, rel=1e-3)
    assert uf.volume(4.0) == pytest.approx(math.pi / 16, rel=1e-3)
    rows = {r.name: r for r in rep.rows()}
    assert rows["U-field level-set volume"].passed
    assert rows["U-field level-set perimeter"].passed
    assert rows["mixed weak-Lp estimate"].passed
    assert rows["U-field level-set volume (printed constant)"].informational


def test_u_field_level_sets_match_samples(grid64):
    u = vortices(grid64, [(-0.3, 0.0), (0.3, 0.0)])
    coll = grow_balls(u, 1.7, 0.5)
    uf, _ = build_u_field(u, coll, 1.7, 0.5)
    h2 = grid64.h ** 2
    for t in (8.0, 15.0, 30.0):
        counted = h2 * np.count_nonzero(uf.values > t)
        assert counted == pytest.approx(uf.volume(t), rel=0.15, abs=4 * h2)


def test_growth_rows_pass_on_hedgehog(grid64):
    u = hedgehog(grid64)
    rows = growth_bound_rows(u, 1.5, 0.5)
    assert rows and all(r.passed or r.informational for r in rows)
    ann = edge_annulus_rows(u, grow_balls(u, 1.5, 0.5), 1.5)
    assert ann and all(r.passed for r in ann)
