import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pharm.field import (
    DiscreteField,
    TraceError,
    annulus,
    annulus_region,
    boundary_charge,
    boundary_values,
    circle_charge,
    circle_energy_density,
    circle_trace,
    disks_region,
    gradient_samples,
    hedgehog,
    make_configuration,
    make_domain,
    p_energy,
    read_snapshot,
    rectangle,
    region_energy,
    unit_disk,
    weak_lp_quasinorm,
    write_snapshot,
)
from pharm.manifold import CIRCLE, TORUS, HomotopyCharge, loop_charge

H = 1 / 64


@pytest.fixture(scope="module")
def disk():
    return unit_disk(H)


@pytest.fixture(scope="module")
def hh(disk):
    return hedgehog(disk)


def const_field(grid, target=CIRCLE):
    v = np.zeros((grid.n_inside, target.ambient_dim))
    v[:, 0::2] = 1.0
    return DiscreteField(grid, target, v)


def test_mask_matches_domain():
    g = annulus(0.25, 1.0, H)
    r = np.hypot(g.node_xy[:, 0], g.node_xy[:, 1])
    assert np.all((r >= 0.25 - 1e-12) & (r <= 1 + 1e-12))
    assert make_domain("rectangle:2,1", H).kind == "rectangle"


@pytest.mark.parametrize("grid", [unit_disk(H), rectangle(2.0, 1.0, H)])
def test_boundary_is_one_closed_curve(grid):
    loops = grid.boundary_loops()
    assert len(loops) == 1
    assert sorted(int(n) for n in loops[0]) == sorted(int(n) for n in grid.boundary_idx)


def test_constant_field_energy_zero(disk):
    for p in (1.0, 1.3, 2.0):
        assert p_energy(const_field(disk), p) == 0.0


def test_hedgehog_energy_p15():
    # radial oracle: 2*pi * int_0^1 r^(1-p) dr = 2*pi/(2-p), divided by p
    val = p_energy(hedgehog(unit_disk(1 / 256)), 1.5)
    assert val == pytest.approx(2 * math.pi / (1.5 * 0.5), rel=0.02)


def test_hedgehog_annulus_energy():
    val = p_energy(hedgehog(annulus(0.25, 1.0, 1 / 256)), 2.0)
    assert val == pytest.approx(math.pi * math.log(4), rel=0.02)


def test_boundary_frozen(disk):
    u = hedgehog(disk)
    assert np.array_equal(u.values[disk.boundary_idx], u.boundary_data)
    with pytest.raises(ValueError):
        u.values[0, 0] = 2.0
    bad = u.values.copy()
    bad[disk.boundary_idx[0]] = [0.0, 1.0]
    with pytest.raises(ValueError):
        DiscreteField(disk, CIRCLE, bad, u.boundary_data)


def test_manifold_constraint_enforced(disk):
    with pytest.raises(ValueError):
        DiscreteField(disk, CIRCLE, np.full((disk.n_inside, 2), 0.5))


def test_traces(disk, hh):
    assert loop_charge(CIRCLE, circle_trace(hh, (0, 0), 0.5, 128)) == HomotopyCharge((1,))
    assert circle_charge(const_field(disk), (0, 0), 0.5) == HomotopyCharge((0,))
    assert circle_charge(hedgehog(disk, degree=3), (0, 0), 0.5) == HomotopyCharge((3,))
    with pytest.raises(TraceError, match="trace outside domain"):
        circle_trace(hh, (0.5, 0.0), 0.6)


@pytest.mark.parametrize("r", [0.2, 0.5])
def test_circle_energy_density(hh, r):
    assert circle_energy_density(hh, (0, 0), r, 2.0) == pytest.approx(math.pi / r, rel=0.03)
    assert circle_energy_density(hh, (0, 0), r, 1.0) == pytest.approx(2 * math.pi, rel=0.03)


def test_circle_energy_density_constant(disk):
    assert circle_energy_density(const_field(disk), (0, 0), 0.4, 1.5) == 0.0


def _smooth(grid):
    xy = grid.node_xy
    th = 0.7 * np.sin(2 * xy[:, 0]) + 0.4 * xy[:, 1] ** 2
    return DiscreteField(grid, CIRCLE, np.column_stack([np.cos(th), np.sin(th)]))


@pytest.mark.parametrize("r", [0.15, 0.4, 0.7])
def test_hoelder_chain_on_circles(disk, r):
    u = _smooth(disk)
    length = 2 * math.pi * r
    means = [(q * circle_energy_density(u, (0.05, -0.02), r, q) / length) ** (1 / q) for q in (1.0, 1.5, 2.0)]
    assert means[0] <= means[1] * 1.05 and means[1] <= means[2] * 1.05


@pytest.mark.parametrize("p", [1.2, 1.5, 1.9, 2.0])
@pytest.mark.parametrize("r", [0.1, 0.3, 0.6])
def test_circle_lower_bound(hh, p, r):
    lam = 2 * math.pi
    bound = lam ** p / (p * (2 * math.pi * r) ** (p - 1))
    assert bound <= circle_energy_density(hh, (0, 0), r, p) * 1.05


def test_energy_monotone_under_restriction(hh):
    full = region_energy(hh, 1.6)
    big = region_energy(hh, 1.6, disks_region([(0, 0, 0.8)]))
    small = region_energy(hh, 1.6, annulus_region((0, 0), 0.3, 0.8))
    assert small <= big <= full


def test_weak_l2_of_hedgehog(hh):
    vals, w = gradient_samples(hh)
    assert weak_lp_quasinorm(vals, w, 2.0, t_max=1 / (4 * H)) == pytest.approx(math.pi, rel=0.05)


@given(st.floats(0.1, 10.0))
def test_weak_lp_scaling(c):
    rng = np.random.default_rng(0)
    vals = rng.uniform(0, 5, 200)
    w = rng.uniform(0.1, 1, 200)
    a = weak_lp_quasinorm(vals, w, 1.5)
    assert weak_lp_quasinorm(c * vals, w, 1.5) == pytest.approx(c ** 1.5 * a, rel=1e-9)


def test_configuration_separation(disk):
    sing = make_configuration(disk, [((0.2, 0.0), HomotopyCharge((1,))), ((-0.2, 0.0), HomotopyCharge((1,)))])
    assert sing.separation_radius == pytest.approx(0.4)
    with pytest.raises(ValueError):
        make_configuration(disk, [((0.0, 0.0), HomotopyCharge((0,)))])


def test_boundary_generators(disk):
    g = boundary_values(disk, CIRCLE, "degree:2")
    assert boundary_charge(disk, CIRCLE, g) == HomotopyCharge((2,))
    g = boundary_values(disk, TORUS, "winding:1,-1")
    assert boundary_charge(disk, TORUS, g) == HomotopyCharge((1, -1))
    g = boundary_values(disk, CIRCLE, "wave:0.5,3")
    assert boundary_charge(disk, CIRCLE, g) == HomotopyCharge((0,))
    with pytest.raises(ValueError):
        boundary_values(disk, CIRCLE, "winding:1,1")


def test_snapshot_roundtrip(tmp_path, disk, hh):
    path = tmp_path / "f.csv"
    write_snapshot(hh, path)
    head = path.read_text().splitlines()[0]
    assert head == "x,y,inside,v1,v2"
    back = read_snapshot(path, disk, CIRCLE)
    assert np.array_equal(back.values, hh.values)
    write_snapshot(back, tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_bytes() == path.read_bytes()
