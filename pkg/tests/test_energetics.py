import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from pharm.energetics import (
    BoundRow,
    ConfigurationError,
    HomotopySectorError,
    Resolution,
    annulus_lower_bound,
    check_p_continuity,
    config_energy,
    count_taylor_young_violations,
    extrapolate,
    h_term,
    h_term_expanded,
    hanner_predicate_holds,
    is_atomic,
    minimal_resolution,
    optimal_resolutions,
    p_renormalized_energy,
    renormalized_energy,
    renormalized_energy_detail,
    shifted_singularity_bounds,
    shifted_singularity_integral,
    singular_energy,
    taylor_young_gap,
)
from pharm.field import DiscreteField, boundary_values, hedgehog, make_configuration, p_energy, unit_disk
from pharm.manifold import CIRCLE, TORUS, HomotopyCharge, euclidean

TWO_PI = 2 * math.pi
Q1 = HomotopyCharge((1,))


def C(*w):
    return HomotopyCharge(tuple(w))


def brute_force(total, p):
    """Independent oracle: every multiset of nonzero charges in the l1 box adding up to ``total``."""
    rank = len(total.windings)
    box = [C(*w) for w in np.ndindex(*([2 * total.l1 + 1] * rank))]
    box = [C(*(v - total.l1 for v in b.windings)) for b in box]
    box = [b for b in box if not b.is_zero()]
    best = math.inf

    def rec(rem, start, acc, depth):
        nonlocal best
        if rem.is_zero():
            best = min(best, acc)
            return
        if depth >= total.l1:
            return
        for k in range(start, len(box)):
            c = box[k]
            rec(rem + (-c), k, acc + c.lam ** p / (p * TWO_PI ** (p - 1)), depth + 1)

    if total.is_zero():
        return 0.0
    rec(total, 0, 0.0, 0)
    return best


# ------------------------------------------------------------------ resolutions


def test_resolution_examples():
    r, v = minimal_resolution(C(3), 2.0)
    assert r.charges == (Q1,) * 3 and v == pytest.approx(3 * math.pi, rel=1e-14)
    r, v = minimal_resolution(C(0), 1.7)
    assert len(r) == 0 and v == 0
    r, v = minimal_resolution(C(1, 1), 1.5)
    assert r.charges == (C(1, 1),)
    assert v == pytest.approx(TWO_PI * 2 ** 0.75 / 1.5, rel=1e-12)
    assert v < 2 * TWO_PI / 1.5


def test_singular_energy_examples():
    assert singular_energy(Q1, 2.0) == pytest.approx(math.pi, rel=1e-14)
    assert singular_energy(Q1, 1.5) == pytest.approx(TWO_PI / 1.5, rel=1e-14)
    for d in range(-4, 5):
        assert singular_energy(C(d), 2.0) == pytest.approx(abs(d) * math.pi, rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("total", [C(2), C(-3), C(4), C(1, 1), C(2, -1), C(2, 2), C(0, 3)])
@pytest.mark.parametrize("p", [1.0, 1.5, 1.9, 2.0])
def test_minimal_resolution_matches_brute_force(total, p):
    _, v = minimal_resolution(total, p)
    assert v == pytest.approx(brute_force(total, p), rel=1e-12)


def test_torus_switch_at_two():
    assert len(optimal_resolutions(C(1, 1), 1.5)) == 1
    ties = optimal_resolutions(C(1, 1), 2.0)
    assert sorted(len(r) for r in ties) == [1, 2]
    r, _ = minimal_resolution(C(1, 1), 2.0)
    assert len(r) == 1  # ties go to fewer charges


def test_resolution_rejects_zero_charge():
    with pytest.raises(ValueError):
        Resolution((C(0),))


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=2).filter(lambda w: sum(map(abs, w)) <= 4),
       st.floats(1.0, 2.0))
def test_resolution_sums_to_total(w, p):
    total = C(*w)
    r, v = minimal_resolution(total, p)
    assert r.total(len(w)) == total
    assert v <= charge_cost_single(total, p) + 1e-12
    assert v == pytest.approx(r.value(p), rel=1e-12, abs=1e-15)


def charge_cost_single(q, p):
    return 0.0 if q.is_zero() else q.lam ** p / (p * TWO_PI ** (p - 1))


def test_atomicity():
    for w in [(1,), (2,), (1, 1), (2, -1), (1, 0)]:
        q = C(*w)
        r, _ = minimal_resolution(q, 2.0)
        assert all(is_atomic(c) for c in r.charges)
    assert is_atomic(Q1) and not is_atomic(C(2))


# ------------------------------------------------------------------ H-term, continuity


def test_h_term_examples():
    assert h_term([TWO_PI]) == pytest.approx(math.pi / 2, rel=1e-14)
    assert h_term([TWO_PI, TWO_PI]) == pytest.approx(math.pi, rel=1e-14)
    assert h_term([TWO_PI * math.sqrt(2)]) == pytest.approx(math.pi * (1 - math.log(2)), rel=1e-13)
    with pytest.raises(ValueError, match="trivial charge has no H-term"):
        h_term([0.0])


@given(st.lists(st.floats(0.1, 100.0), min_size=1, max_size=5))
def test_h_term_expansion(lams):
    assert h_term(lams) == pytest.approx(h_term_expanded(lams), rel=1e-10, abs=1e-10)


def test_p_continuity_examples():
    rep = check_p_continuity(Q1, [1.5, 1.75, 2.0])
    assert rep.f == pytest.approx([TWO_PI ** p for p in (1.5, 1.75, 2.0)], rel=1e-12)
    assert rep.passed
    assert check_p_continuity(C(0), [1.5, 2.0]).max_slope == 0
    grid = list(np.linspace(1.5, 2.0, 11))
    rep = check_p_continuity(C(1, 1), grid)
    assert rep.passed
    assert all(len(r) == 1 for r in rep.resolutions)
    with pytest.raises(ValueError):
        check_p_continuity(Q1, [1.2])


# ------------------------------------------------------------------ scalar kernels


def test_annulus_lower_bound_examples():
    assert annulus_lower_bound(TWO_PI, 0.0, 1.0, 1.5) == pytest.approx(TWO_PI / 0.75, rel=1e-14)
    assert annulus_lower_bound(0.0, 0.1, 1.0, 1.3) == 0.0
    assert annulus_lower_bound(TWO_PI, 0.25, 1.0, 2.0) == pytest.approx(math.pi * math.log(4), rel=1e-14)
    with pytest.raises(ValueError, match="divergent bound"):
        annulus_lower_bound(TWO_PI, 0.0, 1.0, 2.0)


@given(st.floats(0.01, 0.5), st.floats(0.6, 2.0), st.floats(1.0, 1.999))
def test_annulus_bound_continuous_at_two(sigma, rho, p):
    lo = annulus_lower_bound(TWO_PI, sigma, rho, p)
    assert lo >= 0
    near = annulus_lower_bound(TWO_PI, sigma, rho, 2 - 1e-7)
    assert near == pytest.approx(annulus_lower_bound(TWO_PI, sigma, rho, 2.0), rel=1e-5)


@given(st.floats(0, 10), st.floats(0, 10), st.floats(1, 2))
def test_taylor_young_inequality(a, b, p):
    assert count_taylor_young_violations(np.array([a]), np.array([b]), np.array([p])) == 0


def test_taylor_young_equality_cases():
    # b = a and p = 1 or p = 2 hit equality or near it; the mp check must not flag them
    a = np.array([1.0, 2.0, 0.0, 3.0])
    assert count_taylor_young_violations(a, a, np.array([2.0, 1.0, 1.0, 2.0])) == 0
    assert taylor_young_gap(1.0, 1.0, 2.0) == pytest.approx(0.0, abs=1e-15)


def test_taylor_young_random_triples():
    rng = np.random.default_rng(5)
    n = 100_000
    a, b, p = rng.uniform(0, 10, n), rng.uniform(0, 10, n), rng.uniform(1, 2, n)
    assert count_taylor_young_violations(a, b, p) == 0


@given(st.floats(1.01, 2.0), st.floats(0, 100))
def test_hanner_predicate(p, x):
    assert hanner_predicate_holds(p, x)


def test_hanner_predicate_independent_oracle():
    # strict convexity of t -> |t|^p for p > 1: (1+x)^p + (1-x)^p > 2 for x > 0
    for p in (1.1, 1.5, 2.0):
        for x in (1e-6, 0.5, 1.0, 3.0):
            direct = (1 + mpmath.mpf(x)) ** p + abs(1 - mpmath.mpf(x)) ** p - 2
            assert (direct > 0) == hanner_predicate_holds(p, x)


@pytest.mark.parametrize("a", [0.1, 0.3])
@pytest.mark.parametrize("p", [1.5, 1.9])
def test_shifted_singularity_sandwich(a, p):
    val = shifted_singularity_integral(a, p)
    lo, hi = shifted_singularity_bounds(a, p)
    assert lo <= val <= hi


def test_shifted_singularity_values():
    # frozen from an independent Monte Carlo estimate (1e7 points, 0.5% agreement)
    assert shifted_singularity_integral(0.1, 1.5) == pytest.approx(5.56, rel=5e-3)
    assert shifted_singularity_integral(0.1, 1.9) == pytest.approx(88.0, rel=5e-3)


# ------------------------------------------------------------------ renormalized energies


@given(st.floats(-5, 5), st.floats(0.1, 10), st.floats(0.5, 3.0))
def test_extrapolate_exact_on_power_law(e0, c, alpha):
    vals = [e0 + c * r ** alpha for r in (0.4, 0.2, 0.1)]
    est, got = extrapolate(vals)
    assert got == pytest.approx(alpha, rel=1e-6)
    assert est == pytest.approx(e0, abs=1e-8 * (1 + c))


@pytest.fixture(scope="module")
def hh128():
    grid = unit_disk(1 / 128)
    return hedgehog(grid), make_configuration(grid, [((0.0, 0.0), Q1)])


def test_hedgehog_renormalized_energy(hh128):
    u, sing = hh128
    d = renormalized_energy_detail(u, sing)
    assert abs(d.limit) <= 0.05 and abs(d.integral) <= 0.05
    assert abs(d.limit - d.integral) <= 1e-3 * (1 + abs(d.limit))
    assert renormalized_energy(u, sing, "integral") == d.integral
    # the continuum ladder is constant for the hedgehog
    assert max(d.limit_ladder) - min(d.limit_ladder) <= 1e-3


@pytest.mark.parametrize("p", [1.5, 1.7, 1.9])
def test_hedgehog_p_renormalized_energy(hh128, p):
    u, sing = hh128
    assert abs(p_renormalized_energy(u, sing, p)) <= 0.05


def test_empty_configuration_gives_plain_energy():
    grid = unit_disk(1 / 32)
    th = 0.3 * grid.node_xy[:, 0]
    u = DiscreteField(grid, CIRCLE, np.column_stack([np.cos(th), np.sin(th)]))
    sing = make_configuration(grid, [])
    assert p_renormalized_energy(u, sing, 1.5) == p_energy(u, 1.5)


def canonical_vortex(grid, a):
    """Vortex at (a, 0) with the identity boundary datum, corrected by the harmonic phase arg(1 - a z)."""
    z = grid.node_xy[:, 0] + 1j * grid.node_xy[:, 1]
    w = (z - a) / np.abs(z - a) * (1 - a * z) / np.abs(1 - a * z)
    return DiscreteField(grid, CIRCLE, np.column_stack([w.real, w.imag]))


def test_shifted_vortex_costs_more():
    grid = unit_disk(1 / 64)
    centred = renormalized_energy(canonical_vortex(grid, 0.0), make_configuration(grid, [((0.0, 0.0), Q1)]))
    shifted = renormalized_energy(canonical_vortex(grid, 0.3), make_configuration(grid, [((0.3, 0.0), Q1)]))
    assert shifted > centred
    # closed form for the disk: -pi log(1 - a^2)
    assert shifted - centred == pytest.approx(-math.pi * math.log(1 - 0.09), abs=0.03)


def test_shifted_boundary_datum_changes_sign():
    # moving the vortex by a disk automorphism also moves the boundary datum and lowers the value
    grid = unit_disk(1 / 64)
    z = grid.node_xy[:, 0] + 1j * grid.node_xy[:, 1]
    w = (z - 0.3) / (1 - 0.3 * z)
    w = w / np.abs(w)
    u = DiscreteField(grid, CIRCLE, np.column_stack([w.real, w.imag]))
    val = renormalized_energy(u, make_configuration(grid, [((0.3, 0.0), Q1)]))
    assert val == pytest.approx(math.pi * math.log(1 - 0.09), abs=0.05)


def test_invalid_configuration(hh128):
    u, _ = hh128
    near = make_configuration(u.grid, [((0.99, 0.0), Q1)])
    with pytest.raises(ConfigurationError, match="invalid configuration"):
        renormalized_energy(u, near)


# ------------------------------------------------------------------ configuration energy


@pytest.fixture(scope="module")
def disk64():
    grid = unit_disk(1 / 64)
    return grid, boundary_values(grid, CIRCLE, "degree:1")


def test_config_energy_centre_is_lower(disk64):
    grid, g = disk64
    v0 = config_energy(grid, g, make_configuration(grid, [((0.0, 0.0), Q1)]), 0.1, CIRCLE)
    v3 = config_energy(grid, g, make_configuration(grid, [((0.3, 0.0), Q1)]), 0.1, CIRCLE)
    assert math.isfinite(v0) and v3 > v0


def test_config_energy_label_order_irrelevant():
    grid = unit_disk(1 / 48)
    g = boundary_values(grid, CIRCLE, "degree:2")
    a = [((0.3, 0.0), Q1), ((-0.3, 0.0), Q1)]
    v1 = config_energy(grid, g, make_configuration(grid, a), 0.1, CIRCLE)
    v2 = config_energy(grid, g, make_configuration(grid, a[::-1]), 0.1, CIRCLE)
    assert v1 == v2


def test_config_energy_preconditions(disk64):
    grid, g = disk64
    with pytest.raises(ValueError):
        make_configuration(grid, [((0.0, 0.0), HomotopyCharge(()))]) and None
    with pytest.raises(ConfigurationError):
        config_energy(grid, g, make_configuration(grid, [((0.0, 0.0), C(2))]), 0.1, CIRCLE)
    with pytest.raises(ConfigurationError):
        config_energy(grid, g, make_configuration(grid, [((0.9, 0.0), Q1)]), 0.1, CIRCLE)
    with pytest.raises(ConfigurationError):
        config_energy(grid, g, make_configuration(grid, []), 0.1, CIRCLE)


def test_bound_row_semantics():
    assert BoundRow("x", 1.0, 0.95, 0.1).passed
    assert not BoundRow("x", 1.0, 0.85, 0.1).passed
    assert BoundRow("x", 1.0, 0.5, 0.0, informational=True).as_dict()["pass"] is False
