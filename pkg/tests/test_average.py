import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symmin.average import (
    average_report,
    check_average_invariance,
    compensated_sum,
    g_average,
    hull_norm_bound,
    invariance_residual,
    jensen_gap,
    jensen_gap_points,
    mean_value_distance_points,
    orbit,
    orbit_average,
    subgradient_gap,
    subgradient_gaps_points,
)
from symmin.energy import linear, p_dirichlet, polyharmonic, quadratic
from symmin.field import GridFunction, make_grid, random_field, sobolev_norm
from symmin.group import make_cyclic, make_dihedral, make_reflection_1d, parse_group_spec

# toy: R^2 with F = |x|^2 and the swap group {id, swap}
SWAP_ORBIT = np.array([[1.0, 0.0], [0.0, 1.0]])
HALF = np.array([0.5, 0.5])


def sq(x):
    return float(np.dot(x, x))


def test_toy_jensen():
    assert np.array_equal(orbit_average(SWAP_ORBIT, HALF), [0.5, 0.5])
    assert jensen_gap_points(sq, SWAP_ORBIT, HALF) == 0.5


def test_toy_subgradient_bracket():
    gaps = subgradient_gaps_points(sq, lambda x: 2 * x, SWAP_ORBIT, HALF)
    assert gaps == [0.5, 0.5]


def test_toy_mean_value_distance():
    k, d = mean_value_distance_points(SWAP_ORBIT, HALF)
    assert abs(d - math.sqrt(0.5)) <= 1e-12


def test_reflection_average_1d(interval33):
    u = random_field(interval33, 9)
    ug = g_average(u, make_reflection_1d())
    assert np.allclose(ug.values, (u.values + u.values[:, ::-1]) / 2, rtol=0, atol=1e-16)
    odd = GridFunction.from_function(interval33, lambda x: x, zero_trace=False)
    assert g_average(odd, make_reflection_1d()).max_abs() <= 1e-15
    even = GridFunction.from_function(interval33, lambda x: x * x, zero_trace=False)
    assert np.array_equal(g_average(even, make_reflection_1d()).values, even.values)


@pytest.mark.parametrize("spec", ["dihedral:4", "cyclic:4"])
def test_average_invariance_grid_exact(square17, spec):
    G = parse_group_spec(spec)
    for seed in range(5):
        u = random_field(square17, seed)
        assert check_average_invariance(u, G) <= 1e-12 * (1 + u.max_abs())
        ug = g_average(u, G)
        assert invariance_residual(ug, G) <= 1e-12
        assert check_average_invariance(ug, G) <= 1e-15


def test_so2_average_is_c16_invariant(disk33):
    u = random_field(disk33, 2, 4)
    assert check_average_invariance(u, parse_group_spec("so2:16")) <= 1e-12


def test_idempotence_and_linearity(square17):
    G = make_dihedral(4)
    u, v = random_field(square17, 1), random_field(square17, 2)
    ug = g_average(u, G)
    assert np.array_equal(g_average(ug, G).values, ug.values)
    lhs = g_average(3.0 * u - 0.25 * v, G).values
    rhs = 3.0 * ug.values - 0.25 * g_average(v, G).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * (1 + np.max(np.abs(rhs)))


def bump(x, y, radius=0.8):
    r2 = (x * x + y * y) / radius**2
    inside = r2 < 1
    safe = np.where(inside, 1 - r2, 1.0)
    return np.where(inside, np.exp(-1 / safe), 0.0) * (1 + 2 * x + x * y - 1.5 * y * y + x**3)


def test_interpolated_idempotence_defect_shrinks():
    # re-averaging through bilinear interpolation smooths slightly; the defect is O(h^2)
    G = parse_group_spec("so2:16")
    defects = []
    for n in (33, 65):
        ug = g_average(GridFunction.from_function(make_grid("disk", n), bump), G)
        defects.append(np.max(np.abs(g_average(ug, G).values - ug.values)) / ug.max_abs())
    assert defects[1] < defects[0] / 3


def test_summation_order_independent(square17):
    G = make_dihedral(4)
    pts = orbit(random_field(square17, 0), G)
    ref = orbit_average(pts, G.weights)
    rng = np.random.default_rng(0)
    for _ in range(5):
        perm = rng.permutation(len(pts))
        assert np.array_equal(orbit_average(pts[perm], G.weights), ref)


def test_compensated_sum_is_accurate():
    vals = np.array([[1e16], [1.0], [-1e16], [1.0]])
    assert compensated_sum(vals)[0] == 2.0


def test_invariant_fields_give_zero_gaps(square17):
    G = make_dihedral(4)
    u = g_average(random_field(square17, 5), G)
    F = p_dirichlet(2, quadratic(1, 0.5))
    assert abs(jensen_gap(F, u, G)) <= 1e-12
    assert abs(subgradient_gap(F, u, G)) <= 1e-12


def test_random_fields_give_nonnegative_gaps(square17):
    G = make_dihedral(4)
    F = p_dirichlet(2, linear(1))
    for seed in range(3):
        u = random_field(square17, seed)
        assert jensen_gap(F, u, G) >= 0
        assert subgradient_gap(F, u, G) >= 0


def test_hull_bound(square17):
    G = make_dihedral(4)
    assert hull_norm_bound(GridFunction.zeros(square17), G)
    u = random_field(square17, 8)
    assert hull_norm_bound(u, G, 3.0)
    assert sobolev_norm(g_average(u, G), 2.0) < sobolev_norm(u, 2.0)


def test_report_keys_and_pass(square17):
    rep = average_report(polyharmonic(1), random_field(square17, 1), make_cyclic(4))
    d = rep.to_dict()
    for key in ("jensen_gap", "invariance_residual", "norm_bound_satisfied", "subgradient_min_gap"):
        assert key in d
    assert rep.passes() and rep.grid_exact


@given(st.integers(0, 2**31 - 1), st.sampled_from(["dihedral:4", "cyclic:4", "cyclic:2"]))
def test_jensen_and_subgradient_properties(seed, spec):
    grid = make_grid("square", 9)
    G = parse_group_spec(spec)
    u = random_field(grid, seed)
    for F in (p_dirichlet(3, quadratic(1, 0.5)), polyharmonic(1, linear(2))):
        rep = average_report(F, u, G)
        tol = 1e-10 * (1 + abs(rep.energy_u))
        assert rep.jensen_gap >= -tol
        assert rep.subgradient_min_gap >= -tol
        assert rep.norm_bound_satisfied
        assert rep.invariance_residual <= 1e-12 * (1 + u.max_abs())
