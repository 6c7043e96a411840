import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symmin.errors import InvalidParameter, InvariantDomainViolation
from symmin.field import (
    GridFunction,
    check_domain_invariance,
    is_grid_exact,
    make_grid,
    parse_domain_spec,
    pullback,
    random_field,
    require_invariant_domain,
    sobolev_norm,
)
from symmin.group import GroupElement, make_dihedral, parse_group_spec, rotation


def bump(x, y, radius=0.8):
    r2 = (x * x + y * y) / radius**2
    inside = r2 < 1
    safe = np.where(inside, 1 - r2, 1.0)
    return np.where(inside, np.exp(-1 / safe), 0.0) * (1 + 2 * x + x * y - 1.5 * y * y + x**3)


def test_interval_nodes():
    g = make_grid("interval", 5)
    X, _ = g.coords
    assert X.ravel().tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    assert g.mask.all() and g.dim == 1


def test_disk_corners_are_outside():
    g = make_grid("disk", 65)
    assert not g.mask[0, 0] and not g.mask[-1, -1] and not g.mask[0, -1] and not g.mask[-1, 0]
    assert g.mask[32, 0] and g.mask[32, 32]


def test_square_mask_full():
    for n in (3, 8, 17):
        assert make_grid("square", n).mask.all()


def test_domain_parsing():
    assert parse_domain_spec("annulus:0.3").param == 0.3
    assert parse_domain_spec("annulus(0.3)").param == 0.3
    assert parse_domain_spec("polygon:6").kind == "regular_polygon"
    for bad in ("annulus:1.5", "blob", "square:2", "regular_polygon:2"):
        with pytest.raises(InvalidParameter):
            parse_domain_spec(bad)
    with pytest.raises(InvalidParameter):
        make_grid("square", 2)


def test_identity_pullback_is_bit_exact(square17):
    u = random_field(square17, 3)
    assert np.array_equal(pullback(np.eye(2), u).values, u.values)


def test_1d_reflection_pullback():
    g = make_grid("interval", 9)
    u = GridFunction.from_function(g, lambda x: x, zero_trace=False)
    v = pullback(GroupElement([[-1.0]]), u)
    assert np.array_equal(v.values, -u.values)
    assert np.array_equal(v.values, u.values[:, ::-1])


def test_quarter_turn_permutes_values(square17):
    u = random_field(square17, 1)
    q = GroupElement(rotation(math.pi / 2))
    assert is_grid_exact(q, square17)
    v = pullback(q, u).values
    # (q.u)(x_i, y_j) = u(-y_j, x_i), i.e. v[j, i] = u[i, n-1-j]
    n = square17.nx
    expected = np.array([[u.values[i, n - 1 - j] for i in range(n)] for j in range(n)])
    assert np.array_equal(v, expected)


def test_pullback_composition_is_contravariant(square9):
    u = random_field(square9, 5)
    D4 = make_dihedral(4)
    for g in D4:
        for h in D4:
            lhs = pullback(g, pullback(h, u)).values
            rhs = pullback(h @ g, u).values
            assert np.array_equal(lhs, rhs)


def test_pullback_vanishes_outside_mask(disk33):
    u = GridFunction.from_function(disk33, bump)
    for g in parse_group_spec("so2:16"):
        v = pullback(g, u)
        assert not np.any(v.values[~disk33.mask])


def test_zero_norm(square9):
    assert sobolev_norm(GridFunction.zeros(square9), 2.0) == 0.0
    assert sobolev_norm(GridFunction.zeros(square9), 3.0, order=2) == 0.0


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("order", [1, 2, 4])
def test_norm_invariance_grid_exact(square17, p, order):
    u = random_field(square17, 11, 2)
    ref = sobolev_norm(u, p, order)
    for g in make_dihedral(4):
        assert abs(sobolev_norm(pullback(g, u), p, order) - ref) <= 1e-12 * ref


def test_norm_rejects_bad_exponent(square9):
    with pytest.raises(InvalidParameter):
        sobolev_norm(GridFunction.zeros(square9), 1.0)
    with pytest.raises(InvalidParameter):
        sobolev_norm(GridFunction.zeros(square9), 2.0, order=3)


def test_1d_norm_converges_to_analytic_value():
    # sqrt(int_{-1}^{1} x^2 + ((1-x^2)/2)^2 dx) = sqrt(2/3 + 4/15)
    exact = math.sqrt(14 / 15)
    errs = []
    for n in (33, 65, 129):
        g = make_grid("interval", n)
        u = GridFunction.from_function(g, lambda x: (1 - x * x) / 2, zero_trace=False)
        errs.append(abs(sobolev_norm(u, 2.0) - exact))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 3e-5
    assert math.log2(errs[1] / errs[2]) > 1.9


def test_so2_norm_residual_shrinks():
    G = parse_group_spec("so2:16")
    res = []
    for n in (33, 65):
        grid = make_grid("disk", n)
        u = GridFunction.from_function(grid, bump)
        ref = sobolev_norm(u, 2.0)
        res.append(max(abs(sobolev_norm(pullback(g, u), 2.0) - ref) / ref for g in G))
    assert math.log2(res[0] / res[1]) >= 1.5


def test_domain_invariance_examples(square17):
    assert check_domain_invariance(make_dihedral(4), square17).ok
    bad = check_domain_invariance(parse_group_spec("cyclic:8"), square17)
    assert not bad.ok
    assert tuple(abs(c) for c in bad.witness) == (1.0, 1.0)
    assert check_domain_invariance(parse_group_spec("so2:32"), make_grid("disk", 33)).ok
    with pytest.raises(InvariantDomainViolation) as info:
        require_invariant_domain(parse_group_spec("cyclic:8"), square17)
    assert info.value.witness is not None
    with pytest.raises(InvalidParameter):
        check_domain_invariance(parse_group_spec("reflect1d"), square17)


@pytest.mark.parametrize(
    "domain, spec", [("regular_polygon:6", "dihedral:6"), ("annulus:0.3", "so2:16"), ("disk", "cyclic:4")]
)
def test_symmetric_domains(domain, spec):
    assert check_domain_invariance(parse_group_spec(spec), make_grid(domain, 33)).ok


def test_random_field_properties(square17, disk33):
    a, b = random_field(square17, 4), random_field(square17, 4)
    assert np.array_equal(a.values, b.values)
    assert sobolev_norm(random_field(square17, 4, 4), 2.0) < sobolev_norm(a, 2.0)
    for seed in range(5):
        u = random_field(disk33, seed)
        assert not np.any(u.values[~disk33.free])


def test_gridfunction_rejects_values_outside_mask(disk33):
    vals = np.ones(disk33.shape)
    with pytest.raises(InvalidParameter):
        GridFunction(disk33, vals)
    nan_outside = np.where(disk33.mask, 0.0, np.nan)
    assert GridFunction(disk33, nan_outside).max_abs() == 0.0


@given(st.integers(0, 2**31 - 1), st.integers(0, 7))
def test_d4_action_preserves_norm_and_sum(seed, k):
    grid = make_grid("square", 9)
    u = random_field(grid, seed)
    g = make_dihedral(4)[k]
    v = pullback(g, u)
    assert sorted(v.values.ravel()) == sorted(u.values.ravel())
    assert abs(sobolev_norm(v, 2.0) - sobolev_norm(u, 2.0)) <= 1e-12 * (1 + sobolev_norm(u, 2.0))
