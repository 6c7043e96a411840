import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from symmin.errors import InvalidParameter
from symmin.group import (
    GroupElement,
    SymmetryGroup,
    group_distance,
    make_cyclic,
    make_dihedral,
    make_reflection_1d,
    make_so2_quadrature,
    parse_group_spec,
    rotation,
    verify_group,
)

SPECS = ["cyclic:1", "cyclic:3", "cyclic:4", "cyclic:8", "dihedral:1", "dihedral:4",
         "dihedral:6", "reflect1d", "so2:16", "so2:32"]


@pytest.mark.parametrize("spec", SPECS)
def test_constructed_groups_pass_verification(spec):
    G = parse_group_spec(spec)
    assert verify_group(G).ok
    assert abs(G.weights.sum() - 1) <= 1e-12
    for g in G:
        assert np.max(np.abs(g.matrix.T @ g.matrix - np.eye(g.dim))) <= 1e-12
        assert abs(abs(np.linalg.det(g.matrix)) - 1) <= 1e-12


def test_cyclic_examples():
    C1 = make_cyclic(1)
    assert C1.order == 1 and C1[0].is_identity() and C1.weights[0] == 1.0
    C4 = make_cyclic(4)
    assert np.all(C4.weights == 0.25)
    assert C4.index_of(np.array([[0.0, -1.0], [1.0, 0.0]])) is not None
    C3 = make_cyclic(3)
    prod = rotation(2 * math.pi / 3) @ rotation(2 * math.pi / 3)
    assert C3.index_of(prod) is not None
    assert np.allclose(prod, rotation(4 * math.pi / 3), atol=1e-12)


def test_dihedral_examples():
    assert make_dihedral(4).order == 8
    D1 = make_dihedral(1)
    assert D1.order == 2 and D1[0].is_identity()
    assert np.isclose(np.linalg.det(D1[1].matrix), -1)
    for g in make_dihedral(4):
        if np.linalg.det(g.matrix) < 0:
            assert np.max(np.abs(g.matrix @ g.matrix - np.eye(2))) <= 1e-12


def test_reflection_1d():
    R = make_reflection_1d()
    assert R.order == 2
    assert tuple(R.weights) == (0.5, 0.5)
    assert (R[1].matrix @ R[1].matrix)[0, 0] == 1.0


def test_so2_quadrature():
    assert make_so2_quadrature(1).order == 1
    Q = make_so2_quadrature(8)
    assert np.all(Q.weights == 0.125)
    for k, g in enumerate(Q):
        assert np.allclose(g.matrix, rotation(k * math.pi / 4), atol=1e-15)
    assert Q.kind == "so2-quadrature"
    assert np.all(make_so2_quadrature().cayley_table() >= 0)  # C_N is closed


def test_verify_group_reports_bad_weights():
    I = GroupElement(np.eye(2))
    G = SymmetryGroup((I, GroupElement(-np.eye(2))), (0.6, 0.6))
    viol = {v.check: v for v in verify_group(G).violations}
    assert "normalization" in viol
    assert viol["normalization"].magnitude == pytest.approx(0.2, abs=1e-12)


def test_verify_group_reports_missing_products():
    G = SymmetryGroup((GroupElement(np.eye(2)), GroupElement(rotation(1.0))), (0.5, 0.5))
    checks = {v.check for v in verify_group(G).violations}
    assert "closure" in checks and "inverse" in checks


def test_verify_group_rejects_nonuniform_weights():
    G = SymmetryGroup((GroupElement([[1.0]]), GroupElement([[-1.0]])), (0.25, 0.75))
    assert "uniform-weights" in {v.check for v in verify_group(G).violations}


def test_group_distance_examples():
    g = GroupElement(rotation(0.3))
    assert group_distance(g, g) == 0.0
    assert group_distance(GroupElement([[1.0]]), GroupElement([[-1.0]])) == 2.0
    quarter = GroupElement(rotation(math.pi / 2))
    assert group_distance(GroupElement(np.eye(2)), quarter) == pytest.approx(2.0, abs=1e-15)
    with pytest.raises(InvalidParameter):
        group_distance(GroupElement([[1.0]]), quarter)


@pytest.mark.parametrize("spec", ["dihedral:4", "cyclic:6", "so2:16", "reflect1d"])
def test_distance_is_a_metric(spec):
    G = parse_group_spec(spec)
    for a, b, c in itertools.product(G, repeat=3):
        assert abs(group_distance(a, b) - group_distance(b, a)) <= 1e-12
        assert group_distance(a, c) <= group_distance(a, b) + group_distance(b, c) + 1e-12


@pytest.mark.parametrize("spec", ["dihedral:4", "cyclic:5", "so2:16"])
def test_left_multiplication_permutes_elements(spec):
    G = parse_group_spec(spec)
    table = G.cayley_table()
    for row in table:
        assert sorted(row) == list(range(G.order))
        assert np.all(G.weights[row] == G.weights)


@given(st.integers(1, 12), st.sampled_from(["cyclic", "dihedral", "so2"]))
def test_every_order_builds_a_valid_group(n, family):
    G = parse_group_spec(f"{family}:{n}")
    assert verify_group(G).ok
    assert G.order == (2 * n if family == "dihedral" else n)


@pytest.mark.parametrize("spec", ["cyclic", "cyclic:x", "dihedral:0", "torus:3", "cyclic:-2"])
def test_bad_specs(spec):
    with pytest.raises(InvalidParameter):
        parse_group_spec(spec)
