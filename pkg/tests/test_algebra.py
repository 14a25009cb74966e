from fractions import Fraction

import pytest

from carnot import catalog
from carnot.algebra import StratifiedAlgebra, rational_rank
from carnot.errors import DimensionError, InvalidAlgebraError, PreconditionError


def test_catalog_algebras_valid():
    for name, Q in (("heisenberg1", 4), ("heisenberg2", 6), ("engel4", 7), ("e5", 11),
                    ("abelian3", 3)):
        alg = catalog.get(name).algebra
        assert alg.validate().ok
        assert alg.homogeneous_dimension() == Q


def test_jacobi_violation_reported_one_based():
    alg = StratifiedAlgebra((3, 1, 1), {(0, 1): {3: 1}, (0, 3): {4: 1}, (1, 2): {3: 1},
                                        (2, 3): {4: 1}})
    rep = alg.validate()
    assert not rep.ok and rep.axiom == "jacobi"
    assert rep.message == "Jacobi violated at (1,2,3)"
    with pytest.raises(InvalidAlgebraError, match="Jacobi violated"):
        alg.require_valid()


def test_grading_and_generation_violations():
    assert StratifiedAlgebra((2, 1), {(0, 1): {2: 1}, (0, 2): {2: 1}}).validate().axiom == "grading"
    bad = StratifiedAlgebra((2, 2, 1), {(0, 1): {2: 1, 3: 1}, (0, 2): {4: 1}, (1, 3): {4: 1}})
    assert bad.validate().axiom == "generation"


def test_index_range_checked():
    with pytest.raises(DimensionError):
        StratifiedAlgebra((2, 1), {(0, 5): {2: 1}})


def test_bracket_antisymmetric_and_bilinear():
    alg = catalog.engel_algebra()
    e = [alg.basis_vector(i) for i in range(4)]
    assert tuple(alg.bracket(e[0], e[1])) == e[2]
    assert tuple(alg.bracket(e[1], e[0])) == tuple(-c for c in e[2])
    u = tuple(a + 2 * b for a, b in zip(e[0], e[1]))
    assert tuple(alg.bracket(u, e[2])) == e[3]


def test_subalgebra_closure():
    alg = catalog.engel_algebra()
    e = [alg.basis_vector(i) for i in range(4)]
    assert alg.subalgebra_closure_check([e[1], e[2]]) == (True, None)
    ok, witness = alg.subalgebra_closure_check([e[0], e[2]])
    assert not ok and witness[:2] == (0, 1)
    with pytest.raises(PreconditionError):
        alg.subalgebra_closure_check([e[1], e[1]])


def test_change_basis_preserves_brackets():
    alg = catalog.engel_algebra()
    half = Fraction(1, 2)
    cols = [(1, 1, 0, 0), (0, half, 0, 0), (0, 0, 2, 0), (0, 0, 0, 1)]
    new = alg.change_basis(cols)
    assert new.validate().ok
    # [b1, b2] = [X1 + X2, X2/2] = X3/2 = b3/4
    assert new.constant(0, 1, 2) == Fraction(1, 4)
    with pytest.raises(PreconditionError):
        alg.change_basis([(1, 0, 1, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)])


def test_rational_rank():
    assert rational_rank([(1, 2), (2, 4)]) == 1
    assert rational_rank([(Fraction(1, 3), 1), (1, 0)]) == 2
