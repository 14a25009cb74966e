import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnot import catalog
from carnot.errors import PreconditionError
from carnot.multivec import (NearDegenerateWarning, PVector, subspace_from_factors, wedge,
                             wedge_all)

ALG = catalog.engel_algebra()
vec = arrays(np.float64, 4, elements=st.floats(-3, 3, allow_subnormal=False))


def test_basis_wedges_and_degrees():
    e = [PVector.vector(ALG, np.eye(4)[i]) for i in range(4)]
    w = wedge(e[1], e[0])
    assert w[(0, 1)] == -1
    assert w.degree() == 2
    assert wedge(e[1], e[2]).degree() == 3
    assert wedge_all([e[0], e[2], e[3]]).degree() == 6
    assert wedge(e[0], e[0]).is_zero()


@settings(max_examples=50, deadline=None)
@given(vec, vec, vec)
def test_wedge_antisymmetric_and_matches_minors(a, b, c):
    va, vb, vc = (PVector.vector(ALG, v) for v in (a, b, c))
    assert wedge(va, vb).allclose(-wedge(vb, va), atol=1e-9)
    minors = PVector.from_columns(ALG, np.column_stack([a, b, c]))
    assert minors.allclose(wedge_all([va, vb, vc]), atol=1e-8, rtol=1e-8)


def test_degree_projection_and_norms():
    tau = PVector(ALG, 2, {(0, 1): 3.0, (1, 2): 4.0})
    assert tau.norm() == 5.0
    assert tau.degree_norms() == {2: 3.0, 3: 4.0}
    assert tau.degree_projection(3) == PVector(ALG, 2, {(1, 2): 4.0})
    assert tau.max_possible_degree() == 5


def test_degree_tolerance_and_warning():
    tau = PVector(ALG, 2, {(0, 1): 1.0, (1, 2): 1e-8})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert tau.degree() == 3
    assert any(issubclass(w.category, NearDegenerateWarning) for w in caught)
    assert PVector(ALG, 2, {(0, 1): 1.0, (1, 2): 1e-12}).degree() == 2
    with pytest.raises(PreconditionError):
        PVector(ALG, 2).degree()


def test_subspace_from_factors():
    B = subspace_from_factors([np.array([1.0, 1, 0, 0]), np.array([0, 0, 2.0, 0])])
    assert np.allclose(B.T @ B, np.eye(2))
    with pytest.raises(PreconditionError):
        subspace_from_factors([np.array([1.0, 1, 0, 0]), np.array([2.0, 2, 0, 0])])
