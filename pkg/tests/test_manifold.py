import numpy as np
import pytest

from carnot.errors import DimensionError, PreconditionError
from carnot.manifold import (Submanifold, adapted_frame, is_horizontal_point, local_graph,
                             parameter_grid, pi_sigma, pointwise_degree, submanifold_degree,
                             tangent_pvector)

EXPECTED = {"trivial-plane": 3, "deg3-exp": 3, "deg5-vertical": 5, "deg4-parabola": 4}


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_catalog_degrees(engel, name):
    m = engel.submanifolds[name]
    d, witness = submanifold_degree(m, parameter_grid(m, 9))
    assert d == EXPECTED[name]
    assert pointwise_degree(m, witness) == d


def test_degree_vectorized_matches_pointwise(engel):
    m = engel.submanifolds["deg4-parabola"]
    U = np.array([[1.0, 1.0], [0.0, 0.0], [2.0, 2.0], [-1.0, 0.5]])
    assert list(pointwise_degree(m, U, warn=False)) == [pointwise_degree(m, u, warn=False) for u in U]


def test_tangent_pvector_is_unit(engel):
    td = tangent_pvector(engel.submanifolds["deg3-exp"], [0.4, -0.3])
    assert np.isclose(td.tau.norm(), 1.0)
    assert td.point_degree == 3
    assert np.isclose(td.tau_d.norm(), np.exp(-0.3) / np.sqrt(1 + np.exp(-0.6)))


@pytest.mark.parametrize("name,u", [("deg3-exp", [0.0, 0.0]), ("deg3-exp", [0.7, -1.1]),
                                    ("deg5-vertical", [0.3, 0.4]), ("deg4-parabola", [1.0, 1.0]),
                                    ("trivial-plane", [0.2, 0.2])])
def test_adapted_frame_structure(engel, name, u):
    m = engel.submanifolds[name]
    f = adapted_frame(m, u)
    assert f.maximal
    assert sum(k * a for k, a in enumerate(f.alphas, 1)) == f.point_degree
    B = f.basis_change
    assert np.allclose(B.T @ B, np.eye(m.q))
    # pivot block of the frame matrix is the identity
    C = f.frame_matrix
    assert np.allclose(C[list(f.selected_rows), :], np.eye(m.p), atol=1e-12)
    # each selected vector lies in its layer
    deg = np.array(m.algebra.degrees)
    for j, i in enumerate(f.selected_rows):
        assert deg[i] == f.sigma[j]
    V, _, quality = f.frozen_frame(f.base_parameter)
    assert np.allclose(V, C) and np.isclose(quality, 1.0)


def test_non_maximal_point(engel):
    m = engel.submanifolds["deg4-parabola"]
    with pytest.warns(UserWarning):
        f = adapted_frame(m, [0.0, 0.0])
    assert not f.maximal
    with pytest.raises(PreconditionError):
        pi_sigma(f)


def test_local_graph(engel):
    m = engel.submanifolds["deg3-exp"]
    g = local_graph(m, adapted_frame(m, [0.0, 0.0]), radius=0.05, n=5)
    assert g.jacobian_error <= 1e-6
    assert g.values.shape[0] == 25


def test_horizontality(engel):
    assert is_horizontal_point(engel.submanifolds["deg3-exp"], [0.0, 0.0])
    assert not is_horizontal_point(engel.submanifolds["deg5-vertical"], [0.0, 0.0])


def test_construction_errors(engel):
    law = engel.law
    with pytest.raises(DimensionError):
        Submanifold(law, ["x", "y"], [(-1, 1), (-1, 1)])
    with pytest.raises(PreconditionError):
        Submanifold(law, ["x", "y", "z", "0"], [(-1, 1), (-1, 1)])
    with pytest.raises(PreconditionError):
        Submanifold(law, ["x", "x", "0", "0"], [(-1, 1), (-1, 1)])
    m = engel.submanifolds["deg3-exp"]
    with pytest.raises(PreconditionError):
        m.phi([5.0, 0.0])
