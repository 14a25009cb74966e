import numpy as np
import pytest

from carnot import catalog
from carnot.blowup import (PointCloud, dilated_sample, directed_distance, extract_G,
                           fit_slope, hausdorff_distance, integrate_curve, sample_set,
                           subgroup_check, verify_blowup)
from carnot.errors import PreconditionError
from carnot.manifold import adapted_frame


def test_hausdorff_basics(engel, engel_norm):
    law = engel.law.exponential_law()
    rng = np.random.default_rng(0)
    a = PointCloud(rng.normal(size=(50, 4)) * 0.1, "test")
    # (-x) * x cancels to round-off, which the layer-3 cube root magnifies
    assert hausdorff_distance(a, a, engel_norm, law) < 1e-6
    b = PointCloud(a.points[:10], "test")
    assert directed_distance(b, a, engel_norm, law)[0] < 1e-6
    assert hausdorff_distance(a, b, engel_norm, law) > 1e-3
    with pytest.raises(PreconditionError):
        directed_distance(PointCloud(np.zeros((0, 4)), "empty"), a, engel_norm, law)


def test_subgroup_check(engel):
    law = engel.law
    assert subgroup_check(np.array([[0, 1.0, 0, 0], [0, 0, 1.0, 0]]).T, law) == (True, None)
    ok, witness = subgroup_check(np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]]).T, law)
    assert not ok and witness["test"] == "bracket"
    ok, witness = subgroup_check(catalog.half_plane(), law)
    assert not ok and witness["test"] == "inverse"


def test_samples_respect_ball_and_set(engel, engel_norm):
    S = catalog.half_plane()
    cloud = sample_set(S, engel_norm, 1.0, 500, seed=1)
    assert len(cloud) == 500 and np.all(S.contains(cloud.points))
    assert np.all(engel_norm(cloud.points) < 1.0)


def test_dilated_cloud_in_ball_and_deterministic(engel, engel_norm):
    m = engel.submanifolds["deg3-exp"]
    a = dilated_sample(m, [0.0, 0.0], 0.1, 1.0, 300, engel_norm, seed=4)
    b = dilated_sample(m, [0.0, 0.0], 0.1, 1.0, 300, engel_norm, seed=4)
    assert np.array_equal(a.points, b.points)
    assert np.all(engel_norm(a.points) <= 1.0)


def test_blowup_trivial_plane_is_exact(engel, engel_norm):
    # the trivial plane is a subgroup: its blow-ups equal the plane itself
    rep = verify_blowup(engel.submanifolds["trivial-plane"], [0.0, 0.0], [0.2, 0.1], 1.0, 300,
                        engel_norm, seed=2)
    assert rep["limit_is_subgroup"]
    assert all(r["coordinate_deviation"] < 1e-12 for r in rep["rows"])


def test_curves_on_trivial_plane(engel):
    m = engel.submanifolds["trivial-plane"]
    f = adapted_frame(m, [0.0, 0.0])
    sol = integrate_curve(m, f, [0.5, 0.3], 0.2, 400)
    fit = extract_G(sol, f, [0.01, 0.05, 0.2])
    # sigma = (1, 2): lambda^2 t^2 / 2 in the layer-2 coordinate
    assert np.allclose(fit.G, [0.5, 0.15], atol=1e-8)
    with pytest.raises(PreconditionError):
        integrate_curve(m, f, [1.0], 0.1, 10)


def test_fit_slope():
    r = np.array([0.4, 0.2, 0.1])
    assert np.isclose(fit_slope(r, 3 * r ** 2), 2.0)
    assert fit_slope(r, np.zeros(3)) == float("inf")
