import numpy as np
import pytest

from carnot import catalog
from carnot.errors import PreconditionError


@pytest.mark.parametrize("name", ["engel4", "heisenberg1", "e5"])
def test_expectations_hold(name):
    entry = catalog.get(name)
    assert entry.expected
    for e in entry.expected:
        ok, detail = e.run()
        assert ok, f"{e.key}: {detail}"
        assert e.origin in (catalog.WORKED_EXAMPLE, catalog.COMPUTED, catalog.DEFINITIONAL)


def test_unknown_entry():
    with pytest.raises(PreconditionError):
        catalog.get("nope")


def test_deg4_strata_formula():
    assert catalog.deg4_expected_degree(1.0, 1.0) == 4
    assert catalog.deg4_expected_degree(0.0, 0.0) == 2
    x = catalog.deg4_curve(3.0, 1)[0]
    assert catalog.deg4_expected_degree(x, 3.0) == 3


def test_degree3_system(engel):
    r, s = catalog.degree3_system_residual(engel.submanifolds["deg3-exp"],
                                           np.array([[0.1, 0.2], [-1.0, 1.5]]))
    assert np.max(np.abs(r)) < 1e-12
