"""Built-in groups and worked Engel examples with machine-checkable expectations."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .algebra import StratifiedAlgebra
from .errors import DimensionError, PreconditionError
from .group import GroupLaw, compute_group_law, ideal_membership_check, second_kind_law
from .manifold import Submanifold, parameter_grid, pointwise_degree
from .multivec import PVector

# how an expected fact was obtained
WORKED_EXAMPLE = "worked-example"
COMPUTED = "computed"
DEFINITIONAL = "definitional"


@dataclass(frozen=True)
class Expectation:
    key: str
    description: str
    origin: str
    check: Callable[[], Tuple[bool, str]] = field(repr=False)

    def run(self) -> Tuple[bool, str]:
        try:
            return self.check()
        except Exception as exc:  # reported, never swallowed silently
            return False, f"{type(exc).__name__}: {exc}"


@dataclass
class CatalogEntry:
    name: str
    algebra: StratifiedAlgebra
    law: GroupLaw
    submanifolds: Dict[str, Submanifold] = field(default_factory=dict)
    expected: List[Expectation] = field(default_factory=list)


# ---------------------------------------------------------------------------
# algebras


def heisenberg_algebra(n: int = 1) -> StratifiedAlgebra:
    if n < 1:
        raise PreconditionError("n must be positive")
    return StratifiedAlgebra((2 * n, 1), {(i, n + i): {2 * n: 1} for i in range(n)},
                             name=f"heisenberg{n}")


def engel_algebra() -> StratifiedAlgebra:
    return StratifiedAlgebra((2, 1, 1), {(0, 1): {2: 1}, (0, 2): {3: 1}}, name="engel4")


def e5_algebra() -> StratifiedAlgebra:
    return StratifiedAlgebra((2, 1, 1, 1), {(0, 1): {2: 1}, (0, 2): {3: 1}, (0, 3): {4: 1}},
                             name="e5")


def abelian_algebra(n: int) -> StratifiedAlgebra:
    return StratifiedAlgebra((n,), {}, name=f"abelian{n}")


# the Engel group is modelled with coordinates of the second kind,
# g = exp(x4 X4) exp(x3 X3) exp(x2 X2) exp(x1 X1), whose frame is
# X1 = d1, X2 = d2 + x1 d3 + x1^2/2 d4, X3 = d3 + x1 d4, X4 = d4
ENGEL_CHART_ORDER = (3, 2, 1, 0)


def engel_law() -> GroupLaw:
    return second_kind_law(compute_group_law(engel_algebra()), ENGEL_CHART_ORDER, "engel-model")


# ---------------------------------------------------------------------------
# Engel closed forms


def engel_minors(jac) -> Dict[Tuple[int, int], np.ndarray]:
    """``Phi_u^{ij}`` (1-based keys) from a Jacobian of shape ``(..., 4, 2)``."""
    jac = np.asarray(jac, dtype=float)
    if jac.shape[-2:] != (4, 2):
        raise DimensionError("Engel closed forms need a 4 x 2 Jacobian")
    return {(i + 1, j + 1): jac[..., i, 0] * jac[..., j, 1] - jac[..., i, 1] * jac[..., j, 0]
            for i in range(4) for j in range(i + 1, 4)}


def engel_wedge_coefficients(jac, phi1):
    """The six coefficients of ``Phi_x ^ Phi_y`` in the order
    ``X1^X2, X1^X3, X1^X4, X2^X3, X2^X4, X3^X4`` (arrays broadcast)."""
    M = engel_minors(jac)
    a = np.asarray(phi1, dtype=float)
    return np.stack([
        M[1, 2],
        M[1, 3] - a * M[1, 2],
        M[1, 4] - a * M[1, 3] + a ** 2 / 2 * M[1, 2],
        M[2, 3],
        M[2, 4] - a * M[2, 3],
        M[3, 4] + a ** 2 / 2 * M[2, 3] - a * M[2, 4],
    ], axis=-1)


def engel_wedge_closed_form(m: Submanifold, u) -> PVector:
    """Closed-form tangent wedge of a surface in the Engel model at one point."""
    _require_engel_surface(m)
    val, jac = m.jet(u)
    c = engel_wedge_coefficients(jac, val[..., 0])
    idx = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    return PVector(m.algebra, 2, {J: float(v) for J, v in zip(idx, c)})


def _require_engel_surface(m: Submanifold):
    if m.algebra.layer_dims != (2, 1, 1) or m.group.coordinates != "engel-model" or m.p != 2:
        raise PreconditionError("closed forms need a surface in the Engel model")


def degree3_system_residual(m: Submanifold, u):
    """Residuals of the three equations characterizing degree at most 3.

    Also returns the residual of ``grad Phi^4 = -(x^2/2) grad Phi^2 + x grad Phi^3``
    when ``Phi^1(x, y) = x`` (``None`` otherwise).
    """
    _require_engel_surface(m)
    val, jac = m.jet(u)
    c = engel_wedge_coefficients(jac, val[..., 0])
    residuals = np.stack([c[..., 5], c[..., 4], c[..., 2]], axis=-1)
    suff = None
    # Phi^1(x, y) = x is detected from the gradient and value of Phi^1
    if np.allclose(jac[..., 0, :], [1.0, 0.0]) and np.allclose(val[..., 0], np.asarray(u)[..., 0]):
        x = np.asarray(u, dtype=float)[..., 0]
        g = jac[..., 3, :] + (x ** 2 / 2)[..., None] * jac[..., 1, :] - x[..., None] * jac[..., 2, :]
        suff = np.max(np.abs(g), axis=-1)
    return residuals, suff


def deg4_expected_degree(x, y, tol: float = 1e-9):
    """Strata of the parabola example: 2 at (0,0) and (2,2), 3 on the two curves
    ``|y - x|^2 = y^2 - 2y`` with ``y`` outside ``[0, 2]``, 4 elsewhere."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(np.broadcast_shapes(x.shape, y.shape), 4)
    lhs, rhs = (y - x) ** 2, y ** 2 - 2 * y
    on_curve = (np.abs(lhs - rhs) <= tol * np.maximum(1.0, np.abs(rhs))) & ((y < 0) | (y > 2))
    out = np.where(on_curve, 3, out)
    out = np.where(((x == 0) & (y == 0)) | ((x == 2) & (y == 2)), 2, out)
    return out


def deg4_curve(y, sigma: int):
    """Parameters ``(y + sigma sqrt(y^2 - 2y), y)`` of the degree-3 curves."""
    y = np.asarray(y, dtype=float)
    return np.stack([y + sigma * np.sqrt(y ** 2 - 2 * y), y], axis=-1)


# ---------------------------------------------------------------------------
# strata


def strata_classification(m: Submanifold, grid, tolerance: float = 1e-9,
                          expected: Optional[Callable] = None, band: float = 1e-7):
    """Partition grid samples by pointwise degree.

    Samples whose deciding component lies in the near-degenerate band are
    set aside under the key ``None``.  With ``expected`` (a function of the
    parameters returning degrees) mismatches are listed.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1, m.p)
    if grid.shape[0] == 0:
        raise PreconditionError("empty grid")
    strict = pointwise_degree(m, grid, tolerance, warn=False)
    loose = pointwise_degree(m, grid, band, warn=False)
    strict = np.atleast_1d(strict)
    loose = np.atleast_1d(loose)
    classes: Dict[Optional[int], np.ndarray] = {}
    ambiguous = strict != loose
    for d in np.unique(strict[~ambiguous]):
        classes[int(d)] = grid[(strict == d) & ~ambiguous]
    if np.any(ambiguous):
        classes[None] = grid[ambiguous]
    mismatches = []
    if expected is not None:
        exp = np.atleast_1d(expected(*grid.T))
        bad = (exp != strict) & ~ambiguous
        mismatches = [(grid[i].tolist(), int(strict[i]), int(exp[i])) for i in np.where(bad)[0]]
    return classes, mismatches


# ---------------------------------------------------------------------------
# entries


def heisenberg(n: int = 1) -> CatalogEntry:
    alg = heisenberg_algebra(n)
    law = compute_group_law(alg)
    entry = CatalogEntry(alg.name, alg, law)
    if n == 1:
        def check_p3():
            xs = law.P[2]
            expected = {(0, 0, 1, 0, 0, 0): 1, (0, 0, 0, 0, 0, 1): 1,
                        (1, 0, 0, 0, 1, 0): Fraction(1, 2), (0, 1, 0, 1, 0, 0): Fraction(-1, 2)}
            got = {e: c for e, c in xs.terms()}
            return got == expected, xs.to_string(["x1", "x2", "x3", "y1", "y2", "y3"])
        entry.expected.append(Expectation("bch-p3", "P3 = x3 + y3 + (x1 y2 - x2 y1)/2",
                                          COMPUTED, check_p3))
    return entry


def e5() -> CatalogEntry:
    alg = e5_algebra()
    law = compute_group_law(alg)
    entry = CatalogEntry("e5", alg, law)
    entry.expected.append(Expectation(
        "homogeneous-dimension", "Q = 11", WORKED_EXAMPLE,
        lambda: (alg.homogeneous_dimension() == 11, f"Q = {alg.homogeneous_dimension()}")))
    return entry


def engel4() -> CatalogEntry:
    alg = engel_algebra()
    law = engel_law()
    entry = CatalogEntry("engel4", alg, law)
    box = ((-2.0, 2.0), (-2.0, 2.0))
    sm = {
        "trivial-plane": Submanifold(law, ["0", "x", "y", "0"], box, name="trivial-plane"),
        "deg3-exp": Submanifold(law, ["x", "x + exp(y)", "x*exp(y) + x^2/2",
                                      "x^3/6 + x^2*exp(y)/2"], box, name="deg3-exp"),
        "deg4-parabola": Submanifold(law, ["x", "y", "y^2/2", "y^2/2"],
                                     ((-2.0, 5.0), (-2.0, 5.0)), name="deg4-parabola"),
        "deg5-vertical": Submanifold(law, ["0", "x*y", "x", "y + x^2/2"], box,
                                     name="deg5-vertical"),
    }
    entry.submanifolds = sm
    E = entry.expected

    def fields_match():
        F = law.left_invariant_fields()
        txt = [[str(p) for p in row] for row in F]
        want = [["1", "0", "0", "0"], ["0", "1", "0", "0"],
                ["0", "x1", "1", "0"], ["0", "1/2*x1^2", "x1", "1"]]
        return txt == want, str(txt)
    E.append(Expectation("frame", "left-invariant frame of the model chart", WORKED_EXAMPLE,
                         fields_match))

    def product():
        exp_law = law.exponential_law()
        z = exp_law.multiply([1, 0, 0, 0], [0, 1, 0, 0])
        return bool(np.allclose(z, [1, 1, 0.5, 1 / 12], atol=1e-15)), str(z.tolist())
    E.append(Expectation("bch-product", "exp(X1) exp(X2) = exp(X1 + X2 + X3/2 + X4/12)",
                         COMPUTED, product))

    def ideal():
        ok, wit = ideal_membership_check(law.exponential_law(), [1, 2])
        return ok, f"witness {wit}"
    E.append(Expectation("ideal-x2x3", "structure of Q for the subalgebra span{X2, X3}",
                         COMPUTED, ideal))

    def closed_form_all():
        rng = np.random.default_rng(7)
        worst = 0.0
        for m in sm.values():
            lo = np.array([a for a, _ in m.domain])
            hi = np.array([b for _, b in m.domain])
            u = lo + (hi - lo) * rng.random((100, 2))
            val, jac = m.jet(u)
            ref = engel_wedge_coefficients(jac, val[..., 0])
            got = m.wedge_array(u)
            worst = max(worst, float(np.max(np.abs(got - ref) / np.maximum(1, np.abs(ref)))))
        return worst <= 1e-12, f"max relative error {worst:.2e}"
    E.append(Expectation("closed-form-wedge", "generic wedge equals the Engel closed form",
                         WORKED_EXAMPLE, closed_form_all))

    def const_degree(name, d):
        def check():
            deg = pointwise_degree(sm[name], parameter_grid(sm[name], 50), warn=False)
            return bool(np.all(deg == d)), f"degrees {sorted(set(np.atleast_1d(deg).tolist()))}"
        return check
    E.append(Expectation("trivial-plane-degree", "trivial plane has degree 3", WORKED_EXAMPLE,
                         const_degree("trivial-plane", 3)))
    E.append(Expectation("deg3-degree", "exponential example has degree 3 everywhere",
                         WORKED_EXAMPLE, const_degree("deg3-exp", 3)))
    E.append(Expectation("deg5-degree", "vertical example has degree 5", WORKED_EXAMPLE,
                         const_degree("deg5-vertical", 5)))

    def deg3_wedge():
        m = sm["deg3-exp"]
        u = parameter_grid(m, 20)
        x, y = u.T
        got = m.wedge_array(u)
        want = np.zeros_like(got)
        want[:, 0] = np.exp(y)
        want[:, 3] = -np.exp(2 * y)
        err = float(np.max(np.abs(got - want)))
        return err <= 1e-12, f"max error {err:.2e}"
    E.append(Expectation("deg3-wedge", "wedge = e^y X1^X2 - e^{2y} X2^X3", COMPUTED, deg3_wedge))

    def deg3_system():
        m = sm["deg3-exp"]
        u = parameter_grid(m, 20)
        r, s = degree3_system_residual(m, u)
        err = float(max(np.max(np.abs(r)), np.max(s)))
        return err <= 1e-12, f"max residual {err:.2e}"
    E.append(Expectation("deg3-system", "degree-3 system and sufficient condition hold",
                         WORKED_EXAMPLE, deg3_system))

    def deg4_points():
        m = sm["deg4-parabola"]
        pts = {(1.0, 1.0): 4, (0.0, 0.0): 2, (2.0, 2.0): 2,
               tuple(deg4_curve(3.0, 1).tolist()): 3, tuple(deg4_curve(3.0, -1).tolist()): 3}
        got = {k: pointwise_degree(m, list(k), warn=False) for k in pts}
        return got == pts, str(got)
    E.append(Expectation("deg4-strata-points", "degrees 4, 2, 2, 3, 3 at sample points",
                         WORKED_EXAMPLE, deg4_points))

    def deg4_wedge():
        m = sm["deg4-parabola"]
        x, y = 1.0, 1.0
        w = m.wedge_array([x, y])
        want = [1.0, y - x, y - x * y + x * x / 2, 0, 0, 0]
        return bool(np.allclose(w, want, atol=1e-14)), str(w.tolist())
    E.append(Expectation("deg4-wedge", "wedge of the parabola example at (1, 1)", WORKED_EXAMPLE,
                         deg4_wedge))

    def deg4_curves():
        m = sm["deg4-parabola"]
        ys = np.concatenate([np.linspace(-0.9, -0.05, 20), np.linspace(2.05, 3.0, 20)])
        worst = 0.0
        for sigma in (1, -1):
            u = deg4_curve(ys, sigma)
            keep = (u[:, 0] >= -2) & (u[:, 0] <= 5)
            u, yy = u[keep], ys[keep]
            # curve velocity d/dy Phi(x(y), y)
            dx = 1 + sigma * (yy - 1) / np.sqrt(yy ** 2 - 2 * yy)
            val, jac = m.jet(u)
            vel = jac[..., 0] * dx[:, None] + jac[..., 1]
            c = m.group.frame_coefficients(val, vel)
            worst = max(worst, float(np.max(np.abs(c[:, 3]))),
                        float(np.max(np.abs(c[:, 2] + sigma * np.sqrt(yy ** 2 - 2 * yy)))))
        return worst <= 1e-10, f"max deviation {worst:.2e}"
    E.append(Expectation("deg4-curves", "curve frame coefficients: X4 part 0, X3 part "
                         "-sigma sqrt(y^2 - 2y)", WORKED_EXAMPLE, deg4_curves))

    def horizontality():
        from .manifold import is_horizontal_point
        a = is_horizontal_point(sm["deg3-exp"], [0.3, -0.2])
        b = is_horizontal_point(sm["deg5-vertical"], [0.3, -0.2])
        return bool(a and not b), f"deg3 horizontal={a}, deg5 horizontal={b}"
    E.append(Expectation("horizontal", "degree-3 example horizontal, degree-5 example not",
                         WORKED_EXAMPLE, horizontality))

    def half_plane_limit():
        from .blowup import subgroup_check
        ok, witness = subgroup_check(half_plane(), law)
        return (not ok and witness["test"] == "inverse"), str(witness)
    E.append(Expectation("deg4-limit-half-plane", "half-plane limit at the parabola origin "
                         "is not closed under inverses", WORKED_EXAMPLE, half_plane_limit))
    return entry


def half_plane():
    """``{(x1, 0, 0, x4) : x4 >= 0}`` in exponential coordinates of the Engel group."""
    from .blowup import ConeSet
    basis = np.array([[1.0, 0, 0, 0], [0, 0, 0, 1.0]]).T
    return ConeSet(basis, np.array([[0, 0, 0, 1.0]]))


ENTRIES = {"heisenberg1": lambda: heisenberg(1), "engel4": engel4, "e5": e5}


def get(name: str) -> CatalogEntry:
    if name.startswith("heisenberg") and name[len("heisenberg"):].isdigit():
        return heisenberg(int(name[len("heisenberg"):]))
    if name.startswith("abelian") and name[len("abelian"):].isdigit():
        alg = abelian_algebra(int(name[len("abelian"):]))
        return CatalogEntry(alg.name, alg, compute_group_law(alg))
    if name not in ENTRIES:
        raise PreconditionError(f"unknown catalog entry {name!r}")
    return ENTRIES[name]()
