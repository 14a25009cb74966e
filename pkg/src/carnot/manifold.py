"""Parametrized submanifolds: tangent p-vectors, degrees and adapted frames.

A submanifold is given by ``q`` expressions ``Phi^1..Phi^q`` in ``p``
parameters over an axis-aligned box, in the coordinates of a
:class:`~carnot.group.GroupLaw`.  Tangent vectors are expressed in the
left-invariant frame by solving ``X(Phi(u)) c = dPhi/du_i``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from . import expr as ex
from .errors import DimensionError, NumericalError, PreconditionError
from .group import GroupLaw
from .multivec import DEGREE_TOL, NEAR_DEGENERATE_TOL, NearDegenerateWarning, PVector

DEFAULT_NAMES = {1: ("t",), 2: ("x", "y"), 3: ("x", "y", "z")}


class Submanifold:
    """``Phi: U -> G`` with ``U`` a box in ``R^p``.

    Parameters
    ----------
    group : GroupLaw
    components : sequence of str or Expr, length ``q``
    domain : sequence of ``(lo, hi)`` pairs, one per parameter
    params : parameter names (defaults: ``t``; ``x, y``; ``x, y, z``; ``u1, ...``)
    """

    def __init__(self, group: GroupLaw, components, domain, params=None, name: str = "",
                 immersion_samples: int = 5):
        self.group = group
        self.name = name
        self.domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        self.p = len(self.domain)
        if self.p < 1 or any(lo >= hi for lo, hi in self.domain):
            raise PreconditionError("domain must be a non-empty box")
        if params is None:
            params = DEFAULT_NAMES.get(self.p, tuple(f"u{i + 1}" for i in range(self.p)))
        self.params = tuple(params)
        if len(self.params) != self.p:
            raise DimensionError("one name per parameter is required")
        comps = [ex.parse(c) if isinstance(c, str) else c for c in components]
        if len(comps) != group.q:
            raise DimensionError(f"need {group.q} components, got {len(comps)}")
        for c in comps:
            unknown = ex.variables(c) - set(self.params)
            if unknown:
                raise PreconditionError(f"unbound variables {sorted(unknown)} in component")
        self.components = tuple(comps)
        if self.p > group.q:
            raise DimensionError("parameter dimension exceeds group dimension")
        if immersion_samples:
            self.check_immersion(immersion_samples)

    @property
    def q(self):
        return self.group.q

    @property
    def algebra(self):
        return self.group.algebra

    def component_strings(self) -> List[str]:
        return [ex.to_string(c) for c in self.components]

    # -- evaluation -----------------------------------------------------
    def check_domain(self, u, tol: float = 1e-12):
        u = np.asarray(u, dtype=float)
        if u.shape[-1:] != (self.p,):
            raise DimensionError(f"parameter points need {self.p} entries")
        lo = np.array([a for a, _ in self.domain])
        hi = np.array([b for _, b in self.domain])
        span = hi - lo
        if np.any(u < lo - tol * span) or np.any(u > hi + tol * span):
            raise PreconditionError("parameter point outside the domain")
        return u

    def _duals(self, u):
        u = self.check_domain(u)
        return [ex.eval_point(c, self.params, u) for c in self.components], u

    def phi(self, u):
        duals, u = self._duals(u)
        return np.stack([np.broadcast_to(d.value, u.shape[:-1]) for d in duals], axis=-1)

    def jet(self, u):
        """``(Phi(u), DPhi(u))`` with shapes ``(..., q)`` and ``(..., q, p)``."""
        duals, u = self._duals(u)
        val = np.stack([np.broadcast_to(d.value, u.shape[:-1]) for d in duals], axis=-1)
        jac = np.stack([np.broadcast_to(d.partials, u.shape[:-1] + (self.p,)) for d in duals],
                       axis=-2)
        return val, jac

    def frame_columns(self, u):
        """Tangent vectors ``dPhi/du_i`` in the left-invariant frame: ``(..., q, p)``."""
        val, jac = self.jet(u)
        A = self.group.field_matrix(val)
        return _unit_lower_solve(A, jac)

    def wedge_array(self, u):
        """Coefficients of ``dPhi/du_1 ^ ... ^ dPhi/du_p`` over ``combinations(range(q), p)``."""
        T = self.frame_columns(u)
        idx = list(combinations(range(self.q), self.p))
        sub = np.stack([T[..., list(J), :] for J in idx], axis=-3)
        return np.linalg.det(sub)

    def index_degrees(self) -> np.ndarray:
        deg = self.algebra.degrees
        return np.array([sum(deg[j] for j in J) for J in combinations(range(self.q), self.p)])

    def check_immersion(self, n: int = 5, tol: float = 1e-10):
        axes = [np.linspace(lo, hi, n) for lo, hi in self.domain]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.p)
        _, jac = self.jet(grid)
        s = np.linalg.svd(jac, compute_uv=False)
        bad = s[:, -1] <= tol * np.maximum(1.0, s[:, 0])
        if np.any(bad):
            raise PreconditionError(f"Jacobian is rank deficient at u={grid[bad][0].tolist()}")


def _unit_lower_solve(A, B):
    """Forward substitution for unit lower-triangular ``A`` (leading axes broadcast)."""
    q = A.shape[-1]
    out = np.zeros(np.broadcast_shapes(A.shape[:-2], B.shape[:-2]) + B.shape[-2:])
    for i in range(q):
        acc = B[..., i, :]
        for j in range(i):
            acc = acc - A[..., i, j, None] * out[..., j, :]
        out[..., i, :] = acc
    return out


# ---------------------------------------------------------------------------
# degrees


def degrees_from_coefficients(coeffs, index_degrees, tolerance: float = DEGREE_TOL,
                              warn: bool = True):
    """Pointwise degree from wedge coefficient arrays ``(..., nJ)``."""
    coeffs = np.asarray(coeffs, dtype=float)
    total = np.sqrt(np.sum(coeffs ** 2, axis=-1))
    if np.any(total == 0):
        raise PreconditionError("tangent p-vector vanishes (rank deficiency)")
    levels = np.unique(index_degrees)
    comp = np.stack([np.sqrt(np.sum(coeffs[..., index_degrees == r] ** 2, axis=-1))
                     for r in levels], axis=-1)
    above = comp > tolerance * total[..., None]
    top = above.shape[-1] - 1 - np.argmax(above[..., ::-1], axis=-1)
    deg = levels[top]
    if warn:
        decisive = np.take_along_axis(comp, top[..., None], axis=-1)[..., 0]
        near = decisive <= max(NEAR_DEGENERATE_TOL, tolerance) * total
        if np.any(near):
            warnings.warn(f"{int(np.sum(near))} degree decision(s) near the tolerance",
                          NearDegenerateWarning, stacklevel=2)
    return deg


@dataclass(frozen=True)
class TangentData:
    point: np.ndarray
    tau: PVector
    tau_d: PVector
    point_degree: int
    wedge: PVector
    columns: np.ndarray = field(repr=False)


def _pvector(m: Submanifold, coeffs) -> PVector:
    idx = combinations(range(m.q), m.p)
    return PVector(m.algebra, m.p, {J: float(c) for J, c in zip(idx, coeffs)})


def tangent_pvector(m: Submanifold, u, degree: Optional[int] = None,
                    tolerance: float = DEGREE_TOL) -> TangentData:
    """Unit tangent p-vector at ``Phi(u)`` and its projection on degree ``d``.

    ``degree`` defaults to the pointwise degree; pass the degree of the
    submanifold to obtain ``tau^d`` in the sense of the intrinsic measure.
    """
    u = np.asarray(u, dtype=float)
    T = m.frame_columns(u)
    if np.linalg.matrix_rank(T, tol=1e-12 * max(1.0, np.abs(T).max())) < m.p:
        raise PreconditionError(f"tangent vectors are dependent at u={u.tolist()}")
    w = _pvector(m, m.wedge_array(u))
    d = w.degree(tolerance)
    tau = w / w.norm()
    return TangentData(m.phi(u), tau, tau.degree_projection(d if degree is None else degree),
                       d, w, T)


def pointwise_degree(m: Submanifold, u, tolerance: float = DEGREE_TOL, warn: bool = True):
    """Degree at one point or at an array of points (last axis = parameters)."""
    d = degrees_from_coefficients(m.wedge_array(u), m.index_degrees(), tolerance, warn)
    return int(d) if np.ndim(d) == 0 else d


def parameter_grid(m: Submanifold, n: int = 21, interior: bool = False) -> np.ndarray:
    axes = []
    for lo, hi in m.domain:
        if interior:
            h = (hi - lo) / n
            axes.append(lo + h * (np.arange(n) + 0.5))
        else:
            axes.append(np.linspace(lo, hi, n))
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m.p)


def submanifold_degree(m: Submanifold, grid=None, tolerance: float = DEGREE_TOL):
    """``(max degree over the grid, maximizing sample)``."""
    if grid is None:
        grid = parameter_grid(m)
    grid = np.asarray(grid, dtype=float).reshape(-1, m.p)
    if grid.shape[0] == 0:
        raise PreconditionError("empty grid")
    d = np.atleast_1d(pointwise_degree(m, grid, tolerance, warn=False))
    k = int(np.argmax(d))
    return int(d[k]), grid[k]


def is_horizontal_point(m: Submanifold, u, tolerance: float = DEGREE_TOL):
    Q = m.algebra.homogeneous_dimension()
    d = pointwise_degree(m, u, tolerance)
    return d < Q - (m.q - m.p)


# ---------------------------------------------------------------------------
# adapted frames


@dataclass(frozen=True)
class AdaptedFrame:
    """Frame of the tangent space at ``Phi(u)`` adapted to the grading.

    ``basis_change`` is block-orthogonal; its columns are the new graded basis
    ``X_j^k`` written in the original one, ordered layer by layer with the
    selected vectors first in each layer.  ``frame_matrix`` holds ``C`` with
    ``v_j = sum_i C_ij X_i^new``; ``vectors`` is the same frame in the
    original basis.  ``sigma[j]`` is the layer of ``v_j``.
    """

    submanifold: Submanifold
    base_parameter: np.ndarray
    base_point: np.ndarray
    alphas: Tuple[int, ...]
    basis_change: np.ndarray
    frame_matrix: np.ndarray
    vectors: np.ndarray
    selected_rows: Tuple[int, ...]
    sigma: Tuple[int, ...]
    pivot_scale: float
    point_degree: int
    maximal: bool

    @property
    def degree(self) -> int:
        return sum(k * a for k, a in enumerate(self.alphas, start=1))

    def selected_basis(self) -> np.ndarray:
        """The selected ``X_j^k`` as columns in the original basis (``q x p``)."""
        return self.basis_change[:, list(self.selected_rows)]

    def sigma_of(self, j: int) -> int:
        """Layer of the 1-based column index ``j``."""
        return self.sigma[j - 1]

    def frozen_frame(self, u):
        """Frame ``v(y)`` at nearby parameters by the frozen-pivot rule.

        Returns ``(V, S_inv, quality)``: ``V`` are the frame vectors in the
        adapted basis, ``S_inv`` maps frame coefficients to parameter
        velocities and ``quality`` is the smallest singular value of the pivot
        block relative to its base value.
        """
        m = self.submanifold
        T = m.frame_columns(u)
        Tn = np.einsum("ji,...jk->...ik", self.basis_change, T)
        S = Tn[..., list(self.selected_rows), :]
        smin = np.linalg.svd(S, compute_uv=False)[..., -1]
        S_inv = np.linalg.inv(S)
        return Tn @ S_inv, S_inv, smin / self.pivot_scale


def adapted_frame(m: Submanifold, u, max_degree: Optional[int] = None,
                  tolerance: float = DEGREE_TOL, grid=None) -> AdaptedFrame:
    """Top-down elimination producing an adapted graded basis and frame at ``u``.

    For layers ``k = step, ..., 1`` the remaining tangent vectors are projected
    on ``V_k``; columns are pivoted by largest projection norm, their
    projections orthonormalized into ``X_j^k`` and eliminated from the other
    vectors.  ``max_degree`` is the degree of the submanifold (sampled on
    ``grid`` if omitted); a frame at a point of lower degree is still built
    but flagged non-maximal, with a warning.
    """
    alg = m.algebra
    u = m.check_domain(np.asarray(u, dtype=float))
    T = m.frame_columns(u)
    d_point = pointwise_degree(m, u, tolerance)
    if max_degree is None:
        max_degree = max(submanifold_degree(m, grid, tolerance)[0], d_point)
    maximal = d_point >= max_degree
    if not maximal:
        warnings.warn(f"frame requested at a point of degree {d_point} < {max_degree}",
                      stacklevel=2)
    scale = max(1.0, float(np.abs(T).max()))
    remaining = T.copy()
    groups = {}
    new_blocks = {}
    for k in range(alg.step, 0, -1):
        rows = alg.layer_indices(k)
        if remaining.shape[1] == 0:
            groups[k] = np.zeros((alg.q, 0))
            new_blocks[k] = np.zeros((len(rows), 0))
            continue
        B = remaining[rows, :]
        _, R, piv = scipy.linalg.qr(B, pivoting=True, mode="economic")
        diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
        alpha = int(np.sum(diag > np.sqrt(tolerance) * scale))
        sel = list(piv[:alpha])
        rest = [j for j in range(remaining.shape[1]) if j not in sel]
        if alpha:
            Qk, Rk = np.linalg.qr(B[:, sel])
            # sign convention: largest entry of each new basis vector is positive
            flip = np.sign(Qk[np.argmax(np.abs(Qk), axis=0), np.arange(alpha)])
            Qk, Rk = Qk * flip, Rk * flip[:, None]
            W = np.linalg.solve(Rk.T, remaining[:, sel].T).T
            coeff = Qk.T @ B[:, rest]
            others = remaining[:, rest] - W @ coeff
            others[rows, :] = 0.0
        else:
            Qk = np.zeros((len(rows), 0))
            W = np.zeros((alg.q, 0))
            others = remaining[:, rest]
            others[rows, :] = 0.0
        groups[k] = W
        new_blocks[k] = Qk
        remaining = others
    alphas = tuple(groups[k].shape[1] for k in range(1, alg.step + 1))
    deg = sum(k * a for k, a in enumerate(alphas, start=1))
    if deg != d_point:
        raise NumericalError(f"elimination gives degree {deg} but the tangent p-vector has "
                             f"degree {d_point}")
    # complete the selected vectors to an orthonormal basis of each layer
    basis = np.zeros((alg.q, alg.q))
    selected = []
    sigma = []
    for k in range(1, alg.step + 1):
        rows = alg.layer_indices(k)
        Qk = new_blocks[k]
        a = Qk.shape[1]
        full = _complete_orthonormal(Qk, len(rows))
        basis[np.ix_(rows, rows)] = full
        selected += rows[:a]
        sigma += [k] * a
    Tn = basis.T @ T
    S = Tn[selected, :]
    S_inv = np.linalg.inv(S)
    C = Tn @ S_inv
    return AdaptedFrame(m, u, m.phi(u), alphas, basis, C, basis @ C, tuple(selected),
                        tuple(sigma), float(np.linalg.svd(S, compute_uv=False)[-1]),
                        d_point, bool(maximal))


def _complete_orthonormal(Qk: np.ndarray, n: int) -> np.ndarray:
    a = Qk.shape[1]
    if a == 0:
        return np.eye(n)
    full, _ = np.linalg.qr(np.hstack([Qk, np.eye(n)]))
    full = full[:, :n]
    full[:, :a] = Qk
    # Gram-Schmidt against the exact Qk columns for the completion
    for j in range(a, n):
        v = full[:, j] - full[:, :j] @ (full[:, :j].T @ full[:, j])
        full[:, j] = v / np.linalg.norm(v)
    return full


def pi_sigma(frame: AdaptedFrame) -> np.ndarray:
    """Orthonormal basis (``q x p``) of the subspace spanned by the selected ``X_j^k``."""
    if not frame.maximal:
        raise PreconditionError("the base point does not have maximum degree")
    return frame.selected_basis()


def _rref(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Reduced row echelon form of a full-row-rank float matrix."""
    A = np.array(M, dtype=float)
    r = 0
    for c in range(A.shape[1]):
        if r == A.shape[0]:
            break
        piv = r + int(np.argmax(np.abs(A[r:, c])))
        if abs(A[piv, c]) <= tol:
            continue
        A[[r, piv]] = A[[piv, r]]
        A[r] /= A[r, c]
        for i in range(A.shape[0]):
            if i != r:
                A[i] -= A[i, c] * A[r]
        r += 1
    return A


def rational_graded_basis(frame: AdaptedFrame, max_denominator: int = 10 ** 4):
    """Rational graded basis whose leading vectors per layer span the selected ones.

    The selected span of each layer is brought to reduced row echelon form
    and rounded to nearby fractions; the layer is completed by coordinate
    vectors.  Returns ``(columns, selected)`` with ``selected`` the indices of
    the vectors spanning ``Pi``.  Raises :class:`NumericalError` when the span
    is not rational up to ``1e-10``.
    """
    alg = frame.submanifold.algebra
    sel = set(frame.selected_rows)
    cols: List[Tuple[Fraction, ...]] = []
    selected: List[int] = []
    for k in range(1, alg.step + 1):
        idx = alg.layer_indices(k)
        chosen = [j for j in idx if j in sel]
        vecs: List[List[Fraction]] = []
        if chosen:
            R = _rref(frame.basis_change[np.ix_(idx, chosen)].T)
            vecs = [[Fraction(float(c)).limit_denominator(max_denominator) for c in row]
                    for row in R]
            approx = np.array(vecs, dtype=float)
            P_new = np.linalg.qr(approx.T)[0]
            P_old = np.linalg.qr(frame.basis_change[np.ix_(idx, chosen)])[0]
            if np.linalg.norm(P_new @ P_new.T - P_old @ P_old.T, 2) > 1e-10:
                raise NumericalError(f"selected span in layer {k} is not rational")
        n_sel = len(vecs)
        for e in range(len(idx)):
            if len(vecs) == len(idx):
                break
            cand = [Fraction(int(i == e)) for i in range(len(idx))]
            if np.linalg.matrix_rank(np.array(vecs + [cand], dtype=float)) > len(vecs):
                vecs.append(cand)
        for n, v in enumerate(vecs):
            full = [Fraction(0)] * alg.q
            for i, c in zip(idx, v):
                full[i] = c
            if n < n_sel:
                selected.append(len(cols))
            cols.append(tuple(full))
    return cols, selected


def pi_sigma_ideal_check(frame: AdaptedFrame):
    """Ideal membership test for ``Pi`` in graded coordinates adapted to it.

    The algebra is rewritten exactly in :func:`rational_graded_basis`, its
    group law recomputed, and :func:`carnot.group.ideal_membership_check`
    applied to the indices spanning ``Pi``.
    """
    from .group import compute_group_law, ideal_membership_check
    pi_sigma(frame)
    cols, selected = rational_graded_basis(frame)
    alg = frame.submanifold.algebra.change_basis(cols)
    return ideal_membership_check(compute_group_law(alg), selected)


# ---------------------------------------------------------------------------
# local graph


@dataclass(frozen=True)
class LocalGraph:
    """``phi`` on a grid of the plane, with the complementary coordinates."""

    s_grid: np.ndarray
    values: np.ndarray
    parameters: np.ndarray
    jacobian_error: float


def local_graph(m: Submanifold, frame: AdaptedFrame, radius: float, n: int = 11,
                newton_tol: float = 1e-12, max_iter: int = 50) -> LocalGraph:
    """Write ``Phi(u_0)^-1 Phi`` near the base point as a graph over the selected directions.

    Points of the group are taken in exponential coordinates and expressed in
    the adapted basis; for ``s`` in a grid of ``[-radius, radius]^p`` the
    parameters with selected coordinates ``s`` are found by Newton iteration.
    Returns the complementary coordinates and checks that the Jacobian of the
    graph map at 0 equals the frame matrix.
    """
    if not frame.maximal:
        raise PreconditionError("the base point does not have maximum degree")
    law = m.group
    base_inv = law.inverse(frame.base_point)
    sel = list(frame.selected_rows)
    comp = [i for i in range(m.q) if i not in sel]
    B = frame.basis_change

    def coords(u):
        z = law.to_exponential(law.multiply(base_inv, m.phi(u)))
        return z @ B

    def solve(s, u0):
        u = u0.copy()
        for _ in range(max_iter):
            c = coords(u)
            r = c[sel] - s
            if np.max(np.abs(r)) < newton_tol:
                return u, c
            h = 1e-7
            J = np.column_stack([(coords(u + h * e)[sel] - coords(u - h * e)[sel]) / (2 * h)
                                 for e in np.eye(m.p)])
            u = u - np.linalg.solve(J, r)
            m.check_domain(u)
        raise NumericalError(f"Newton iteration did not converge at s={s.tolist()}")

    u0 = frame.base_parameter
    axes = [np.linspace(-radius, radius, n)] * m.p
    S = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m.p)
    order = np.argsort(np.linalg.norm(S, axis=1))
    values = np.zeros((len(S), len(comp)))
    params = np.zeros((len(S), m.p))
    for idx in order:
        s = S[idx]
        u, c = solve(s, u0)
        values[idx] = c[comp]
        params[idx] = u
    # Jacobian of s -> full adapted coordinates at s = 0
    h = 1e-6
    cols = []
    for e in np.eye(m.p):
        up, cp = solve(h * e, u0)
        um, cm = solve(-h * e, u0)
        cols.append((cp - cm) / (2 * h))
    J = np.column_stack(cols)
    err = float(np.max(np.abs(J - frame.frame_matrix)))
    if err > 1e-6:
        raise NumericalError(f"graph Jacobian differs from the frame matrix by {err:.2e}")
    return LocalGraph(S, values, params, err)
