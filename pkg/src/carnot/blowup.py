"""Blow-ups of submanifolds: dilated point clouds, limit sets and curve families.

Point clouds live in exponential coordinates centred at the base point, so
that the candidate limit ``Pi`` is a linear subspace and ``rho(a, b) =
N((-a) * b)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import NumericalError, PreconditionError
from .group import GroupLaw, HomogeneousNorm, dilate
from .manifold import AdaptedFrame, Submanifold, adapted_frame

BLOCK = 256


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    source: str
    attempted: int = 0
    undersampled: bool = False
    clipped: bool = False

    def __len__(self):
        return len(self.points)


# ---------------------------------------------------------------------------
# sets of the form {sum s_i b_i : a_j . x >= 0}


@dataclass(frozen=True)
class ConeSet:
    """Subset of a linear subspace (exponential coordinates) cut by half-spaces.

    ``basis`` is ``q x k`` with orthonormal columns; each row ``a`` of
    ``halfspaces`` imposes ``a . x >= 0``.
    """

    basis: np.ndarray
    halfspaces: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def q(self):
        return self.basis.shape[0]

    def contains(self, x, tol: float = 1e-10):
        x = np.asarray(x, dtype=float)
        proj = (x @ self.basis) @ self.basis.T
        ok = np.linalg.norm(x - proj, axis=-1) <= tol * np.maximum(1.0, np.linalg.norm(x, axis=-1))
        if self.halfspaces.size:
            ok &= np.all(x @ self.halfspaces.T >= -tol, axis=-1)
        return ok

    def is_linear(self) -> bool:
        return self.halfspaces.size == 0


def sample_set(S: ConeSet, norm: HomogeneousNorm, R: float, n: int, seed: int = 0,
               max_rounds: int = 200) -> PointCloud:
    """Uniform samples of ``S cap D_R`` (``D_R = {N < R}`` in exponential coordinates)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    k = S.basis.shape[1]
    # N(v) < R bounds |v^(j)| by eps_j R^j
    radius = float(np.sqrt(sum((e * R ** j) ** 2 for j, e in enumerate(norm.epsilons, 1))))
    got: List[np.ndarray] = []
    count = attempted = 0
    for _ in range(max_rounds):
        s = (2 * rng.random((max(4 * n, 1000), k)) - 1) * radius
        x = s @ S.basis.T
        keep = (norm(x) < R) & S.contains(x)
        attempted += len(x)
        got.append(x[keep])
        count += int(keep.sum())
        if count >= n:
            break
    pts = np.concatenate(got)[:n] if got else np.zeros((0, S.q))
    return PointCloud(pts, "subspace", attempted, len(pts) < n)


# ---------------------------------------------------------------------------
# dilated clouds


def _parameter_map(frame: AdaptedFrame, r: float):
    _, S_inv, _ = frame.frozen_frame(frame.base_parameter)
    return S_inv * np.power(r, np.array(frame.sigma, dtype=float))[None, :]


def blowup_points(m: Submanifold, frame: AdaptedFrame, r: float, U):
    """``delta_{1/r}(Phi(u0)^-1 Phi(U))`` in exponential coordinates."""
    law = m.group
    z = law.to_exponential(law.multiply(law.inverse(frame.base_point), m.phi(U)))
    return dilate(m.algebra, 1.0 / r, z)


def dilated_sample(m: Submanifold, u, r: float, R: float, n: int, norm: HomogeneousNorm,
                   seed: int = 0, frame: Optional[AdaptedFrame] = None,
                   max_rounds: int = 400) -> PointCloud:
    """``n`` points of ``delta_{1/r}(x^-1 Sigma) cap D_R``, ``x = Phi(u)``.

    Parameters are drawn uniformly in a box ``u + M [-c, c]^p`` adapted to
    the scale ``r`` (``M`` from the frame's pivot block), clipped to the
    domain; ``c`` is doubled while retained points reach the box boundary.
    """
    if r <= 0 or R <= 0:
        raise PreconditionError("r and R must be positive")
    if frame is None:
        with np.errstate(all="ignore"):
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                frame = adapted_frame(m, u)
    M = _parameter_map(frame, r)
    u0 = np.asarray(frame.base_parameter, dtype=float)
    lo = np.array([a for a, _ in m.domain])
    hi = np.array([b for _, b in m.domain])
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    c = 2.0 * max(1.0, R)
    batch = max(4 * n, 2000)
    for _ in range(12):
        got: List[np.ndarray] = []
        count = attempted = 0
        edge = clipped = False
        for _ in range(max_rounds):
            w = (2 * rng.random((batch, m.p)) - 1) * c
            U = u0 + w @ M.T
            inside_dom = np.all((U >= lo) & (U <= hi), axis=1)
            clipped |= not bool(np.all(inside_dom))
            w, U = w[inside_dom], U[inside_dom]
            attempted += batch
            pts = blowup_points(m, frame, r, U)
            keep = norm(pts) <= R
            if np.any(keep & (np.max(np.abs(w), axis=1) > 0.8 * c)):
                edge = True
                break
            got.append(pts[keep])
            count += int(keep.sum())
            if count >= n:
                break
        if not edge or clipped:
            break
        c *= 2
    pts = np.concatenate(got)[:n] if got else np.zeros((0, m.q))
    if len(pts) == 0:
        raise NumericalError(f"no sampled point lands in D_{R} at r={r}")
    return PointCloud(pts, "dilated-manifold", attempted, len(pts) < n, clipped)


# ---------------------------------------------------------------------------
# distances


def _exp_law(law: GroupLaw) -> GroupLaw:
    return law.exponential_law()


def directed_distance(a: PointCloud, b: PointCloud, norm: HomogeneousNorm, law: GroupLaw):
    """``sup_{x in a} min_{y in b} rho(x, y)`` and the per-point minima."""
    A = a.points if isinstance(a, PointCloud) else np.asarray(a, dtype=float)
    B = b.points if isinstance(b, PointCloud) else np.asarray(b, dtype=float)
    if len(A) == 0 or len(B) == 0:
        raise PreconditionError("empty point cloud")
    ex = _exp_law(law)
    mins = np.empty(len(A))
    for i in range(0, len(A), BLOCK):
        blk = A[i:i + BLOCK]
        d = norm(ex.multiply(-blk[:, None, :], B[None, :, :]))
        mins[i:i + BLOCK] = d.min(axis=1)
    return float(mins.max()), mins


def hausdorff_distance(a: PointCloud, b: PointCloud, norm: HomogeneousNorm, law: GroupLaw) -> float:
    return max(directed_distance(a, b, norm, law)[0], directed_distance(b, a, norm, law)[0])


def first_layer_gap(points, S: ConeSet, algebra) -> np.ndarray:
    """Lower bound for ``rho(x, S)``: Euclidean distance of the first-layer block
    of ``x`` to the first-layer projection of the span of ``S``."""
    idx = algebra.layer_indices(1)
    P = S.basis[idx, :]
    Qb, s, _ = np.linalg.svd(P, full_matrices=False)
    Qb = Qb[:, s > 1e-12]
    x1 = np.asarray(points, dtype=float)[..., idx]
    return np.linalg.norm(x1 - (x1 @ Qb) @ Qb.T, axis=-1)


def coordinate_deviation(points, S: ConeSet) -> np.ndarray:
    """Euclidean distance of points to the span of ``S`` (diagnostic)."""
    x = np.asarray(points, dtype=float)
    return np.linalg.norm(x - (x @ S.basis) @ S.basis.T, axis=-1)


def fit_slope(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    good = ys > 0
    if good.sum() < 2:
        return float("inf")
    return float(np.polyfit(np.log(xs[good]), np.log(ys[good]), 1)[0])


# ---------------------------------------------------------------------------
# subgroups


def subgroup_check(S, law: GroupLaw, samples: int = 200, seed: int = 0, norm=None,
                   tol: float = 1e-10):
    """Is ``S`` (a :class:`ConeSet` or a basis matrix) a subgroup?

    Exact bracket closure of the span, then sampled closure under products
    and inverses (``-x`` in exponential coordinates).  Returns
    ``(True, None)`` or ``(False, witness)`` with ``witness`` a dict naming
    the failing test and the offending point(s).
    """
    if not isinstance(S, ConeSet):
        basis = np.asarray(S, dtype=float)
        S = ConeSet(np.linalg.qr(basis)[0], np.zeros((0, basis.shape[0])))
    alg = law.algebra
    ok, wit = alg.subalgebra_closure_check([tuple(v) for v in S.basis.T])
    if not ok:
        a, b, br = wit
        return False, {"test": "bracket", "pair": (a, b), "bracket": list(map(float, br))}
    ex = _exp_law(law)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    k = S.basis.shape[1]
    pts = []
    while sum(len(p) for p in pts) < samples:
        s = rng.standard_normal((4 * samples, k))
        x = s @ S.basis.T
        pts.append(x[S.contains(x)])
    X = np.concatenate(pts)[:samples]
    # simple generators of the cone: exercise points on its boundary too
    if not S.is_linear():
        X = np.concatenate([_boundary_points(S), X])
    for x in X:
        if not S.contains(-x, tol)[()]:
            return False, {"test": "inverse", "point": x.tolist(), "inverse": (-x).tolist()}
    Y = X[rng.permutation(len(X))]
    prod = ex.multiply(X, Y)
    bad = ~S.contains(prod, tol)
    if np.any(bad):
        i = int(np.argmax(bad))
        return False, {"test": "product", "points": [X[i].tolist(), Y[i].tolist()],
                       "product": prod[i].tolist()}
    return True, None


def _boundary_points(S: ConeSet) -> np.ndarray:
    out = []
    for j in range(S.basis.shape[1]):
        for sgn in (1, -1):
            v = sgn * S.basis[:, j]
            if S.contains(v):
                out.append(v)
    return np.array(out) if out else np.zeros((0, S.q))


def estimate_limit_set(cloud: PointCloud, rel_tol: float = 0.2, side_tol: float = 0.02) -> ConeSet:
    """Span of the dominant principal directions of a cloud, with half-spaces
    for directions along which the cloud stays on one side."""
    X = cloud.points
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    k = int(np.sum(s > rel_tol * s[0]))
    basis = Vt[:k].T
    # snap to coordinate axes when the span is (numerically) a coordinate subspace
    axes = np.argsort(-np.linalg.norm(basis, axis=1))[:k]
    E = np.zeros_like(basis)
    E[np.sort(axes), np.arange(k)] = 1.0
    if np.linalg.norm(basis @ basis.T - E @ E.T, 2) < 0.2:
        basis = E
    half = []
    proj = X @ basis
    scale = np.max(np.abs(proj), axis=0)
    for j in range(k):
        if np.min(proj[:, j]) >= -side_tol * scale[j]:
            half.append(basis[:, j])
        elif np.max(proj[:, j]) <= side_tol * scale[j]:
            half.append(-basis[:, j])
    return ConeSet(basis, np.array(half) if half else np.zeros((0, X.shape[1])))


# ---------------------------------------------------------------------------
# blow-up verification


def verify_blowup(m: Submanifold, u, radii: Sequence[float], R: float, n: int,
                  norm: HomogeneousNorm, seed: int = 0, limit: Optional[ConeSet] = None,
                  reference_samples: Optional[int] = None):
    """Hausdorff distances between dilated clouds and samples of the limit set.

    At points of maximum degree the limit is ``Pi`` from the adapted frame;
    elsewhere ``limit`` may be supplied, or it is estimated from the cloud at
    1/100 of the smallest radius.  The report also gives the subgroup test of the
    limit, a first-layer lower bound of the directed distance and the
    Euclidean coordinate deviation.
    """
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("radii must be decreasing")
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        frame = adapted_frame(m, u)
    law = m.group
    if limit is None:
        if frame.maximal:
            limit = ConeSet(frame.selected_basis(), np.zeros((0, m.q)))
            origin = "adapted frame"
        else:
            cloud = dilated_sample(m, u, radii[-1] / 100, R, n, norm, seed, frame)
            limit = estimate_limit_set(cloud)
            origin = "estimated at 1/100 of the smallest radius"
    else:
        origin = "given"
    ref = sample_set(limit, norm, R, reference_samples or n, seed + 1)
    rows = []
    for i, r in enumerate(radii):
        cloud = dilated_sample(m, u, r, R, n, norm, seed + 2 + i, frame)
        d_ab, mins = directed_distance(cloud, ref, norm, law)
        d_ba = directed_distance(ref, cloud, norm, law)[0]
        rows.append({"r": r, "hausdorff": max(d_ab, d_ba), "directed_to_limit": d_ab,
                     "directed_from_limit": d_ba, "cloud_points": len(cloud),
                     "limit_points": len(ref), "undersampled": cloud.undersampled,
                     "first_layer_lower_bound": float(first_layer_gap(cloud.points, limit,
                                                                      m.algebra).max()),
                     "coordinate_deviation": float(coordinate_deviation(cloud.points,
                                                                        limit).max())})
    slope = fit_slope([r["r"] for r in rows], [r["hausdorff"] for r in rows])
    coord_slope = fit_slope([r["r"] for r in rows], [r["coordinate_deviation"] for r in rows])
    is_sub, witness = subgroup_check(limit, law, seed=seed)
    return {
        "maximal": frame.maximal, "point_degree": frame.point_degree,
        "alphas": list(frame.alphas), "limit_basis": limit.basis.T.tolist(),
        "limit_halfspaces": limit.halfspaces.tolist(), "limit_origin": origin,
        "rows": rows, "slope": slope, "coordinate_slope": coord_slope,
        "limit_is_subgroup": is_sub, "subgroup_witness": witness,
        "flags": [] if is_sub else ["limit set fails subgroup check"],
    }


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class CurveSolution:
    lam: np.ndarray
    t_grid: np.ndarray
    states: np.ndarray
    param_states: np.ndarray
    coords: np.ndarray
    residual: float
    min_quality: float
    last_inside: np.ndarray


def _rhs(frame: AdaptedFrame, u, t, lam):
    _, S_inv, quality = frame.frozen_frame(u)
    sig = np.array(frame.sigma, dtype=float)
    # t^(sigma-1) with 0^0 = 1
    tp = np.where(sig == 1, 1.0, np.power(t, sig - 1))
    rhs = lam * tp
    return np.einsum("...ij,...j->...i", S_inv, rhs), quality


def integrate_curve(m: Submanifold, frame: AdaptedFrame, lam, t_max: float, steps: int = 10 ** 4,
                    min_quality: float = 0.5, confine: bool = False) -> CurveSolution:
    """Solve ``d/dt gamma = sum_j lam_j v_j(gamma) t^(sigma(j)-1)``, ``gamma(0) = Phi(u0)``.

    The equation is pulled back to parameters: with the frozen-pivot frame,
    ``du/dt = S(u)^-1 (lam_j t^(sigma(j)-1))_j``.  Classical RK4 with a fixed
    step; ``lam`` may carry leading batch axes.  ``coords`` are the
    exponential coordinates of ``Phi(u0)^-1 gamma`` in the adapted basis.
    With ``confine`` a trajectory leaving the parameter domain is frozen at
    its last inside state; ``last_inside`` holds the final valid step index.
    """
    if not frame.maximal:
        raise PreconditionError("curves need a base point of maximum degree")
    lam = np.asarray(lam, dtype=float)
    if lam.shape[-1] != m.p:
        raise PreconditionError(f"lambda needs {m.p} entries")
    h = t_max / steps
    u = np.broadcast_to(frame.base_parameter, lam.shape).copy()
    lo = np.array([a for a, _ in m.domain])
    hi = np.array([b for _, b in m.domain])
    active = np.ones(lam.shape[:-1], dtype=bool)
    last = np.full(lam.shape[:-1], steps)
    us = [u.copy()]
    worst = np.inf
    for i in range(steps):
        t = i * h
        lam_i = lam * active[..., None]
        # stages of a step that leaves the domain are clipped; that step is discarded
        stage = (lambda v: np.clip(v, lo, hi)) if confine else (lambda v: v)
        k1, q1 = _rhs(frame, u, t, lam_i)
        k2, q2 = _rhs(frame, stage(u + 0.5 * h * k1), t + 0.5 * h, lam_i)
        k3, q3 = _rhs(frame, stage(u + 0.5 * h * k2), t + 0.5 * h, lam_i)
        k4, q4 = _rhs(frame, stage(u + h * k3), t + h, lam_i)
        worst = min(worst, float(np.min([q1, q2, q3, q4])))
        if worst < min_quality:
            raise NumericalError(f"frozen frame degenerates at t={t:.3g}: pivot quality "
                                 f"{worst:.3f} < {min_quality}")
        new = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if confine:
            out = active & ~np.all((new >= lo) & (new <= hi), axis=-1)
            last = np.where(out, i, last)
            active &= ~out
            new = np.where(active[..., None], new, u)
        u = new
        us.append(u.copy())
    U = np.stack(us, axis=-2)
    t_grid = h * np.arange(steps + 1)
    states = m.phi(U)
    law = m.group
    z = law.to_exponential(law.multiply(law.inverse(frame.base_point), states))
    coords = z @ frame.basis_change
    # tangency residual: D Phi(u) u' against the frame combination, in frame coordinates
    mid = U[..., steps // 2, :]
    tm = t_grid[steps // 2]
    du, _ = _rhs(frame, mid, tm, lam)
    V, _, _ = frame.frozen_frame(mid)
    T = m.frame_columns(mid)
    lhs = np.einsum("ji,...jk,...k->...i", frame.basis_change, T, du)
    sig = np.array(frame.sigma, dtype=float)
    rhs = np.einsum("...ij,...j->...i", V, lam * np.where(sig == 1, 1.0, np.power(tm, sig - 1)))
    residual = float(np.max(np.abs(lhs - rhs)))
    if residual > 1e-8:
        raise NumericalError(f"tangency residual {residual:.2e}")
    return CurveSolution(lam, t_grid, states, U, coords, residual, worst, last)


@dataclass(frozen=True)
class AsymptoticFit:
    G: np.ndarray
    residual_slopes: Dict[int, float]
    sigma: Tuple[int, ...]
    complementary: Tuple[int, ...]


def extract_G(sol: CurveSolution, frame: AdaptedFrame, t_values: Sequence[float]) -> AsymptoticFit:
    """``G_i = lim c_i(t) / t^sigma(i)`` by Richardson extrapolation at ``t`` and ``t/2``.

    ``c_i`` are the selected coordinates; times are snapped to the step grid.  Residual slopes are fitted in
    log-log over ``t_values`` for ``|c_i(t) - G_i t^sigma(i)|`` (selected
    rows) and ``|c_j(t)|`` (complementary rows); both should be at least
    one order above the layer.
    """
    t_values = np.sort(np.asarray(t_values, dtype=float))
    if len(t_values) < 2:
        raise PreconditionError("need at least two time scales")
    grid = sol.t_grid

    h = grid[1] - grid[0]
    # snap to the step grid; the smallest time uses an even index so t/2 is on it
    idx = np.unique(np.clip(np.rint(t_values / h).astype(int), 2, len(grid) - 1))
    idx[0] += idx[0] % 2
    t_values = grid[idx]

    def at(t):
        return sol.coords[..., int(round(t / h)), :]

    sel = list(frame.selected_rows)
    sig = np.array(frame.sigma, dtype=float)
    t0 = t_values[0]
    g1 = at(t0)[..., sel] / t0 ** sig
    g2 = at(t0 / 2)[..., sel] / (t0 / 2) ** sig
    G = 2 * g2 - g1
    if not np.all(np.isfinite(G)):
        raise NumericalError("extrapolation did not converge")
    q = sol.coords.shape[-1]
    slopes: Dict[int, float] = {}
    comp = tuple(i for i in range(q) if i not in sel)
    for i in range(q):
        vals = []
        for t in t_values:
            c = at(t)[..., i]
            if i in sel:
                j = sel.index(i)
                c = c - G[..., j] * t ** sig[j]
            vals.append(float(np.max(np.abs(c))))
        vals = np.array(vals)
        # below round-off the relation is exact and no rate can be fitted
        slopes[i] = float("inf") if np.max(vals) < 1e-12 else fit_slope(t_values, vals)
    return AsymptoticFit(G, slopes, frame.sigma, comp)


# ---------------------------------------------------------------------------
# coverage


def coverage_diagnostic(m: Submanifold, frame: AdaptedFrame, targets, t_max: float,
                        norm: HomogeneousNorm, steps: int = 200, directions: int = 64,
                        rounds: int = 6, seed: int = 0):
    """How well curves from the base point reach nearby points of ``Sigma``.

    For every target parameter ``z`` the distance ``rho(gamma(t, lam), Phi(z))``
    is minimized over ``t in [0, t_max]`` and ``lam`` on the homogeneous unit
    sphere: a coarse batch of directions first, then ``rounds`` batches of
    perturbations around the best direction with shrinking spread.  Each
    batch is one vectorized integration.  Diagnostic only.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    law = m.group
    sig = np.array(frame.sigma, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def normalize(lam):
        scale = np.max(np.abs(lam) ** (1 / sig), axis=-1, keepdims=True)
        return lam / np.maximum(scale, 1e-300) ** sig

    def best(lams, pz):
        sol = integrate_curve(m, frame, lams, t_max, steps, min_quality=0.0, confine=True)
        d = norm.distance(law, sol.states, pz)
        d = np.where(np.arange(steps + 1)[None, :] <= sol.last_inside[:, None], d, np.inf)
        j, i = np.unravel_index(np.argmin(d), d.shape)
        return float(d[j, i]), lams[j], float(sol.t_grid[i])

    coarse = normalize(rng.standard_normal((directions, m.p)))
    report = []
    for z in targets:
        pz = m.phi(z)
        miss, lam, t = best(coarse, pz)
        spread = 0.5
        for _ in range(rounds):
            cand = normalize(lam + spread * rng.standard_normal((directions, m.p)))
            cand = np.concatenate([lam[None], cand])
            miss, lam, t = best(cand, pz)
            spread /= 2
        report.append({"target": z.tolist(), "miss": miss, "t": t, "lambda": lam.tolist(),
                       "at_time_limit": bool(np.isclose(t, t_max))})
    return {"worst_miss": max(r["miss"] for r in report), "targets": report}
