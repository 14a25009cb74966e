"""Intrinsic measure, metric factor and the density of the Riemannian area.

The intrinsic density of a parametrized submanifold of degree ``d`` is the
norm of the degree-``d`` part of ``dPhi/du_1 ^ ... ^ dPhi/du_p`` written in
the left-invariant frame.  The metric factor of a subspace ``L`` is the
Lebesgue ``p``-measure of ``{v in L : N(v) < 1}`` in exponential
coordinates, and the ratio ``area(Sigma cap B(x, r)) / r^d`` should tend to
``theta / |tau^d|`` at points of maximum degree.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NumericalError, PreconditionError
from .group import HomogeneousNorm
from .manifold import AdaptedFrame, Submanifold, adapted_frame, submanifold_degree
from .multivec import PVector

CHUNK = 100_000


@dataclass(frozen=True)
class MeasureResult:
    value: float
    standard_error: float
    sample_count: int
    method: str


@dataclass(frozen=True)
class MetricFactor:
    theta: float
    subspace: np.ndarray
    norm: HomogeneousNorm
    standard_error: float
    sample_count: int


def _streams(seed, n_chunks):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_chunks)]


def _chunks(n: int):
    sizes = [CHUNK] * (n // CHUNK)
    if n % CHUNK:
        sizes.append(n % CHUNK)
    return sizes


# ---------------------------------------------------------------------------
# densities


def _gram_det_sqrt(T, metric=None):
    """``sqrt(det(T^T G T))`` for frame columns ``T`` of shape ``(..., q, p)``."""
    G = np.eye(T.shape[-2]) if metric is None else np.asarray(metric, dtype=float)
    gram = np.einsum("...ia,ij,...jb->...ab", T, G, T)
    return np.sqrt(np.maximum(np.linalg.det(gram), 0.0))


def riemannian_jacobian(m: Submanifold, u, metric=None):
    """Area element of ``Phi`` for the metric making the frame orthonormal
    (or for the positive definite ``metric`` on frame coefficients)."""
    return _gram_det_sqrt(m.frame_columns(u), metric)


def intrinsic_density(m: Submanifold, u, degree: Optional[int] = None, metric=None):
    """``|(dPhi/du_1 ^ ... ^ dPhi/du_p)_d|`` at ``u`` (vectorized).

    With an auxiliary ``metric`` the density is computed as
    ``|tau^d| * vol`` where ``tau`` is normalized for that metric; the value
    does not depend on the choice.
    """
    if degree is None:
        degree = submanifold_degree(m)[0]
    T = m.frame_columns(u)
    w = m.wedge_array(u)
    mask = m.index_degrees() == degree
    top = np.sqrt(np.sum(w[..., mask] ** 2, axis=-1))
    if metric is None:
        return top
    vol = _gram_det_sqrt(T, metric)
    tau_d = top / vol
    return tau_d * vol


def intrinsic_measure(m: Submanifold, region, degree: Optional[int] = None,
                      quadrature: str = "gauss", nodes: int = 64, samples: int = 10 ** 5,
                      seed: int = 0, metric=None) -> MeasureResult:
    """Integral of the intrinsic density over a box ``region`` of parameters."""
    region = [(float(a), float(b)) for a, b in region]
    if len(region) != m.p:
        raise PreconditionError("region must have one interval per parameter")
    for (a, b), (lo, hi) in zip(region, m.domain):
        if a > b:
            raise PreconditionError("empty region")
        if a < lo or b > hi:
            raise PreconditionError("region is not contained in the domain")
    if degree is None:
        degree = submanifold_degree(m)[0]
    vol = float(np.prod([b - a for a, b in region]))
    if vol == 0.0:
        return MeasureResult(0.0, 0.0, 0, "grid" if quadrature == "gauss" else "monte-carlo")
    if quadrature == "gauss":
        x, w = leggauss(nodes)
        axes, weights = [], []
        for a, b in region:
            axes.append(0.5 * (b - a) * x + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w)
        U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m.p)
        W = np.ones(1)
        for wk in weights:
            W = np.multiply.outer(W, wk).ravel()
        f = intrinsic_density(m, U, degree, metric)
        return MeasureResult(float(np.dot(W, f)), 0.0, len(f), "grid")
    if quadrature != "monte-carlo":
        raise PreconditionError(f"unknown quadrature {quadrature!r}")
    lo = np.array([a for a, _ in region])
    hi = np.array([b for _, b in region])
    sizes = _chunks(samples)
    total = total2 = 0.0
    for rng, n in zip(_streams(seed, len(sizes)), sizes):
        U = lo + (hi - lo) * rng.random((n, m.p))
        f = intrinsic_density(m, U, degree, metric)
        total += float(f.sum())
        total2 += float((f ** 2).sum())
    mean = total / samples
    var = max(total2 / samples - mean ** 2, 0.0)
    return MeasureResult(vol * mean, vol * np.sqrt(var / samples), samples, "monte-carlo")


# ---------------------------------------------------------------------------
# metric factor


def subspace_of(tau: PVector, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of ``{v : v ^ tau = 0}`` for a simple p-vector ``tau``."""
    p, q = tau.p, tau.algebra.q
    if tau.is_zero():
        raise PreconditionError("zero p-vector")
    rows = list(combinations(range(q), p + 1))
    pos = {J: i for i, J in enumerate(rows)}
    M = np.zeros((len(rows), q))
    for j in range(q):
        for J, c in tau.items():
            if j in J:
                continue
            K = tuple(sorted((j,) + J))
            # sign of moving j into place
            sign = (-1) ** sum(1 for i in J if i < j)
            M[pos[K], j] += sign * float(c)
    _, s, Vt = np.linalg.svd(M)
    s = np.concatenate([s, np.zeros(q - len(s))])
    null = Vt[s <= tol * max(1.0, s.max())]
    if null.shape[0] != p:
        raise PreconditionError("p-vector is not simple")
    return null.T


def _bounding_half_widths(basis: np.ndarray, norm: HomogeneousNorm) -> np.ndarray:
    # N(v) < 1 gives |v^(k)| < eps_k, hence |v| < sqrt(sum eps_k^2)
    radius = float(np.sqrt(np.sum(np.square(norm.epsilons))))
    return np.full(basis.shape[1], radius)


def metric_factor(subspace, norm: HomogeneousNorm, sample_count: int = 10 ** 6,
                  seed: int = 0) -> MetricFactor:
    """Monte Carlo estimate of the ``p``-measure of the unit ball slice by a subspace.

    ``subspace`` is a simple :class:`PVector`, a ``q x p`` basis matrix or a
    list of factor vectors.  Samples are drawn in orthonormal coordinates of
    the subspace from the box implied by the layer bounds of the norm.
    """
    if norm is None:
        raise PreconditionError("norm is not calibrated")
    if isinstance(subspace, PVector):
        basis = subspace_of(subspace)
    else:
        M = np.asarray(subspace, dtype=float)
        if M.ndim == 2 and M.shape[0] != norm.algebra.q:
            M = M.T
        if np.linalg.matrix_rank(M) != M.shape[1]:
            raise PreconditionError("subspace factors are dependent")
        basis, _ = np.linalg.qr(M)
    p = basis.shape[1]
    h = _bounding_half_widths(basis, norm)
    box = float(np.prod(2 * h))
    sizes = _chunks(sample_count)
    hits = 0
    for rng, n in zip(_streams(seed, len(sizes)), sizes):
        s = (2 * rng.random((n, p)) - 1) * h
        hits += int(np.sum(norm(s @ basis.T) < 1.0))
    f = hits / sample_count
    return MetricFactor(box * f, basis, norm, box * np.sqrt(f * (1 - f) / sample_count),
                        sample_count)


# ---------------------------------------------------------------------------
# density ratio


@dataclass(frozen=True)
class DensityEstimate:
    r: float
    ratio: float
    standard_error: float
    sample_count: int
    box_scale: float
    hits: int


def density_ratio(m: Submanifold, u, r: float, norm: HomogeneousNorm, samples: int = 10 ** 6,
                  seed: int = 0, frame: Optional[AdaptedFrame] = None,
                  degree: Optional[int] = None, max_doublings: int = 8) -> DensityEstimate:
    """``area_g(Sigma cap B(Phi(u), r)) / r^d`` by Monte Carlo in a rescaled parameter box.

    Parameters ``u + S^-1 diag(r^sigma) w`` with ``w`` uniform in ``[-c, c]^p``
    cover the ball, where ``S`` is the pivot block of the adapted frame.  The
    half-width ``c`` is doubled until no point of the ball lies in the outer
    fifth of the box.  A box leaving the parameter domain is refused.
    """
    if r <= 0:
        raise PreconditionError("radius must be positive")
    if frame is None:
        frame = adapted_frame(m, u)
    if degree is None:
        degree = frame.degree
    u = np.asarray(frame.base_parameter, dtype=float)
    _, S_inv, _ = frame.frozen_frame(u)
    M = S_inv * np.power(r, np.array(frame.sigma, dtype=float))[None, :]
    det = abs(float(np.linalg.det(M)))
    base = frame.base_point
    law = m.group
    lo = np.array([a for a, _ in m.domain])
    hi = np.array([b for _, b in m.domain])
    c = 2.0
    for _ in range(max_doublings):
        corners = np.array(np.meshgrid(*[[-c, c]] * m.p, indexing="ij")).reshape(m.p, -1).T
        ext = u + corners @ M.T
        if np.any(ext < lo) or np.any(ext > hi):
            raise PreconditionError(f"radius {r} too large: the sampling box leaves the domain")
        sizes = _chunks(samples)
        total = total2 = 0.0
        hits = 0
        edge = False
        for rng, n in zip(_streams(seed, len(sizes)), sizes):
            w = (2 * rng.random((n, m.p)) - 1) * c
            U = u + w @ M.T
            inside = norm.distance(law, base, m.phi(U)) < r
            if np.any(inside & (np.max(np.abs(w), axis=1) > 0.8 * c)):
                edge = True
                break
            f = np.zeros(n)
            if np.any(inside):
                f[inside] = riemannian_jacobian(m, U[inside])
            hits += int(inside.sum())
            total += float(f.sum())
            total2 += float((f ** 2).sum())
        if not edge:
            vol = det * (2 * c) ** m.p
            mean = total / samples
            var = max(total2 / samples - mean ** 2, 0.0)
            scale = r ** degree
            return DensityEstimate(float(r), vol * mean / scale, vol * np.sqrt(var / samples) / scale,
                                   samples, c, hits)
        c *= 2
    raise NumericalError("could not enclose the ball in the sampling box")


def density_target(m: Submanifold, frame: AdaptedFrame, norm: HomogeneousNorm,
                   sample_count: int = 10 ** 6, seed: int = 0):
    """``theta(tau^d) / |tau^d|`` at the frame's base point (``tau`` unit)."""
    w = m.wedge_array(frame.base_parameter)
    mask = m.index_degrees() == frame.degree
    tau_d = np.linalg.norm(w[mask]) / np.linalg.norm(w)
    mf = metric_factor(frame.selected_basis(), norm, sample_count, seed)
    return mf.theta / tau_d, mf.standard_error / tau_d, mf


def verify_density_limit(m: Submanifold, u, radii: Sequence[float], norm: HomogeneousNorm,
                         samples: int = 10 ** 6, seed: int = 0, theta_samples: int = 10 ** 6):
    """Density ratios along decreasing radii against ``theta / |tau^d|``."""
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise PreconditionError("radii must be decreasing")
    frame = adapted_frame(m, u)
    if not frame.maximal:
        raise PreconditionError("the base point does not have maximum degree")
    target, target_se, mf = density_target(m, frame, norm, theta_samples, seed)
    rows = []
    for r in radii:
        est = density_ratio(m, u, r, norm, samples, seed, frame)
        rows.append({"r": r, "ratio": est.ratio, "standard_error": est.standard_error,
                     "hits": est.hits, "relative_gap": abs(est.ratio - target) / target})
    return {"degree": frame.degree, "target": target, "target_standard_error": target_se,
            "theta": mf.theta, "epsilons": list(norm.epsilons), "rows": rows}
