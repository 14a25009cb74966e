"""p-vectors over a graded basis and their degree filtration.

A p-vector is stored as a map from strictly increasing index tuples ``J`` to
coefficients.  The basis p-vectors ``X_J`` are orthonormal, and ``X_J`` has
degree ``d(J) = d(j_1) + ... + d(j_p)``.
"""
from __future__ import annotations

import warnings
from fractions import Fraction
from itertools import combinations
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .algebra import StratifiedAlgebra
from .errors import DimensionError, PreconditionError

DEGREE_TOL = 1e-9
NEAR_DEGENERATE_TOL = 1e-7


class NearDegenerateWarning(UserWarning):
    """A degree decision was made on a component close to the tolerance."""


def _sort_sign(idx: Sequence[int]):
    """Sort ``idx``; return ``(sign, sorted tuple)`` or ``(0, None)`` on repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, None
    sign = 1
    # bubble sort keeps track of the permutation parity
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


class PVector:
    """Element of the p-th exterior power of the algebra."""

    __slots__ = ("algebra", "p", "_c")

    def __init__(self, algebra: StratifiedAlgebra, p: int, coefficients: Optional[Mapping] = None):
        self.algebra = algebra
        self.p = int(p)
        if not 0 <= self.p <= algebra.q:
            raise DimensionError(f"order {p} outside 0..{algebra.q}")
        c: Dict[Tuple[int, ...], object] = {}
        for J, v in (coefficients or {}).items():
            J = tuple(int(j) for j in J)
            if len(J) != self.p or any(not 0 <= j < algebra.q for j in J):
                raise DimensionError(f"bad index tuple {J} for a {self.p}-vector")
            sign, key = _sort_sign(J)
            if sign == 0 or v == 0:
                continue
            c[key] = c.get(key, 0) + sign * v
        self._c = {J: v for J, v in c.items() if v != 0}

    # -- constructors ---------------------------------------------------
    @classmethod
    def basis(cls, algebra, J: Sequence[int], coeff=1):
        return cls(algebra, len(J), {tuple(J): coeff})

    @classmethod
    def vector(cls, algebra, coords):
        """1-vector with the given coordinates in the graded basis."""
        coords = list(coords)
        if len(coords) != algebra.q:
            raise DimensionError(f"need {algebra.q} coordinates")
        return cls(algebra, 1, {(j,): v for j, v in enumerate(coords)})

    @classmethod
    def from_columns(cls, algebra, M):
        """Wedge of the columns of a ``q x p`` float matrix, via ``p x p`` minors."""
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != algebra.q:
            raise DimensionError(f"need a {algebra.q} x p matrix")
        p = M.shape[1]
        coeffs = {J: float(np.linalg.det(M[list(J), :])) if p else 1.0
                  for J in combinations(range(algebra.q), p)}
        return cls(algebra, p, coeffs)

    # -- access ---------------------------------------------------------
    def items(self):
        return sorted(self._c.items())

    def coefficient(self, J: Sequence[int]):
        sign, key = _sort_sign(J)
        if sign == 0:
            return 0
        return sign * self._c.get(key, 0)

    def __getitem__(self, J):
        return self.coefficient(J)

    def index_degree(self, J: Sequence[int]) -> int:
        return sum(self.algebra.degrees[j] for j in J)

    def is_zero(self) -> bool:
        return not self._c

    def is_exact(self) -> bool:
        return all(isinstance(v, (int, Fraction)) for v in self._c.values())

    def to_array(self):
        """Coefficients in lexicographic order of ``combinations(range(q), p)``."""
        return np.array([float(self._c.get(J, 0.0))
                         for J in combinations(range(self.algebra.q), self.p)])

    # -- linear structure -----------------------------------------------
    def _check(self, other: "PVector"):
        if self.algebra is not other.algebra or self.p != other.p:
            raise DimensionError("p-vectors of different order or algebra")

    def __add__(self, other: "PVector"):
        self._check(other)
        c = dict(self._c)
        for J, v in other._c.items():
            c[J] = c.get(J, 0) + v
        return PVector(self.algebra, self.p, c)

    def __neg__(self):
        return PVector(self.algebra, self.p, {J: -v for J, v in self._c.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, s):
        return PVector(self.algebra, self.p, {J: s * v for J, v in self._c.items()})

    __rmul__ = __mul__

    def __truediv__(self, s):
        return PVector(self.algebra, self.p, {J: v / s for J, v in self._c.items()})

    def __eq__(self, other):
        if not isinstance(other, PVector):
            return NotImplemented
        return self.algebra is other.algebra and self.p == other.p and self._c == other._c

    def allclose(self, other: "PVector", atol=1e-12, rtol=1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.to_array(), other.to_array(), atol=atol, rtol=rtol))

    def __repr__(self):
        if not self._c:
            return f"PVector(p={self.p}, 0)"
        parts = [f"{v:+g}*X{'^'.join(str(j + 1) for j in J)}" if isinstance(v, float)
                 else f"{v}*X{'^'.join(str(j + 1) for j in J)}" for J, v in self.items()]
        return f"PVector(p={self.p}, {' '.join(parts)})"

    # -- degree ---------------------------------------------------------
    def norm(self) -> float:
        return float(np.sqrt(sum(float(v) ** 2 for v in self._c.values())))

    def degree_projection(self, r: int) -> "PVector":
        return PVector(self.algebra, self.p,
                       {J: v for J, v in self._c.items() if self.index_degree(J) == r})

    def degree_norms(self) -> Dict[int, float]:
        out: Dict[int, float] = {}
        for J, v in self._c.items():
            r = self.index_degree(J)
            out[r] = out.get(r, 0.0) + float(v) ** 2
        return {r: float(np.sqrt(s)) for r, s in sorted(out.items())}

    def degree(self, tolerance: float = DEGREE_TOL, warn: bool = True) -> int:
        """Largest ``r`` with ``|(tau)_r| > tolerance * |tau|``.

        When the deciding component lies in the band ``[tolerance, 1e-7] * |tau|``
        a :class:`NearDegenerateWarning` is issued.
        """
        total = self.norm()
        if total == 0.0:
            raise PreconditionError("the zero p-vector has no degree")
        norms = self.degree_norms()
        kept = [r for r, s in norms.items() if s > tolerance * total]
        d = max(kept)
        if warn and norms[d] <= max(NEAR_DEGENERATE_TOL, tolerance) * total:
            warnings.warn(f"degree {d} decided by a component of relative size "
                          f"{norms[d] / total:.2e}", NearDegenerateWarning, stacklevel=2)
        return d

    def max_possible_degree(self) -> int:
        return sum(sorted(self.algebra.degrees, reverse=True)[:self.p])


def wedge(u: PVector, v: PVector) -> PVector:
    if u.algebra is not v.algebra:
        raise DimensionError("p-vectors over different algebras")
    if u.p + v.p > u.algebra.q:
        raise DimensionError(f"order {u.p + v.p} exceeds dimension {u.algebra.q}")
    out: Dict[Tuple[int, ...], object] = {}
    for I, a in u._c.items():
        for J, b in v._c.items():
            sign, K = _sort_sign(I + J)
            if sign:
                out[K] = out.get(K, 0) + sign * a * b
    return PVector(u.algebra, u.p + v.p, out)


def wedge_all(vectors: Iterable[PVector]) -> PVector:
    vectors = list(vectors)
    if not vectors:
        raise PreconditionError("empty wedge")
    out = vectors[0]
    for v in vectors[1:]:
        out = wedge(out, v)
    return out


def degree_projection(tau: PVector, r: int) -> PVector:
    return tau.degree_projection(r)


def degree(tau: PVector, tolerance: float = DEGREE_TOL) -> int:
    return tau.degree(tolerance)


def norm(tau: PVector) -> float:
    return tau.norm()


def subspace_from_factors(vectors, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (``q x p`` matrix) of the span of the given vectors."""
    M = np.column_stack([np.asarray(v.to_array() if isinstance(v, PVector) else v, dtype=float)
                         for v in vectors])
    Qm, R = np.linalg.qr(M)
    d = np.abs(np.diag(R))
    if d.size and d.min() <= tol * max(1.0, d.max()):
        raise PreconditionError("factors are linearly dependent")
    # fix signs so that the basis is deterministic
    s = np.sign(np.diag(R))
    s[s == 0] = 1
    return Qm * s
