"""Stratified Lie algebras given by structure constants.

Basis vectors are indexed from 0 in the Python API; layer degrees start at 1.
Structure constants are supplied for ``i < j`` only and completed
antisymmetrically.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, PreconditionError


def _frac(c) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


def rational_rank(rows: Sequence[Sequence]) -> int:
    """Exact rank of a rational matrix by fraction-free (Bareiss) elimination."""
    rows = [list(map(_frac, r)) for r in rows]
    if not rows:
        return 0
    # clear denominators row by row so Bareiss runs over the integers
    mat = []
    for r in rows:
        den = 1
        for c in r:
            den = den * c.denominator // np.gcd(den, c.denominator)
        mat.append([int(c * den) for c in r])
    nrows, ncols = len(mat), len(mat[0])
    rank, prev = 0, 1
    for col in range(ncols):
        piv = next((i for i in range(rank, nrows) if mat[i][col] != 0), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        for i in range(rank + 1, nrows):
            for j in range(col + 1, ncols):
                mat[i][j] = (mat[i][j] * mat[rank][col] - mat[i][col] * mat[rank][j]) // prev
            mat[i][col] = 0
        prev = mat[rank][col]
        rank += 1
        if rank == nrows:
            break
    return rank


def _solve_rational(basis: Sequence[Sequence[Fraction]], target: Sequence[Fraction]):
    """Coefficients expressing ``target`` in ``basis`` (exact), or None."""
    n, q = len(basis), len(target)
    # augmented system A c = target, A columns are basis vectors
    aug = [[_frac(basis[c][r]) for c in range(n)] + [_frac(target[r])] for r in range(q)]
    piv_cols = []
    row = 0
    for col in range(n):
        piv = next((i for i in range(row, q) if aug[i][col] != 0), None)
        if piv is None:
            continue
        aug[row], aug[piv] = aug[piv], aug[row]
        p = aug[row][col]
        aug[row] = [v / p for v in aug[row]]
        for i in range(q):
            if i != row and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[row])]
        piv_cols.append(col)
        row += 1
    if any(aug[i][n] != 0 for i in range(row, q)):
        return None
    coeffs = [Fraction(0)] * n
    for r, col in enumerate(piv_cols):
        coeffs[col] = aug[r][n]
    return coeffs


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    axiom: Optional[str] = None
    indices: Tuple[int, ...] = ()
    message: str = ""

    def __bool__(self):
        return self.ok


class StratifiedAlgebra:
    """Graded nilpotent Lie algebra ``V_1 + ... + V_step``.

    Parameters
    ----------
    layer_dims : sequence of int
        ``(m_1, ..., m_step)``; the basis is ordered layer by layer.
    brackets : mapping ``(i, j) -> {k: c}``
        Nonzero structure constants ``[X_i, X_j] = sum_k c X_k`` for ``i < j``.
    name : str, optional
    """

    def __init__(self, layer_dims: Sequence[int],
                 brackets: Mapping[Tuple[int, int], Mapping[int, object]],
                 name: str = ""):
        self.layer_dims = tuple(int(m) for m in layer_dims)
        if not self.layer_dims or any(m <= 0 for m in self.layer_dims):
            raise DimensionError("layer dimensions must be positive")
        self.name = name
        self.q = sum(self.layer_dims)
        self.step = len(self.layer_dims)
        self.degrees = tuple(k + 1 for k, m in enumerate(self.layer_dims) for _ in range(m))
        self._input_conflicts: List[Tuple[int, int, int]] = []
        table: Dict[Tuple[int, int], Dict[int, Fraction]] = {}
        for (i, j), row in brackets.items():
            i, j = int(i), int(j)
            for idx in (i, j):
                if not 0 <= idx < self.q:
                    raise DimensionError(f"basis index {idx} out of range 0..{self.q - 1}")
            clean = {}
            for k, c in row.items():
                if not 0 <= int(k) < self.q:
                    raise DimensionError(f"basis index {k} out of range 0..{self.q - 1}")
                c = _frac(c)
                if c:
                    clean[int(k)] = c
            if i == j:
                if clean:
                    self._input_conflicts.append((i, j, next(iter(clean))))
                continue
            if i > j:
                i, j = j, i
                clean = {k: -c for k, c in clean.items()}
            if (i, j) in table and table[(i, j)] != clean:
                self._input_conflicts.append((i, j, next(iter(clean), 0)))
            if clean:
                table[(i, j)] = clean
        self._table = table
        c = np.zeros((self.q, self.q, self.q))
        for (i, j), row in table.items():
            for k, v in row.items():
                c[i, j, k] = float(v)
                c[j, i, k] = -float(v)
        self.structure_constants = c
        self.structure_constants.setflags(write=False)
        self._validation: Optional[ValidationReport] = None

    # -- basic data ---------------------------------------------------
    def degree(self, j: int) -> int:
        return self.degrees[j]

    def layer_indices(self, k: int) -> List[int]:
        """Basis indices of layer ``k`` (1-based layer number)."""
        start = sum(self.layer_dims[:k - 1])
        return list(range(start, start + self.layer_dims[k - 1]))

    def constant(self, i: int, j: int, k: int) -> Fraction:
        if i == j:
            return Fraction(0)
        if i < j:
            return self._table.get((i, j), {}).get(k, Fraction(0))
        return -self._table.get((j, i), {}).get(k, Fraction(0))

    def nonzero_brackets(self):
        """Yield ``(i, j, {k: c})`` for ``i < j`` with a nonzero bracket."""
        for (i, j), row in sorted(self._table.items()):
            yield i, j, dict(row)

    def change_basis(self, columns: Sequence[Sequence], name: str = "") -> "StratifiedAlgebra":
        """Same algebra in the basis ``columns`` (rational vectors in the old basis).

        The new basis must be graded: its vectors are listed layer by layer
        with ``layer_dims[k]`` of them inside layer ``k + 1``.
        """
        cols = [tuple(_frac(c) for c in v) for v in columns]
        if len(cols) != self.q or rational_rank(cols) != self.q:
            raise PreconditionError("a basis needs q independent vectors")
        for j, v in enumerate(cols):
            layer = self.layer_indices(self.degrees[j])
            if any(c for i, c in enumerate(v) if i not in layer):
                raise PreconditionError(f"basis vector {j + 1} leaves layer {self.degrees[j]}")
        table = {}
        for i, j in combinations(range(self.q), 2):
            br = self.bracket(cols[i], cols[j])
            coef = _solve_rational(cols, [_frac(c) for c in br])
            row = {k: c for k, c in enumerate(coef) if c}
            if row:
                table[(i, j)] = row
        return StratifiedAlgebra(self.layer_dims, table, name or self.name)

    def basis_vector(self, j: int, exact: bool = True):
        if exact:
            v = [Fraction(0)] * self.q
            v[j] = Fraction(1)
            return tuple(v)
        v = np.zeros(self.q)
        v[j] = 1.0
        return v

    def homogeneous_dimension(self) -> int:
        return sum(k * m for k, m in enumerate(self.layer_dims, start=1))

    # -- brackets -----------------------------------------------------
    def bracket(self, u, v):
        """``[u, v]`` for coefficient vectors over any commutative ring.

        Fractions give exact results, floats/arrays numeric ones and
        :class:`~carnot.poly.Polynomial` coefficients symbolic ones.
        """
        if len(u) != self.q or len(v) != self.q:
            raise DimensionError(f"vectors must have length {self.q}")
        if isinstance(u, np.ndarray) and isinstance(v, np.ndarray) and u.dtype != object:
            return np.einsum("i,j,ijk->k", u, v, self.structure_constants)
        out = [0] * self.q
        for (i, j), row in self._table.items():
            a = u[i] * v[j] - u[j] * v[i]
            if isinstance(a, (int, Fraction)) and a == 0:
                continue
            for k, c in row.items():
                out[k] = out[k] + a * c
        return tuple(out) if not isinstance(u, np.ndarray) else np.array(out, dtype=float)

    # -- validation ---------------------------------------------------
    def validate(self) -> ValidationReport:
        if self._validation is None:
            self._validation = self._validate()
        return self._validation

    def _validate(self) -> ValidationReport:
        q = self.q
        for i, j, k in self._input_conflicts:
            return ValidationReport(False, "antisymmetry", (i, j, k),
                                    f"antisymmetry violated at ({i + 1},{j + 1},{k + 1})")
        for (i, j), row in sorted(self._table.items()):
            a, b = self.degrees[i], self.degrees[j]
            for k in row:
                if a + b > self.step or self.degrees[k] != a + b:
                    return ValidationReport(
                        False, "grading", (i, j, k),
                        f"grading violated at ({i + 1},{j + 1},{k + 1}): "
                        f"[V_{a},V_{b}] has a component in V_{self.degrees[k]}")
        basis = [self.basis_vector(j) for j in range(q)]
        for i, j, k in combinations(range(q), 3):
            t1 = self.bracket(basis[i], self.bracket(basis[j], basis[k]))
            t2 = self.bracket(basis[j], self.bracket(basis[k], basis[i]))
            t3 = self.bracket(basis[k], self.bracket(basis[i], basis[j]))
            s = [_frac(x) + _frac(y) + _frac(z) for x, y, z in zip(t1, t2, t3)]
            if any(s):
                return ValidationReport(False, "jacobi", (i, j, k),
                                        f"Jacobi violated at ({i + 1},{j + 1},{k + 1})")
        first = self.layer_indices(1)
        for k in range(1, self.step):
            layer = self.layer_indices(k)
            nxt = self.layer_indices(k + 1)
            rows = []
            for a in first:
                for b in layer:
                    br = self.bracket(basis[a], basis[b])
                    rows.append([br[c] for c in nxt])
            r = rational_rank(rows) if rows else 0
            if r != len(nxt):
                return ValidationReport(
                    False, "generation", (k, k + 1),
                    f"generation violated: [V_1,V_{k}] has rank {r} != dim V_{k + 1} = {len(nxt)}")
        return ValidationReport(True, message="pass")

    def require_valid(self):
        rep = self.validate()
        if not rep.ok:
            from .errors import InvalidAlgebraError
            raise InvalidAlgebraError(rep.message)
        return self

    # -- subalgebras --------------------------------------------------
    def subalgebra_closure_check(self, spanning: Sequence[Sequence]):
        """Is ``span(spanning)`` closed under the bracket?

        Returns ``(True, None)`` or ``(False, (a, b, residual))`` where ``a, b``
        index the offending pair and ``residual`` is ``[v_a, v_b]``.  Exact for
        rational input; float input uses a least-squares residual test.
        """
        vecs = [tuple(v) for v in spanning]
        for v in vecs:
            if len(v) != self.q:
                raise DimensionError(f"vectors must have length {self.q}")
        exact = all(isinstance(c, (int, Fraction)) for v in vecs for c in v)
        if exact:
            vecs = [tuple(_frac(c) for c in v) for v in vecs]
            if rational_rank(vecs) != len(vecs):
                raise PreconditionError("spanning vectors are linearly dependent")
            for a, b in combinations(range(len(vecs)), 2):
                br = self.bracket(vecs[a], vecs[b])
                br = tuple(_frac(c) for c in br)
                if _solve_rational(vecs, br) is None:
                    return False, (a, b, br)
            return True, None
        mat = np.array(vecs, dtype=float).T
        if mat.size and np.linalg.matrix_rank(mat, tol=1e-10) != len(vecs):
            raise PreconditionError("spanning vectors are linearly dependent")
        for a, b in combinations(range(len(vecs)), 2):
            br = self.bracket(np.asarray(vecs[a], float), np.asarray(vecs[b], float))
            coef, *_ = np.linalg.lstsq(mat, br, rcond=None)
            res = br - mat @ coef
            if np.linalg.norm(res) > 1e-10 * max(1.0, np.linalg.norm(br)):
                return False, (a, b, tuple(br))
        return True, None

    def __repr__(self):
        return f"StratifiedAlgebra({self.name or 'unnamed'}, layers={self.layer_dims})"


def validate(a: StratifiedAlgebra) -> ValidationReport:
    return a.validate()


def bracket(a: StratifiedAlgebra, u, v):
    return a.bracket(u, v)


def homogeneous_dimension(a: StratifiedAlgebra) -> int:
    return a.homogeneous_dimension()


def subalgebra_closure_check(a: StratifiedAlgebra, spanning):
    return a.subalgebra_closure_check(spanning)
