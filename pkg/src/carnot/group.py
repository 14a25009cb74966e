"""Group law of a stratified group in graded coordinates.

The group law is obtained exactly from the Baker-Campbell-Hausdorff series,
written in Dynkin's form and truncated at the step of the algebra.  Points
are float arrays whose last axis has length ``q``; leading axes broadcast.

Besides exponential coordinates of the first kind (``x = exp(sum x_j X_j)``),
a law can be transported to other polynomial charts, e.g. coordinates of the
second kind used by the classical matrix model of the Engel group.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import StratifiedAlgebra
from .errors import CalibrationError, DimensionError, PreconditionError
from .poly import Polynomial


# ---------------------------------------------------------------------------
# BCH


def _compositions(total: int, parts: int):
    """Pairs (a, b) of length ``parts`` with a_i + b_i >= 1 and sum = total."""
    if parts == 0:
        if total == 0:
            yield (), ()
        return
    for s in range(1, total - (parts - 1) + 1):
        for a0 in range(s + 1):
            for rest_a, rest_b in _compositions(total - s, parts - 1):
                yield (a0,) + rest_a, (s - a0,) + rest_b


def bch_terms(step: int):
    """Dynkin coefficients of ``log(e^X e^Y)`` up to commutator length ``step``.

    Returns a list of ``(coefficient, word)`` where ``word`` is a tuple over
    ``{'X', 'Y'}`` read left to right as ``(ad w_1)...(ad w_{n-1}) w_n``.
    Only words that are not trivially zero are kept.
    """
    words: Dict[Tuple[str, ...], Fraction] = {}
    for n in range(1, step + 1):
        for l in range(1, n + 1):
            sign = Fraction((-1) ** (l + 1), l)
            for a, b in _compositions(n, l):
                if a[-1] + b[-1] < 1:
                    continue
                word: List[str] = []
                for ai, bi in zip(a, b):
                    word += ["X"] * ai + ["Y"] * bi
                # innermost (ad w)w vanishes unless the word has length 1
                if len(word) > 1 and word[-1] == word[-2]:
                    continue
                coeff = sign / (_fact(a) * _fact(b) * n)
                key = tuple(word)
                words[key] = words.get(key, Fraction(0)) + coeff
    return [(c, w) for w, c in sorted(words.items(), key=lambda t: (len(t[0]), t[0])) if c]


def _fact(a):
    out = 1
    for x in a:
        out *= factorial(x)
    return out


def _bch_vector(algebra: StratifiedAlgebra, X, Y):
    """``C(X, Y)`` for coefficient vectors over any ring (memoized words)."""
    memo = {}

    def word_value(word):
        if word in memo:
            return memo[word]
        if len(word) == 1:
            val = X if word[0] == "X" else Y
        else:
            head = X if word[0] == "X" else Y
            val = algebra.bracket(head, word_value(word[1:]))
        memo[word] = val
        return val

    out = [0] * algebra.q
    for c, word in bch_terms(algebra.step):
        val = word_value(word)
        for k in range(algebra.q):
            out[k] = out[k] + val[k] * c
    return out


# ---------------------------------------------------------------------------
# group law


class GroupLaw:
    """Polynomial group law ``P(x, y) = x + y + Q(x, y)`` on ``R^q``.

    Attributes
    ----------
    algebra : StratifiedAlgebra
    P, Q : list of Polynomial
        In ``2q`` variables, ``x`` first then ``y``; weights repeat the
        layer degrees.
    coordinates : str
        ``"exponential"`` for first-kind coordinates, otherwise a chart name.
    to_exp, from_exp : list of Polynomial or None
        Chart maps to and from exponential coordinates (``None`` = identity).
    """

    def __init__(self, algebra, P, Q, coordinates="exponential", to_exp=None, from_exp=None):
        self.algebra = algebra
        self.P = list(P)
        self.Q = list(Q)
        self.coordinates = coordinates
        self.to_exp = to_exp
        self.from_exp = from_exp
        self._fields = None
        self._exp_law = None

    @property
    def q(self):
        return self.algebra.q

    @property
    def degrees(self):
        return self.algebra.degrees

    # -- numerics -------------------------------------------------------
    def multiply(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        _check_last(x, self.q)
        _check_last(y, self.q)
        args = [x[..., j] for j in range(self.q)] + [y[..., j] for j in range(self.q)]
        return np.stack([np.broadcast_to(p.evaluate(args), np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))
                         for p in self.P], axis=-1)

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        _check_last(x, self.q)
        if self.to_exp is None:
            # first-kind exponential coordinates: exp(X)^-1 = exp(-X)
            return -x
        return self.from_exponential(-self.to_exponential(x))

    def dilate(self, r, x):
        return dilate(self.algebra, r, x)

    def to_exponential(self, x):
        x = np.asarray(x, dtype=float)
        if self.to_exp is None:
            return x
        return _eval_map(self.to_exp, x)

    def from_exponential(self, z):
        z = np.asarray(z, dtype=float)
        if self.from_exp is None:
            return z
        return _eval_map(self.from_exp, z)

    def exponential_law(self) -> "GroupLaw":
        """The same group in first-kind exponential coordinates."""
        if self.to_exp is None:
            return self
        if self._exp_law is None:
            self._exp_law = compute_group_law(self.algebra)
        return self._exp_law

    # -- left-invariant frame ---------------------------------------------
    def left_invariant_fields(self) -> List[List[Polynomial]]:
        """Matrix ``X[i][j](x) = dP_i/dy_j (x, 0)`` as polynomials in ``x``."""
        if self._fields is None:
            q = self.q
            w = self.degrees
            xs = Polynomial.variables(q, w)
            zero = Polynomial.zero(q, w)
            sub = xs + [zero] * q
            fields = []
            for i in range(q):
                row = []
                for j in range(q):
                    row.append(self.P[i].partial_derivative(q + j).substitute(sub))
                fields.append(row)
            self._fields = fields
        return self._fields

    def field_matrix(self, x):
        """Numeric ``(..., q, q)`` array of the frame at ``x``; column j is ``X_j``."""
        x = np.asarray(x, dtype=float)
        _check_last(x, self.q)
        F = self.left_invariant_fields()
        args = [x[..., j] for j in range(self.q)]
        out = np.zeros(x.shape[:-1] + (self.q, self.q))
        for i in range(self.q):
            for j in range(self.q):
                p = F[i][j]
                if p.is_zero():
                    continue
                out[..., i, j] = p.evaluate(args)
        return out

    def frame_coefficients(self, x, v):
        """Solve ``X(x) c = v``: coefficients of the coordinate vector ``v`` in the frame.

        The frame matrix is unit lower triangular in degree order, so this is a
        forward substitution.
        """
        A = self.field_matrix(x)
        v = np.asarray(v, dtype=float)
        c = np.zeros(np.broadcast_shapes(A.shape[:-1], v.shape))
        for i in range(self.q):
            acc = v[..., i]
            for j in range(i):
                acc = acc - A[..., i, j] * c[..., j]
            c[..., i] = acc
        return c

    def transported(self, to_exp, from_exp, name) -> "GroupLaw":
        """This group in the chart whose map to exponential coordinates is ``to_exp``."""
        if self.to_exp is not None:
            raise PreconditionError("transport from exponential coordinates only")
        q = self.q
        w2 = self.degrees * 2
        xs = Polynomial.variables(2 * q, w2)
        args = [_lift(p, 2 * q, w2, 0) for p in to_exp] + [_lift(p, 2 * q, w2, q) for p in to_exp]
        prod = [p.substitute(args) for p in self.P]
        P = [fp.substitute(prod) for fp in from_exp]
        Q = [P[i] - xs[i] - xs[q + i] for i in range(q)]
        return GroupLaw(self.algebra, P, Q, coordinates=name, to_exp=list(to_exp), from_exp=list(from_exp))

    def __repr__(self):
        return f"GroupLaw({self.algebra.name or 'unnamed'}, coordinates={self.coordinates})"


def _lift(p: Polynomial, nvars: int, weights, offset: int) -> Polynomial:
    """Embed a polynomial in ``q`` variables into ``nvars`` variables at ``offset``."""
    terms = {}
    for exp, c in p.terms():
        e = [0] * nvars
        e[offset:offset + len(exp)] = exp
        terms[tuple(e)] = c
    return Polynomial(nvars, terms, weights)


def _eval_map(polys, x):
    args = [x[..., j] for j in range(x.shape[-1])]
    return np.stack([np.broadcast_to(p.evaluate(args), x.shape[:-1]) for p in polys], axis=-1)


def _check_last(x, q):
    if x.shape[-1:] != (q,):
        raise DimensionError(f"points must have last axis of length {q}, got shape {x.shape}")


def compute_group_law(algebra: StratifiedAlgebra) -> GroupLaw:
    """Exact BCH group law of ``algebra`` in exponential coordinates (cached per algebra)."""
    algebra.require_valid()
    law = getattr(algebra, "_group_law", None)
    if law is None:
        law = _compute_group_law(algebra)
        algebra._group_law = law
    return law


def _compute_group_law(algebra: StratifiedAlgebra) -> GroupLaw:
    q = algebra.q
    w2 = algebra.degrees * 2
    v = Polynomial.variables(2 * q, w2)
    X, Y = v[:q], v[q:]
    C = _bch_vector(algebra, X, Y)
    P = []
    for k in range(q):
        c = C[k]
        if not isinstance(c, Polynomial):
            c = Polynomial.constant(c, 2 * q, w2)
        P.append(c)
    Q = [P[i] - X[i] - Y[i] for i in range(q)]
    return GroupLaw(algebra, P, Q)


def second_kind_law(law: GroupLaw, order: Sequence[int], name: str = "second-kind") -> GroupLaw:
    """Transport ``law`` to coordinates ``x -> exp(x_{o_1} X_{o_1}) ... exp(x_{o_q} X_{o_q})``."""
    q = law.q
    if sorted(order) != list(range(q)):
        raise PreconditionError("order must be a permutation of the basis indices")
    w = law.degrees
    xs = Polynomial.variables(q, w)
    zero = Polynomial.zero(q, w)
    z = [zero] * q
    for j in order:
        y = [zero] * q
        y[j] = xs[j]
        z = [p.substitute(z + y) for p in law.P]
    to_exp = z
    from_exp = _triangular_inverse(to_exp, w)
    return law.transported(to_exp, from_exp, name)


def _triangular_inverse(to_exp: Sequence[Polynomial], weights) -> List[Polynomial]:
    """Invert ``z_i = x_i + f_i(x with lower degree)`` exactly."""
    q = len(to_exp)
    zs = Polynomial.variables(q, weights)
    inv: List[Optional[Polynomial]] = [None] * q
    for i in sorted(range(q), key=lambda i: weights[i]):
        rest = to_exp[i] - Polynomial.variable(i, q, weights)
        lower = [j for j in rest.variables_used()]
        if any(weights[j] >= weights[i] for j in lower):
            raise PreconditionError("chart is not triangular with respect to the grading")
        args = [inv[j] if inv[j] is not None else Polynomial.zero(q, weights) for j in range(q)]
        inv[i] = zs[i] - rest.substitute(args)
    return inv  # type: ignore[return-value]


def dilate(algebra: StratifiedAlgebra, r, x):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise PreconditionError("dilation factor must be positive")
    x = np.asarray(x, dtype=float)
    _check_last(x, algebra.q)
    return x * np.power(r[..., None], np.array(algebra.degrees, dtype=float))


def multiply(law: GroupLaw, x, y):
    return law.multiply(x, y)


def inverse(law: GroupLaw, x):
    return law.inverse(x)


def left_invariant_fields(law: GroupLaw):
    return law.left_invariant_fields()


def ideal_membership_check(law: GroupLaw, J: Sequence[int]):
    """Check that ``Q_i`` lies in the ideal generated by ``{x_l, y_l : l not in J}``.

    Returns ``(True, None)`` or ``(False, i)`` for the first failing index.
    Raises if ``span{X_j : j in J}`` is not a subalgebra.
    """
    alg = law.algebra
    J = sorted(set(int(j) for j in J))
    ok, _ = alg.subalgebra_closure_check([alg.basis_vector(j) for j in J])
    if not ok:
        raise PreconditionError(f"span of basis vectors {J} is not a subalgebra")
    q = law.q
    outside = [l for l in range(q) if l not in J]
    kill = outside + [q + l for l in outside]
    for i in outside:
        if not law.Q[i].restrict_zero(kill).is_zero():
            return False, i
    return True, None


# ---------------------------------------------------------------------------
# homogeneous norm


@dataclass(frozen=True)
class HomogeneousNorm:
    """``N(v) = max_k (|v^(k)| / eps_k)^(1/k)`` on exponential coordinates.

    ``v^(k)`` is the block of layer ``k`` and ``|.|`` the Euclidean norm.
    """

    algebra: StratifiedAlgebra
    epsilons: Tuple[float, ...]
    seed: Optional[int] = None
    sample_count: int = 0
    tolerance: float = 0.0
    _blocks: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if len(self.epsilons) != self.algebra.step or any(e <= 0 for e in self.epsilons):
            raise PreconditionError("need one positive epsilon per layer")
        blocks = tuple(tuple(self.algebra.layer_indices(k)) for k in range(1, self.algebra.step + 1))
        object.__setattr__(self, "_blocks", blocks)

    def layer_values(self, v):
        v = np.asarray(v, dtype=float)
        _check_last(v, self.algebra.q)
        out = []
        for k, (idx, eps) in enumerate(zip(self._blocks, self.epsilons), start=1):
            blk = np.sqrt(np.sum(v[..., list(idx)] ** 2, axis=-1))
            out.append((blk / eps) ** (1.0 / k))
        return np.stack(out, axis=-1)

    def __call__(self, v):
        return np.max(self.layer_values(v), axis=-1)

    def distance(self, law: GroupLaw, x, y):
        """``rho(x, y) = N(x^-1 y)`` for points in the coordinates of ``law``."""
        return self(law.to_exponential(law.multiply(law.inverse(x), y)))


def homogeneous_distance(norm: HomogeneousNorm, law: GroupLaw, x, y):
    if norm is None:
        raise PreconditionError("norm is not calibrated")
    return norm.distance(law, x, y)


def _triangle_sample(law: GroupLaw, rng: np.random.Generator, n: int):
    """Random pairs (y, w); the triangle inequality reads N(yw) <= N(y) + N(w)."""
    q = law.q
    y = rng.standard_normal((n, q))
    w = rng.standard_normal((n, q))
    # mix scales so that horizontal and vertical parts compete
    y = dilate(law.algebra, np.exp(rng.uniform(-2, 2, n)), y)
    w = dilate(law.algebra, np.exp(rng.uniform(-2, 2, n)), w)
    # include purely horizontal and purely layered directions
    k = n // 4
    deg = np.array(law.degrees)
    mask = rng.integers(1, law.algebra.step + 1, size=(k, 1)) == deg[None, :]
    y[:k] = np.where(mask, y[:k], 0.0)
    mask = rng.integers(1, law.algebra.step + 1, size=(k, 1)) == deg[None, :]
    w[:k] = np.where(mask, w[:k], 0.0)
    return y, w, law.multiply(y, w)


def count_violations(norm: HomogeneousNorm, samples, tolerance: float) -> int:
    total = 0
    for y, w, yw in samples:
        total += int(np.sum(norm(yw) > norm(y) + norm(w) + tolerance))
    return total


def calibrate_norm(law: GroupLaw, sample_count: int = 10 ** 4, tolerance: float = 1e-9,
                   seed: int = 0, chunks: int = 4, iterations: int = 40) -> HomogeneousNorm:
    """Pick layer constants for which sampled triangle inequalities hold.

    ``eps_1 = 1``.  A common value for the higher layers is found by bisection
    in ``(0, 1]``, then each layer from 2 upwards is raised as far as possible
    with the others fixed.  Samples come from ``chunks`` independent
    sub-streams of ``numpy.random.SeedSequence(seed)``.
    """
    if sample_count < 10 ** 4:
        raise PreconditionError("calibration needs at least 10^4 samples")
    law = law.exponential_law()
    alg = law.algebra
    step = alg.step
    if step == 1:
        return HomogeneousNorm(alg, (1.0,), seed, sample_count, tolerance)
    children = np.random.SeedSequence(seed).spawn(chunks)
    per = -(-sample_count // chunks)
    samples = [_triangle_sample(law, np.random.default_rng(c), per) for c in children]

    def ok(eps):
        return count_violations(HomogeneousNorm(alg, tuple(eps)), samples, tolerance) == 0

    def bisect(make, lo, hi):
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if ok(make(mid)):
                lo = mid
            else:
                hi = mid
        return lo

    common = lambda s: (1.0,) + (s,) * (step - 1)
    if ok(common(1.0)):
        eps = list(common(1.0))
    else:
        lo = None
        s = 0.5
        while s > 1e-8:
            if ok(common(s)):
                lo = s
                break
            s *= 0.5
        if lo is None:
            raise CalibrationError("no common layer constant in (0, 1] satisfies the sampled "
                                   "triangle inequality")
        eps = list(common(bisect(common, lo, min(1.0, 2 * lo))))
    for k in range(1, step):
        def make(v, k=k):
            e = list(eps)
            e[k] = v
            return tuple(e)
        if ok(make(1.0)):
            eps[k] = 1.0
        else:
            eps[k] = bisect(make, eps[k], 1.0)
    return HomogeneousNorm(alg, tuple(float(e) for e in eps), seed, sample_count, tolerance)
