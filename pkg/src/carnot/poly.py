"""Exact multivariate polynomials over the rationals with a weighted degree.

Coefficients are :class:`fractions.Fraction`; every variable carries a
positive integer weight (its layer in the grading), so that a monomial
``x_1^{l_1} ... x_n^{l_n}`` has weight ``sum_j w_j l_j``.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, Iterator, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError

Exponent = Tuple[int, ...]


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"coefficient must be rational, got {type(c).__name__}")


def _grlex_key(exp: Exponent):
    return (sum(exp), exp)


class Polynomial:
    """Immutable polynomial in ``nvars`` variables with rational coefficients.

    Zero coefficients are never stored, so two polynomials are equal exactly
    when their term maps are equal.
    """

    __slots__ = ("nvars", "weights", "_terms", "_float_terms", "_hash")

    def __init__(self, nvars: int, terms: Optional[Dict[Exponent, object]] = None,
                 weights: Optional[Sequence[int]] = None):
        self.nvars = int(nvars)
        if weights is None:
            weights = (1,) * self.nvars
        weights = tuple(int(w) for w in weights)
        if len(weights) != self.nvars or any(w <= 0 for w in weights):
            raise DimensionError("weights must be positive, one per variable")
        self.weights = weights
        clean: Dict[Exponent, Fraction] = {}
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars or any(e < 0 for e in exp):
                raise DimensionError(f"bad exponent vector {exp} for {self.nvars} variables")
            c = _as_fraction(c)
            if c:
                clean[exp] = clean.get(exp, Fraction(0)) + c
                if not clean[exp]:
                    del clean[exp]
        self._terms = clean
        self._float_terms = None
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, nvars: int, weights=None) -> "Polynomial":
        return cls(nvars, {}, weights)

    @classmethod
    def constant(cls, c, nvars: int, weights=None) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c}, weights)

    @classmethod
    def variable(cls, j: int, nvars: int, weights=None) -> "Polynomial":
        if not 0 <= j < nvars:
            raise IndexError(f"variable index {j} out of range for {nvars} variables")
        exp = [0] * nvars
        exp[j] = 1
        return cls(nvars, {tuple(exp): 1}, weights)

    @classmethod
    def variables(cls, nvars: int, weights=None):
        return [cls.variable(j, nvars, weights) for j in range(nvars)]

    @classmethod
    def _raw(cls, nvars, weights, terms):
        # trusted constructor: terms already clean
        obj = cls.__new__(cls)
        obj.nvars = nvars
        obj.weights = weights
        obj._terms = terms
        obj._float_terms = None
        obj._hash = None
        return obj

    # -- inspection ---------------------------------------------------
    def terms(self) -> Iterator[Tuple[Exponent, Fraction]]:
        """Terms in canonical graded-lexicographic order (highest first)."""
        for exp in sorted(self._terms, key=_grlex_key, reverse=True):
            yield exp, self._terms[exp]

    def coefficient(self, exp: Exponent) -> Fraction:
        return self._terms.get(tuple(exp), Fraction(0))

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def variables_used(self) -> set:
        used = set()
        for exp in self._terms:
            used.update(j for j, e in enumerate(exp) if e)
        return used

    def monomial_weight(self, exp: Exponent) -> int:
        return sum(w * e for w, e in zip(self.weights, exp))

    def weighted_degree(self) -> Optional[int]:
        """Common weight of all monomials, or ``None`` if inhomogeneous or zero."""
        ws = {self.monomial_weight(e) for e in self._terms}
        if len(ws) != 1:
            return None
        return ws.pop()

    def is_weighted_homogeneous(self, l: int) -> bool:
        return all(self.monomial_weight(e) == l for e in self._terms)

    def max_weight(self) -> Optional[int]:
        if not self._terms:
            return None
        return max(self.monomial_weight(e) for e in self._terms)

    # -- arithmetic ---------------------------------------------------
    def _check(self, other: "Polynomial"):
        if self.nvars != other.nvars or self.weights != other.weights:
            raise DimensionError("polynomials live in different variable spaces")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        return Polynomial.constant(_as_fraction(other), self.nvars, self.weights)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for exp, c in other._terms.items():
            v = out.get(exp, 0) + c
            if v:
                out[exp] = v
            else:
                out.pop(exp, None)
        return Polynomial._raw(self.nvars, self.weights, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, self.weights, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return self.scale(other)
        self._check(other)
        out: Dict[Exponent, Fraction] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = out.get(e, 0) + c1 * c2
                if v:
                    out[e] = v
                else:
                    out.pop(e, None)
        return Polynomial._raw(self.nvars, self.weights, out)

    def __rmul__(self, other):
        return self.scale(other)

    def scale(self, c) -> "Polynomial":
        c = _as_fraction(c)
        if not c:
            return Polynomial.zero(self.nvars, self.weights)
        return Polynomial._raw(self.nvars, self.weights, {e: c * v for e, v in self._terms.items()})

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        result = Polynomial.constant(1, self.nvars, self.weights)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return (self.nvars == other.nvars and self.weights == other.weights
                    and self._terms == other._terms)
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(other, self.nvars, self.weights)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, self.weights, frozenset(self._terms.items())))
        return self._hash

    # -- calculus and composition -------------------------------------
    def partial_derivative(self, j: int) -> "Polynomial":
        if not 0 <= j < self.nvars:
            raise IndexError(f"variable index {j} out of range for {self.nvars} variables")
        out = {}
        for exp, c in self._terms.items():
            if exp[j]:
                e = list(exp)
                e[j] -= 1
                out[tuple(e)] = c * exp[j]
        return Polynomial._raw(self.nvars, self.weights, out)

    def substitute(self, assignments: Sequence["Polynomial"]) -> "Polynomial":
        """Compose: replace variable ``j`` by ``assignments[j]``."""
        if len(assignments) != self.nvars:
            raise DimensionError(f"need {self.nvars} assignments, got {len(assignments)}")
        first = assignments[0] if assignments else None
        if first is None:
            raise DimensionError("cannot substitute into a polynomial without variables")
        for a in assignments:
            first._check(a)
        powers = [{0: Polynomial.constant(1, first.nvars, first.weights), 1: a}
                   for a in assignments]

        def power(j, e):
            cache = powers[j]
            if e not in cache:
                cache[e] = power(j, e // 2) * power(j, e - e // 2)
            return cache[e]

        result = Polynomial.zero(first.nvars, first.weights)
        for exp, c in self._terms.items():
            term = None
            for j, e in enumerate(exp):
                if e:
                    term = power(j, e) if term is None else term * power(j, e)
            if term is None:
                term = powers[0][0]
            result = result + term.scale(c)
        return result

    def restrict_zero(self, indices: Iterable[int]) -> "Polynomial":
        """Set the listed variables to zero."""
        idx = set(indices)
        out = {e: c for e, c in self._terms.items() if not any(e[j] for j in idx)}
        return Polynomial._raw(self.nvars, self.weights, out)

    def reweighted(self, weights: Sequence[int]) -> "Polynomial":
        return Polynomial(self.nvars, self._terms, weights)

    def evaluate(self, point):
        """Floating-point value at ``point``.

        ``point`` is a sequence of ``nvars`` floats or broadcastable arrays;
        the result has the broadcast shape.
        """
        if len(point) != self.nvars:
            raise DimensionError(f"point has {len(point)} entries, expected {self.nvars}")
        if self._float_terms is None:
            self._float_terms = [(float(c), [(j, e) for j, e in enumerate(exp) if e])
                                 for exp, c in self._terms.items()]
        xs = [np.asarray(v, dtype=float) for v in point]
        shape = np.broadcast_shapes(*(x.shape for x in xs)) if xs else ()
        total = np.zeros(shape)
        cache = {}
        for c, factors in self._float_terms:
            term = c
            for j, e in factors:
                if (j, e) not in cache:
                    cache[(j, e)] = xs[j] ** e
                term = term * cache[(j, e)]
            total = total + term
        return float(total) if shape == () else total

    # -- text ---------------------------------------------------------
    def to_string(self, names: Optional[Sequence[str]] = None) -> str:
        if names is None:
            names = [f"x{j + 1}" for j in range(self.nvars)]
        if not self._terms:
            return "0"
        parts = []
        for exp, c in self.terms():
            mono = "*".join(n if e == 1 else f"{n}^{e}" for n, e in zip(names, exp) if e)
            mag = abs(c)
            if not mono:
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            parts.append(("-" if c < 0 else "+", body))
        sign, body = parts[0]
        out = ("-" if sign == "-" else "") + body
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        return f"Polynomial({self.to_string()})"

    __str__ = to_string


def weighted_degree(p: Polynomial) -> Optional[int]:
    return p.weighted_degree()


def is_weighted_homogeneous(p: Polynomial, l: int) -> bool:
    return p.is_weighted_homogeneous(l)


def add(a: Polynomial, b: Polynomial) -> Polynomial:
    return a + b


def mul(a: Polynomial, b: Polynomial) -> Polynomial:
    return a * b


def scale(c, a: Polynomial) -> Polynomial:
    return a.scale(c)


def substitute(p: Polynomial, assignments: Sequence[Polynomial]) -> Polynomial:
    return p.substitute(assignments)


def partial_derivative(p: Polynomial, j: int) -> Polynomial:
    return p.partial_derivative(j)


def evaluate(p: Polynomial, point):
    return p.evaluate(point)
