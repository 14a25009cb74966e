"""Run configuration: a plain-text ``key = value`` file.

Grammar (one entry per line)::

    file    := line*
    line    := blank | comment | entry
    comment := "#" any text
    entry   := key "=" value
    key     := word ("." word)*      word := [A-Za-z0-9_-]+

Keys are unique.  Values are trimmed; internal whitespace is collapsed.
Lists use whitespace between numbers and ``;`` between rows.

Recognised keys
---------------
``group``                 catalog name (``engel4``, ``heisenberg1``, ``e5``, ``abelianN``)
                          or ``inline``
``group.name``            label of an inline group
``group.layers``          layer dimensions, e.g. ``2 1 1``
``group.bracket.I.J``     ``[X_I, X_J]`` for 1-based ``I < J`` as ``K:c, K:c`` with
                          rational ``c``, e.g. ``group.bracket.1.2 = 3:1``
``manifold``              name of a submanifold of the catalog group, or ``inline``
``manifold.params``       parameter names, e.g. ``x y``
``manifold.domain``       box, e.g. ``-2 2; -2 2``
``manifold.component.N``  ``N``-th coordinate (1-based) in the expression grammar
``point``                 parameter point, e.g. ``0 0``
``grid``                  points per axis of the parameter grid
``radii``                 decreasing radii
``ball``                  radius ``R`` of the ball ``D_R`` for blow-ups
``points``                cloud size
``samples``               Monte Carlo sample count
``theta_samples``         sample count for the metric factor
``seed``                  integer seed
``tolerance``             degree tolerance
``quadrature``            ``gauss`` or ``monte-carlo``; ``nodes`` per axis
``region``                sub-box of the domain for ``measure``
``limit.basis``           rows spanning a candidate limit set (exponential coordinates)
``limit.halfspaces``      rows ``a`` imposing ``a . x >= 0``
``lambda``, ``t_max``, ``steps``, ``t_values``  curve parameters
``targets``, ``coverage_t_max``  coverage diagnostic of the curve family
``output``, ``format``    report destination and ``json`` or ``csv``
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from . import expr as ex
from .algebra import StratifiedAlgebra
from .errors import PreconditionError

_KEY = re.compile(r"[A-Za-z0-9_-]+(\.[A-Za-z0-9_-]+)*$")


class ConfigError(PreconditionError):
    """Malformed configuration text or value."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _natural(key: str):
    return tuple((0, int(w), "") if w.isdigit() else (1, 0, w) for w in key.split("."))


def _canonical_value(key: str, value: str) -> str:
    value = " ".join(value.split())
    if key.startswith("manifold.component."):
        try:
            return ex.to_string(ex.parse(value))
        except ex.ExprSyntaxError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    return value


@dataclass
class Config:
    """Ordered mapping of keys to canonical string values."""

    entries: Dict[str, str] = field(default_factory=dict)

    def __contains__(self, key):
        return key in self.entries

    def get(self, key: str, default=None):
        return self.entries.get(key, default)

    def set(self, key: str, value) -> None:
        if not _KEY.match(key):
            raise ConfigError(f"invalid key {key!r}")
        self.entries[key] = _canonical_value(key, str(value))

    def keys(self):
        return sorted(self.entries, key=_natural)

    def prefixed(self, prefix: str) -> Dict[str, str]:
        return {k[len(prefix):]: v for k, v in self.entries.items() if k.startswith(prefix)}

    # typed accessors -------------------------------------------------
    def integer(self, key: str, default: Optional[int] = None) -> int:
        v = self.get(key)
        if v is None:
            if default is None:
                raise ConfigError(f"missing key {key!r}")
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {v!r}") from None

    def number(self, key: str, default: Optional[float] = None) -> float:
        v = self.get(key)
        if v is None:
            if default is None:
                raise ConfigError(f"missing key {key!r}")
            return default
        try:
            return float(Fraction(v))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{key}: expected a number, got {v!r}") from None

    def numbers(self, key: str, default: Optional[Sequence[float]] = None) -> List[float]:
        v = self.get(key)
        if v is None:
            if default is None:
                raise ConfigError(f"missing key {key!r}")
            return list(default)
        try:
            return [float(Fraction(t)) for t in v.replace(",", " ").split()]
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{key}: expected numbers, got {v!r}") from None

    def rows(self, key: str) -> Optional[List[List[float]]]:
        v = self.get(key)
        if v is None:
            return None
        try:
            rows = [[float(Fraction(t)) for t in r.replace(",", " ").split()] for r in v.split(";")]
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"{key}: expected rows of numbers, got {v!r}") from None
        if len({len(r) for r in rows}) != 1 or not rows[0]:
            raise ConfigError(f"{key}: rows must be non-empty and of equal length")
        return rows

    def text(self, key: str, default: Optional[str] = None) -> str:
        v = self.get(key, default)
        if v is None:
            raise ConfigError(f"missing key {key!r}")
        return v


def parse_config(text: str) -> Config:
    cfg = Config()
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", n)
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError(f"invalid key {key!r}", n)
        if key in cfg.entries:
            raise ConfigError(f"duplicate key {key!r}", n)
        try:
            cfg.set(key, value)
        except ConfigError as exc:
            raise ConfigError(str(exc), n) from None
    return cfg


def serialize_config(cfg: Config) -> str:
    """Canonical text: keys in natural order, ``key = value`` lines."""
    return "".join(f"{k} = {cfg.entries[k]}\n" for k in cfg.keys())


def config_hash(cfg: Config) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()


# ---------------------------------------------------------------------------
# building objects


def _parse_bracket(key: str, value: str) -> Tuple[Tuple[int, int], Dict[int, Fraction]]:
    parts = key.split(".")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ConfigError(f"group.bracket.{key}: expected group.bracket.I.J")
    i, j = int(parts[0]) - 1, int(parts[1]) - 1
    out: Dict[int, Fraction] = {}
    for term in filter(None, (t.strip() for t in value.split(","))):
        k, _, c = term.partition(":")
        try:
            out[int(k) - 1] = Fraction(c.strip() or "1")
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"group.bracket.{key}: bad term {term!r}") from None
    return (i, j), out


def build_algebra(cfg: Config) -> StratifiedAlgebra:
    if cfg.text("group") != "inline":
        from . import catalog
        return catalog.get(cfg.text("group")).algebra
    try:
        layers = [int(t) for t in cfg.text("group.layers").split()]
    except ValueError:
        raise ConfigError("group.layers: expected integers") from None
    brackets = dict(_parse_bracket(k, v) for k, v in cfg.prefixed("group.bracket.").items())
    return StratifiedAlgebra(layers, brackets, name=cfg.get("group.name", "inline"))


def build_law(cfg: Config, algebra: Optional[StratifiedAlgebra] = None):
    from . import catalog
    from .group import compute_group_law
    if cfg.text("group") != "inline":
        return catalog.get(cfg.text("group")).law
    algebra = algebra or build_algebra(cfg)
    algebra.require_valid()
    return compute_group_law(algebra)


def build_manifold(cfg: Config, law):
    from .manifold import Submanifold
    name = cfg.text("manifold")
    if name != "inline":
        from . import catalog
        if cfg.text("group") == "inline":
            raise ConfigError("catalog submanifolds need a catalog group")
        entry = catalog.get(cfg.text("group"))
        if name not in entry.submanifolds:
            raise ConfigError(f"unknown submanifold {name!r} of {entry.name}")
        return entry.submanifolds[name]
    domain = cfg.rows("manifold.domain")
    if domain is None or any(len(r) != 2 for r in domain):
        raise ConfigError("manifold.domain: expected 'lo hi; lo hi; ...'")
    comps = cfg.prefixed("manifold.component.")
    try:
        idx = sorted(int(k) for k in comps)
    except ValueError:
        raise ConfigError("manifold.component.N needs an integer N") from None
    if idx != list(range(1, law.q + 1)):
        raise ConfigError(f"manifold needs components 1..{law.q}")
    params = cfg.get("manifold.params")
    return Submanifold(law, [comps[str(i)] for i in idx], [tuple(r) for r in domain],
                       params=params.split() if params else None, name="inline")
