"""
Symbolic brackets of time-tagged variables with Kronecker deltas.

Atoms are time-tagged canonical variables such as ``x(t)``, ``p2(1/2)`` or
``x(tau)``. Two atoms with the same kind and index but different tags are
independent symbols, and the derivative rule is

    d F(x(t_i)) / d x(t_j) = delta(t_i, t_j) * F'(x(t_i))

where ``delta`` is a Kronecker delta on exact time tags. Results are
:class:`DeltaExpr` values: sums of ``coefficient * product of deltas`` kept
in a canonical form so that equal results compare equal structurally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from .expr import (
    ONE, ZERO, Const, Expr, TimeTag, Var, add, const, differentiate, max_index, mul,
    neg, parse, substitute, to_string, variables,
)

__all__ = ["TimeTag", "DeltaExpr", "Term", "parse_tagged", "symbolic_partial", "symbolic_bracket", "delta"]

Delta = tuple[TimeTag, TimeTag]


def _coerce_tag(tag) -> TimeTag:
    if isinstance(tag, TimeTag):
        return tag
    if isinstance(tag, str):
        return parse_tag(tag)
    return TimeTag(tag)


def parse_tag(text: str) -> TimeTag:
    """``"t"``, ``"t'"``, ``"tau"``, ``"3"``, ``"-1/2"``, ``"0.25"`` -> :class:`TimeTag`."""
    text = text.strip()
    try:
        return TimeTag(Fraction(text))
    except ValueError:
        pass
    if not text or not (text[0].isalpha() or text[0] == "_"):
        raise ValueError(f"invalid time tag {text!r}")
    return TimeTag(text)


@dataclass(frozen=True)
class Term:
    coefficient: Expr
    deltas: tuple[Delta, ...]

    def __str__(self):
        factors = [f"delta({a},{b})" for a, b in self.deltas]
        if self.coefficient != ONE or not factors:
            c = to_string(self.coefficient)
            if isinstance(self.coefficient, Expr) and not isinstance(self.coefficient, (Const, Var)) and factors:
                c = f"({c})"
            factors.insert(0, c)
        return "*".join(factors)


def _find(parent: dict, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def _canonical_term(coefficient: Expr, deltas: Iterable[Delta]) -> Union[Term, None]:
    """Canonical form of one term, or ``None`` if it vanishes.

    The deltas of a term partition its tags into classes of tags forced
    equal. A class holding two distinct rationals makes the term zero. Each
    remaining class with members ``m0 < m1 < ...`` is written
    ``delta(m0, m1) * delta(m0, m2) * ...``; tags in the coefficient are
    replaced by their class representative ``m0``.
    """
    if coefficient == ZERO:
        return None
    parent: dict[TimeTag, TimeTag] = {}
    for a, b in deltas:
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        ra, rb = _find(parent, a), _find(parent, b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    classes: dict[TimeTag, list[TimeTag]] = {}
    for tag in parent:
        classes.setdefault(_find(parent, tag), []).append(tag)
    canonical: list[Delta] = []
    rep: dict[TimeTag, TimeTag] = {}
    for members in classes.values():
        members.sort()
        if sum(1 for m in members if m.is_rational) > 1:
            return None
        anchor = members[0]
        for m in members[1:]:
            canonical.append((anchor, m))
            rep[m] = anchor
    canonical.sort(key=lambda d: (d[0].sort_key(), d[1].sort_key()))
    if rep:
        coefficient = substitute(
            coefficient,
            lambda v: Var(v.kind, v.index, rep.get(v.tag, v.tag), v.alias) if v.tag in rep else v)
    return Term(coefficient, tuple(canonical))


@dataclass(frozen=True)
class DeltaExpr:
    """Canonical sum of terms; the empty sum is zero."""

    terms: tuple[Term, ...] = ()

    @classmethod
    def build(cls, raw: Iterable[tuple[Expr, Iterable[Delta]]]) -> "DeltaExpr":
        merged: dict[tuple[Delta, ...], Expr] = {}
        for coefficient, deltas in raw:
            term = _canonical_term(coefficient, [(_coerce_tag(a), _coerce_tag(b)) for a, b in deltas])
            if term is None:
                continue
            prev = merged.get(term.deltas)
            merged[term.deltas] = term.coefficient if prev is None else add(prev, term.coefficient)
        terms = [Term(c, d) for d, c in merged.items() if c != ZERO]
        terms.sort(key=lambda tm: (len(tm.deltas), [(a.sort_key(), b.sort_key()) for a, b in tm.deltas],
                                   to_string(tm.coefficient)))
        return cls(tuple(terms))

    @classmethod
    def scalar(cls, coefficient: Union[Expr, int]) -> "DeltaExpr":
        if not isinstance(coefficient, Expr):
            coefficient = const(coefficient)
        return cls.build([(coefficient, ())])

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "DeltaExpr") -> "DeltaExpr":
        return DeltaExpr.build([(t.coefficient, t.deltas) for t in self.terms + other.terms])

    def __neg__(self) -> "DeltaExpr":
        return DeltaExpr.build([(neg(t.coefficient), t.deltas) for t in self.terms])

    def __sub__(self, other: "DeltaExpr") -> "DeltaExpr":
        return self + (-other)

    def __mul__(self, other: "DeltaExpr") -> "DeltaExpr":
        return DeltaExpr.build(
            (mul(a.coefficient, b.coefficient), a.deltas + b.deltas)
            for a in self.terms for b in other.terms)

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(str(t) for t in self.terms).replace("+ -", "- ")


def delta(a, b) -> DeltaExpr:
    """The single Kronecker delta ``delta(a, b)`` as a :class:`DeltaExpr`."""
    return DeltaExpr.build([(ONE, [(a, b)])])


def parse_tagged(text: str, n_dof: int = None) -> Expr:
    """Parse an expression whose variables all carry time tags, e.g. ``sin(x(t))*p(tau)``.

    ``n_dof`` defaults to the largest variable index appearing in ``text``.
    """
    if n_dof is None:
        indices = [int(d) for d in re.findall(r"(?<![A-Za-z0-9_])[xp](\d+)", text)]
        n_dof = max(indices, default=1)
    return parse(text, n_dof, tagged=True)


def _atoms(e: Expr) -> list[Var]:
    return sorted(variables(e), key=lambda v: (v.kind, v.index, v.tag.sort_key() if v.tag else ()))


def symbolic_partial(F: Union[Expr, str], wrt: Union[Var, str]) -> DeltaExpr:
    """``dF / d wrt`` where ``wrt`` is a tagged atom such as ``x(tau)``.

    Every atom of ``F`` with the same kind and index contributes
    ``delta(its tag, wrt tag) * dF/d(atom)``.
    """
    F = parse_tagged(F) if isinstance(F, str) else F
    if isinstance(wrt, str):
        wrt = parse_tagged(wrt)
    if not isinstance(wrt, Var) or wrt.tag is None:
        raise ValueError("symbolic_partial needs a time-tagged variable to differentiate by")
    raw = []
    for atom in _atoms(F):
        if atom.tag is None:
            raise ValueError(f"variable {to_string(atom)} has no time tag")
        if atom.kind == wrt.kind and atom.index == wrt.index:
            raw.append((differentiate(F, atom), [(atom.tag, wrt.tag)]))
    return DeltaExpr.build(raw)


def symbolic_bracket(A: Union[Expr, str], B: Union[Expr, str], tau) -> DeltaExpr:
    """``{A, B}_tau = sum_k dA/dx_k(tau) dB/dp_k(tau) - dA/dp_k(tau) dB/dx_k(tau)``."""
    A = parse_tagged(A) if isinstance(A, str) else A
    B = parse_tagged(B) if isinstance(B, str) else B
    tau = _coerce_tag(tau)
    n = max(max_index(A), max_index(B), 1)
    result = DeltaExpr()
    for k in range(1, n + 1):
        xk = Var("x", k, tau)
        pk = Var("p", k, tau)
        result = result + symbolic_partial(A, xk) * symbolic_partial(B, pk) \
            - symbolic_partial(A, pk) * symbolic_partial(B, xk)
    return result
