"""Syntactic first-order unification and anti-unification over terms.

unify returns a most general unifier as an idempotent substitution, or a
UnifyFailure value (never an exception) describing the clash or occurs-check
violation.  anti_unify computes the least general generalization of a set of
equally-sorted terms together with the witness substitution for each input.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

from .terms import (
    Sort,
    SortError,
    Substitution,
    Term,
    free_vars,
    print_term,
    substitute,
    var,
)


@dataclass(frozen=True)
class UnifyFailure:
    """Why two terms do not unify: a head clash or an occurs-check violation."""

    kind: str  # "clash" | "occurs"
    left: Term
    right: Term

    def __str__(self):
        return f"{self.kind}: {print_term(self.left)} vs {print_term(self.right)}"

    def __bool__(self):
        return False


UnifyResult = Union[Substitution, UnifyFailure]


def unify(a: Term, b: Term) -> UnifyResult:
    """Most general unifier of a and b, or a UnifyFailure.

    Preconditions: both terms well-sorted with the same sort (SortError
    otherwise).  Nonterminal leaves unify only with themselves.
    """
    if a.sort is not b.sort:
        raise SortError("cannot unify terms of different sorts")
    bindings: dict[str, Term] = {}
    work = [(a, b)]
    while work:
        s, t = work.pop()
        s = _resolve(s, bindings)
        t = _resolve(t, bindings)
        if s is t or s == t:
            continue
        if s.is_var or t.is_var:
            if not s.is_var:
                s, t = t, s
            image = substitute(t, Substitution(bindings)) if t.args else t
            if s.head in free_vars(image):
                return UnifyFailure("occurs", s, image)
            _bind(bindings, s.head, image)
            continue
        if s.head != t.head or s.tag != t.tag or len(s.args) != len(t.args):
            return UnifyFailure("clash", s, t)
        work.extend(zip(s.args, t.args))
    return Substitution(bindings)


def _resolve(t: Term, bindings: dict) -> Term:
    while t.is_var and t.head in bindings:
        t = bindings[t.head]
    return t


def _bind(bindings: dict, name: str, image: Term):
    # keep the map idempotent: fold the new binding into existing images
    one = Substitution({name: image})
    for k in list(bindings):
        bindings[k] = substitute(bindings[k], one)
    bindings[name] = image


@dataclass(frozen=True)
class GeneralizationResult:
    """LGG of the inputs plus, per input, the substitution mapping it back."""

    lgg: Term
    witnesses: tuple[Substitution, ...]

    @property
    def fresh_vars(self) -> tuple[str, ...]:
        if not self.witnesses:
            return ()
        return tuple(sorted(self.witnesses[0].domain, key=_var_order))

    def lgg_size(self) -> int:
        return self.lgg.size


def _var_order(name: str):
    # x1, x2, ... x10 in numeric order; fall back to lexicographic
    digits = name.lstrip("_x")
    return (0, int(digits)) if digits.isdigit() else (1, name)


def anti_unify(terms: Sequence[Term]) -> GeneralizationResult:
    """Least general generalization of one or more equally-sorted terms.

    Positions where the inputs disagree become fresh variables named x1, x2,
    ... in first-occurrence order; the same disagreement tuple is mapped to
    the same variable everywhere, which is what makes the result *least*
    general.  Fresh names never collide with variables of the inputs.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("anti_unify needs at least one term")
    sort = terms[0].sort
    for t in terms[1:]:
        if t.sort is not sort:
            raise SortError("anti_unify inputs must share a sort")
    used: set[str] = set()
    for t in terms:
        used |= free_vars(t)
    table: dict[tuple[Term, ...], Term] = {}
    counter = [0]

    def fresh(sort: Sort) -> Term:
        counter[0] += 1
        name = f"x{counter[0]}"
        while name in used:
            name = "_" + name
        return var(name, sort)

    def gen(column: tuple[Term, ...]) -> Term:
        first = column[0]
        if all(t == first for t in column[1:]):
            return first
        if (
            first.is_app
            and all(
                t.is_app and t.head == first.head and len(t.args) == len(first.args)
                for t in column[1:]
            )
        ):
            new_args = tuple(
                gen(tuple(t.args[i] for t in column)) for i in range(len(first.args))
            )
            return Term(first.tag, first.head, first.value, new_args, first.sort)
        hit = table.get(column)
        if hit is None:
            hit = table[column] = fresh(first.sort)
        return hit

    lgg = gen(tuple(terms))
    witnesses = tuple(
        Substitution({v.head: column[i] for column, v in table.items()})
        for i in range(len(terms))
    )
    return GeneralizationResult(lgg=lgg, witnesses=witnesses)
