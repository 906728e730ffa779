"""Context-free grammars over terms, partial programs, and SyGuS problems.

A grammar rule rewrites one nonterminal to a term template that may itself
contain nonterminal leaves.  Partial programs are terms with such leaves;
search expands the leftmost one, so every complete program corresponds to
exactly one leftmost derivation and the derivation tree is in bijection with
program prefixes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .terms import (
    BOOL,
    INT,
    Sort,
    Term,
    TermError,
    app,
    intval,
    nt,
    print_term,
    var,
)


class GrammarError(Exception):
    pass


class CompleteProgramError(GrammarError):
    """Raised when asking to expand a program that has no nonterminals left."""


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: Term

    def __str__(self):
        return f"{self.lhs} -> {print_term(self.rhs)}"


class Grammar:
    """Immutable grammar with per-nonterminal rule indices precomputed."""

    __slots__ = ("nonterminals", "rules", "start", "_by_lhs", "sort_of")

    def __init__(self, nonterminals, rules, start: str):
        self.nonterminals: tuple[tuple[str, Sort], ...] = tuple(nonterminals)
        self.rules: tuple[Rule, ...] = tuple(rules)
        self.start = start
        self.sort_of = dict(self.nonterminals)
        if len(self.sort_of) != len(self.nonterminals):
            raise GrammarError("duplicate nonterminal")
        if start not in self.sort_of:
            raise GrammarError(f"start symbol '{start}' is not a nonterminal")
        by_lhs: dict[str, list[int]] = {name: [] for name, _ in self.nonterminals}
        for i, r in enumerate(self.rules):
            if r.lhs not in self.sort_of:
                raise GrammarError(f"rule lhs '{r.lhs}' is not a nonterminal")
            if r.rhs.sort is not self.sort_of[r.lhs]:
                raise GrammarError(f"rule {r} produces the wrong sort")
            self._check_template(r.rhs)
            by_lhs[r.lhs].append(i)
        self._by_lhs = {k: tuple(v) for k, v in by_lhs.items()}
        self._check_disjoint()
        self._check_productive()

    def _check_template(self, t: Term):
        for sub in _walk(t):
            if sub.is_nt:
                declared = self.sort_of.get(sub.head)
                if declared is None:
                    raise GrammarError(f"undeclared nonterminal '{sub.head}' in rhs")
                if declared is not sub.sort:
                    raise GrammarError(f"nonterminal '{sub.head}' used at wrong sort")

    def _check_disjoint(self):
        terminals = set()
        for r in self.rules:
            for sub in _walk(r.rhs):
                if sub.is_var or (sub.is_app and sub.head not in self.sort_of):
                    terminals.add(sub.head)
        clash = terminals & set(self.sort_of)
        if clash:
            raise GrammarError(f"symbols used as both terminal and nonterminal: {clash}")

    def _check_productive(self):
        productive: set[str] = set()
        changed = True
        while changed:
            changed = False
            for r in self.rules:
                if r.lhs in productive:
                    continue
                if all(s.head in productive for s in _walk(r.rhs) if s.is_nt):
                    productive.add(r.lhs)
                    changed = True
        dead = set(self.sort_of) - productive
        if dead:
            raise GrammarError(f"unproductive nonterminals: {sorted(dead)}")

    def rules_for(self, nt_symbol: str) -> tuple[int, ...]:
        return self._by_lhs[nt_symbol]

    def start_symbol_term(self) -> Term:
        return nt(self.start, self.sort_of[self.start])

    def __eq__(self, other):
        if not isinstance(other, Grammar):
            return NotImplemented
        return (
            self.nonterminals == other.nonterminals
            and self.rules == other.rules
            and self.start == other.start
        )

    def __repr__(self):
        lines = [f"start: {self.start}"]
        lines += [f"  {r}" for r in self.rules]
        return "\n".join(lines)


def _walk(t: Term):
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(cur.args)


@dataclass(frozen=True)
class PartialProgram:
    """A term whose nonterminal leaves stand for unexpanded program fragments."""

    term: Term

    @property
    def complete(self) -> bool:
        return self.term.nt_count == 0

    @property
    def nt_count(self) -> int:
        return self.term.nt_count

    @property
    def size(self) -> int:
        return self.term.size

    def leftmost(self) -> Optional[tuple[str, tuple[int, ...]]]:
        """Symbol and path of the leftmost nonterminal leaf, or None."""
        t = self.term
        if t.nt_count == 0:
            return None
        path: list[int] = []
        while not t.is_nt:
            for i, a in enumerate(t.args):
                if a.nt_count:
                    path.append(i)
                    t = a
                    break
        return t.head, tuple(path)

    def __str__(self):
        return print_term(self.term)


def count_nonterminals(h: PartialProgram) -> int:
    return h.term.nt_count


def applicable_rules(h: PartialProgram, g: Grammar) -> tuple[int, ...]:
    """Indices into g.rules whose lhs is h's leftmost nonterminal."""
    lm = h.leftmost()
    if lm is None:
        raise CompleteProgramError("program is already complete")
    return g.rules_for(lm[0])


def expand_leftmost(h: PartialProgram, rule: Rule) -> PartialProgram:
    """Replace the leftmost nonterminal of h by rule's right-hand side."""
    lm = h.leftmost()
    if lm is None:
        raise CompleteProgramError("program is already complete")
    symbol, path = lm
    if symbol != rule.lhs:
        raise GrammarError(f"rule rewrites '{rule.lhs}' but leftmost is '{symbol}'")
    return PartialProgram(_replace(h.term, path, rule.rhs))


def _replace(t: Term, path: tuple[int, ...], rhs: Term) -> Term:
    if not path:
        return rhs
    i = path[0]
    child = _replace(t.args[i], path[1:], rhs)
    new_args = t.args[:i] + (child,) + t.args[i + 1 :]
    return Term(t.tag, t.head, t.value, new_args, t.sort)


def derive(g: Grammar, rule_indices: Iterable[int]) -> PartialProgram:
    """Apply a sequence of rules from the start symbol; handy in tests."""
    h = PartialProgram(g.start_symbol_term())
    for i in rule_indices:
        h = expand_leftmost(h, g.rules[i])
    return h


def lia_grammar(
    params: Sequence[tuple[str, Sort]],
    *,
    extra_constants: Sequence[int] = (),
    include_mul: bool = False,
    return_sort: Sort = INT,
) -> Grammar:
    """The LIA template grammar over the given parameters.

    Integer nonterminal I produces each Int parameter, 0, 1, any extra
    constants, +, -, and ite; Boolean nonterminal B produces each Bool
    parameter, comparisons, and connectives.  Nonterminal names are freshened
    if a parameter is literally named I or B.
    """
    names = {n for n, _ in params}
    i_sym, b_sym = "I", "B"
    while i_sym in names:
        i_sym = "N" + i_sym
    while b_sym in names:
        b_sym = "N" + b_sym
    I = nt(i_sym, INT)
    B = nt(b_sym, BOOL)
    rules: list[Rule] = []
    for name, sort in params:
        if sort is INT:
            rules.append(Rule(i_sym, var(name, INT)))
    rules.append(Rule(i_sym, intval(0)))
    rules.append(Rule(i_sym, intval(1)))
    for c in extra_constants:
        if c not in (0, 1):
            rules.append(Rule(i_sym, intval(c)))
    rules.append(Rule(i_sym, app("+", (I, I))))
    rules.append(Rule(i_sym, app("-", (I, I))))
    if include_mul:
        rules.append(Rule(i_sym, app("*", (I, I))))
    rules.append(Rule(i_sym, app("ite", (B, I, I))))
    for name, sort in params:
        if sort is BOOL:
            rules.append(Rule(b_sym, var(name, BOOL)))
    rules.append(Rule(b_sym, app(">=", (I, I))))
    rules.append(Rule(b_sym, app("<=", (I, I))))
    rules.append(Rule(b_sym, app("=", (I, I))))
    rules.append(Rule(b_sym, app("and", (B, B))))
    rules.append(Rule(b_sym, app("or", (B, B))))
    rules.append(Rule(b_sym, app("not", (B,))))
    start = i_sym if return_sort is INT else b_sym
    return Grammar(
        nonterminals=((i_sym, INT), (b_sym, BOOL)), rules=rules, start=start
    )


def default_grammar(params, *, return_sort: Sort = INT) -> Grammar:
    """Template grammar attached to problems that carry no grammar block."""
    return lia_grammar(params, return_sort=return_sort)


def derives(g: Grammar, t: Term, from_symbol: Optional[str] = None, _memo=None) -> bool:
    """Membership test: can the grammar derive complete term t?

    Works top-down by matching rule templates against t; exponential in
    principle but the template grammars here have no chain/epsilon rules, so
    each rule application consumes one node of t.
    """
    if from_symbol is None:
        from_symbol = g.start
    if _memo is None:
        _memo = {}
    key = (t, from_symbol)
    if key in _memo:
        return _memo[key]
    _memo[key] = False  # cycle guard; template grammars never recurse on equal keys
    ok = False
    for i in g.rules_for(from_symbol):
        if _matches(g, g.rules[i].rhs, t, _memo):
            ok = True
            break
    _memo[key] = ok
    return ok


def _matches(g: Grammar, template: Term, t: Term, memo) -> bool:
    if template.is_nt:
        return template.sort is t.sort and derives(g, t, template.head, memo)
    if template.args:
        if not (
            t.args
            and t.head == template.head
            and t.tag == template.tag
            and len(t.args) == len(template.args)
        ):
            return False
        return all(_matches(g, tp, tc, memo) for tp, tc in zip(template.args, t.args))
    return template == t


@dataclass(frozen=True)
class SygusProblem:
    """One synthesis task: find a body for the target making the constraint valid."""

    target_name: str
    params: tuple[tuple[str, Sort], ...]
    return_sort: Sort
    constraint: Term
    grammar: Grammar
    variables: tuple[tuple[str, Sort], ...] = ()
    logic: str = "LIA"
    name: str = ""

    def __post_init__(self):
        if self.grammar.sort_of[self.grammar.start] is not self.return_sort:
            raise GrammarError("grammar start symbol does not produce the return sort")
        if len({n for n, _ in self.params}) != len(self.params):
            raise GrammarError("duplicate parameter names")

    @property
    def param_sorts(self) -> tuple[Sort, ...]:
        return tuple(s for _, s in self.params)

    @property
    def start_program(self) -> PartialProgram:
        return PartialProgram(self.grammar.start_symbol_term())

    def to_text(self) -> str:
        return sygus_to_text(self)


def sygus_to_text(p: SygusProblem) -> str:
    """Render a problem back to SyGuS v2 concrete syntax."""
    out = [f"(set-logic {p.logic})", ""]
    params = " ".join(f"({n} {s})" for n, s in p.params)
    groups: dict[str, list[Term]] = {name: [] for name, _ in p.grammar.nonterminals}
    for r in p.grammar.rules:
        groups[r.lhs].append(r.rhs)
    # start symbol's group must come first in the printed block
    order = [p.grammar.start] + [
        n for n, _ in p.grammar.nonterminals if n != p.grammar.start
    ]
    decls = " ".join(f"({n} {p.grammar.sort_of[n]})" for n in order)
    out.append(f"(synth-fun {p.target_name} ({params}) {p.return_sort}")
    out.append(f"  ({decls})")
    out.append("  (")
    for n in order:
        prods = " ".join(print_term(t) for t in groups[n])
        out.append(f"    ({n} {p.grammar.sort_of[n]} ({prods}))")
    out.append("  ))")
    out.append("")
    for name, sort in p.variables:
        out.append(f"(declare-var {name} {sort})")
    if p.variables:
        out.append("")
    for c in _conjuncts(p.constraint):
        out.append(f"(constraint {print_term(c)})")
    out.append("")
    out.append("(check-synth)")
    return "\n".join(out) + "\n"


def _conjuncts(t: Term):
    if t.is_app and t.head == "and":
        return list(t.args)
    return [t]
