"""Shared strategies and fixtures for the test suite."""
from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from liasynth.grammar import SygusProblem, default_grammar
from liasynth.oracle import Oracle, bundled_solver_command
from liasynth.parsing import parse_sygus
from liasynth.terms import BOOL, INT, Term, app, boolval, intval, var

import hypothesis.strategies as st

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much],
)
settings.load_profile("default")

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"


# --- term strategies -------------------------------------------------------

def int_leaves(names=("x", "y"), lo=-8, hi=8):
    return st.one_of(
        st.integers(lo, hi).map(intval),
        st.sampled_from(names).map(lambda n: var(n, INT)),
    )


def int_terms(names=("x", "y"), max_leaves=8, lo=-8, hi=8):
    """Integer terms over the given variables, arbitrary arithmetic shape."""

    def extend(kids):
        binop = st.tuples(st.sampled_from(["+", "-", "*"]), kids, kids).map(
            lambda p: app(p[0], (p[1], p[2]))
        )
        # unary minus over a constant would print as a negative numeral,
        # which the parser folds; keep it off constants so terms round-trip
        neg = kids.filter(lambda t: not t.is_const).map(lambda t: app("-", (t,)))
        cmp = st.tuples(st.sampled_from([">=", "<=", ">", "<", "="]), kids, kids).map(
            lambda p: app(p[0], (p[1], p[2]))
        )
        ite = st.tuples(cmp, kids, kids).map(lambda p: app("ite", p))
        return st.one_of(binop, ite, neg)

    return st.recursive(int_leaves(names, lo, hi), extend, max_leaves=max_leaves)


def bool_terms(names=("x", "y"), max_leaves=8):
    atoms = st.one_of(
        st.booleans().map(boolval),
        st.tuples(
            st.sampled_from([">=", "<=", ">", "<", "="]),
            int_terms(names, max_leaves=4),
            int_terms(names, max_leaves=4),
        ).map(lambda p: app(p[0], (p[1], p[2]))),
    )

    def extend(kids):
        junction = st.tuples(st.sampled_from(["and", "or", "=>"]), kids, kids).map(
            lambda p: app(p[0], (p[1], p[2]))
        )
        negation = kids.map(lambda t: app("not", (t,)))
        return st.one_of(junction, negation)

    return st.recursive(atoms, extend, max_leaves=max_leaves)


def linear_int_terms(names=("x", "y"), max_leaves=6):
    """Integer terms where every product has a constant operand."""
    leaves = int_leaves(names, -6, 6)

    def extend(kids):
        addsub = st.tuples(st.sampled_from(["+", "-"]), kids, kids).map(
            lambda p: app(p[0], (p[1], p[2]))
        )
        scale = st.tuples(st.integers(-4, 4), kids).map(
            lambda p: app("*", (intval(p[0]), p[1]))
        )
        return st.one_of(addsub, scale)

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def linear_constraints(names=("x", "y"), max_leaves=6):
    atoms = st.tuples(
        st.sampled_from([">=", "<=", ">", "<", "="]),
        linear_int_terms(names, max_leaves),
        linear_int_terms(names, max_leaves),
    ).map(lambda p: app(p[0], (p[1], p[2])))

    def extend(kids):
        junction = st.tuples(st.sampled_from(["and", "or"]), kids, kids).map(
            lambda p: app(p[0], (p[1], p[2]))
        )
        negation = kids.map(lambda t: app("not", (t,)))
        return st.one_of(junction, negation)

    return st.recursive(atoms, extend, max_leaves=4)


# --- canned problems -------------------------------------------------------

MAX2_TEXT = """
(set-logic LIA)
(synth-fun f ((x Int) (y Int)) Int)
(declare-var x Int)
(declare-var y Int)
(constraint (>= (f x y) x))
(constraint (>= (f x y) y))
(constraint (or (= (f x y) x) (= (f x y) y)))
(check-synth)
"""

IDENTITY_TEXT = """
(set-logic LIA)
(synth-fun f ((x Int)) Int)
(declare-var x Int)
(constraint (= (f x) x))
(check-synth)
"""


@pytest.fixture
def max2_problem() -> SygusProblem:
    return parse_sygus(MAX2_TEXT)


@pytest.fixture
def identity_problem() -> SygusProblem:
    return parse_sygus(IDENTITY_TEXT)


def fresh_oracle(problem: SygusProblem, timeout: float = 5.0) -> Oracle:
    """An oracle pinned to the bundled solver, independent of the environment."""
    return Oracle(problem, solver_command=bundled_solver_command(), timeout=timeout)


def random_program(grammar, seed: int, cap: int = 60):
    """Random leftmost rollout; biased toward leaves so it usually completes."""
    import random as _random

    from liasynth.grammar import PartialProgram, applicable_rules, expand_leftmost

    rng = _random.Random(seed)
    h = PartialProgram(grammar.start_symbol_term())
    steps = 0
    while not h.complete and steps < cap:
        choices = applicable_rules(h, grammar)
        leafy = [i for i in choices if grammar.rules[i].rhs.nt_count == 0]
        pick = rng.choice(leafy if (leafy and rng.random() < 0.7) else list(choices))
        h = expand_leftmost(h, grammar.rules[pick])
        steps += 1
    return h
