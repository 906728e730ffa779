"""The bundled linear-integer-arithmetic decision procedure.

Differential testing: `decide` is checked against brute-force enumeration
over a small integer box.  Any model it returns is re-checked by `evaluate`;
"unsat" answers must leave the box empty.
"""
from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from conftest import linear_constraints
from liasynth.lia import decide
from liasynth.parsing import read_all, term_from_sexpr
from liasynth.terms import BOOL, INT, evaluate

ENV2 = {"x": INT, "y": INT}


def formula(text: str, env=None):
    env = env or ENV2
    return term_from_sexpr(read_all(text)[0], env)


def brute_force_sat(assertions, lo=-12, hi=12):
    for vx, vy in itertools.product(range(lo, hi + 1), repeat=2):
        env = {"x": vx, "y": vy}
        if all(evaluate(a, env) for a in assertions):
            return env
    return None


# --- pinned verdicts ---------------------------------------------------------

@pytest.mark.parametrize(
    "texts,verdict",
    [
        (["(> x 3)", "(< x 5)"], "sat"),          # only x = 4
        (["(> x 3)", "(< x 4)"], "unsat"),        # empty over the integers
        (["(= (* 2 x) 3)"], "unsat"),             # divisibility
        (["(= (* 2 x) 6)"], "sat"),
        (["(= (+ x y) 2)", "(= (- x y) 4)"], "sat"),
        (["(= (+ x y) 2)", "(= (- x y) 3)"], "unsat"),  # parity
        (["(>= x 0)", "(<= x 10)", "(= (+ x y) 0)", "(> y 0)"], "unsat"),
        (["(or (= x 1) (= x 2))", "(not (= x 1))"], "sat"),
        (["true"], "sat"),
        (["false"], "unsat"),
    ],
)
def test_decide_verdicts(texts, verdict):
    assertions = [formula(t) for t in texts]
    status, model = decide(assertions, ENV2)
    assert status == verdict
    if verdict == "sat":
        assert all(evaluate(a, model) for a in assertions)


def test_exact_tight_solution():
    status, model = decide([formula("(> x 3)"), formula("(< x 5)")], ENV2)
    assert status == "sat" and model["x"] == 4


def test_unconstrained_variables_get_defaults():
    status, model = decide([formula("(= x 7)")], {"x": INT, "y": INT, "p": BOOL})
    assert status == "sat"
    assert model == {"x": 7, "y": 0, "p": False}


def test_boolean_structure():
    env = {"p": BOOL, "q": BOOL}
    f = lambda t: formula(t, env)
    assert decide([f("(and p (not p))")], env)[0] == "unsat"
    status, model = decide([f("(or p q)"), f("(not p)")], env)
    assert status == "sat" and model["q"] is True and model["p"] is False


def test_ite_inside_arithmetic():
    t = formula("(= (ite (>= x y) x y) 5)")
    status, model = decide([t], ENV2)
    assert status == "sat"
    assert max(model["x"], model["y"]) == 5


def test_nonlinear_reports_unknown():
    assert decide([formula("(= (* x x) 4)")], ENV2)[0] == "unknown"


def test_budget_exhaustion_reports_unknown():
    clauses = [formula(f"(or (= x {i}) (= y {i}))") for i in range(12)]
    assert decide(clauses, ENV2, max_steps=3)[0] == "unknown"


def test_large_coefficients():
    status, model = decide(
        [formula("(= (+ (* 1000000007 x) (* 998244353 y)) 1)")], ENV2
    )
    assert status == "sat"
    assert 1000000007 * model["x"] + 998244353 * model["y"] == 1


# --- differential property ----------------------------------------------------

@given(st.lists(linear_constraints(), min_size=1, max_size=4))
@settings(max_examples=150)
def test_decide_agrees_with_brute_force(assertions):
    status, model = decide(assertions, ENV2, timeout=5.0)
    witness = brute_force_sat(assertions)
    if status == "sat":
        assert all(evaluate(a, model) for a in assertions)
    elif status == "unsat":
        assert witness is None, f"unsat but {witness} satisfies everything"
    # brute-force found a model inside the box: decide must not say unsat,
    # and (with this budget) is expected to find one too
    if witness is not None:
        assert status == "sat"


@given(st.lists(linear_constraints(names=("x",)), min_size=1, max_size=3))
@settings(max_examples=100)
def test_single_variable_decide_is_exact(assertions):
    """With one variable, a +/-40 box plus coefficient reasoning is decisive
    enough for a strict two-sided check against brute force over the box."""
    status, model = decide(assertions, {"x": INT}, timeout=5.0)
    box = [v for v in range(-40, 41) if all(evaluate(a, {"x": v}) for a in assertions)]
    if status == "unsat":
        assert not box
    if status == "sat":
        assert all(evaluate(a, model) for a in assertions)
