"""S-expression reading, SMT-LIB scripts, and SyGuS problems."""
from __future__ import annotations

import pytest
from hypothesis import given

from conftest import MAX2_TEXT, bool_terms, int_terms
from liasynth.grammar import sygus_to_text
from liasynth.parsing import (
    ParseError,
    UnsupportedError,
    parse_smt,
    parse_sygus,
    read_all,
    term_from_sexpr,
    tokenize,
)
from liasynth.terms import BOOL, INT, app, intval, print_term, var


def parse_term(text: str, env=None, **kw):
    return term_from_sexpr(read_all(text)[0], env or {"x": INT, "y": INT}, **kw)


# --- tokenizer / reader ----------------------------------------------------

def test_tokenizer_strips_comments_and_tracks_position():
    toks = list(tokenize("(+ x ; rest of line\n 1)"))
    assert [t.text for t in toks] == ["(", "+", "x", "1", ")"]
    assert (toks[0].line, toks[0].col) == (1, 1)
    assert toks[3].line == 2


def test_read_all_nests():
    exprs = read_all("(a (b c) d) e")
    assert len(exprs) == 2
    assert isinstance(exprs[0], list) and len(exprs[0]) == 3
    assert exprs[1].text == "e"


@pytest.mark.parametrize("bad", ["(", "(a (b)", ")", "(a))"])
def test_unbalanced_parens_raise(bad):
    with pytest.raises(ParseError):
        read_all(bad)


# --- terms from s-expressions ----------------------------------------------

def test_negative_numerals_fold():
    t = parse_term("(- 3)")
    assert t.is_const and t.value == -3
    with pytest.raises(ParseError):
        parse_term("(- (- 3))")


def test_unary_minus_on_variables_stays_an_application():
    t = parse_term("(- x)")
    assert t.is_app and t.head == "-" and len(t.args) == 1


def test_unknown_symbol_raises_with_position():
    with pytest.raises(ParseError) as exc:
        parse_term("(+ x unknown)")
    assert "unknown" in str(exc.value)


def test_let_expands():
    t = parse_term("(let ((a (+ x 1))) (+ a a))")
    inner = app("+", (var("x", INT), intval(1)))
    assert t == app("+", (inner, inner))


def test_let_bindings_are_parallel():
    # the right-hand side of b sees the outer x, not the sibling binding
    t = parse_term("(let ((x 5) (b x)) (+ x b))")
    assert t == app("+", (intval(5), var("x", INT)))


def test_oversized_numeral_rejected():
    with pytest.raises(ParseError):
        parse_term(str(2**64))


@given(int_terms(names=("x", "y", "z")))
def test_int_term_round_trip(t):
    env = {"x": INT, "y": INT, "z": INT}
    assert term_from_sexpr(read_all(print_term(t))[0], env) == t


@given(bool_terms(names=("x", "y", "z")))
def test_bool_term_round_trip(t):
    env = {"x": INT, "y": INT, "z": INT}
    assert term_from_sexpr(read_all(print_term(t))[0], env) == t


@given(bool_terms(names=("x",)))
def test_print_is_stable_under_reparsing(t):
    env = {"x": INT}
    once = print_term(term_from_sexpr(read_all(print_term(t))[0], env))
    twice = print_term(term_from_sexpr(read_all(once)[0], env))
    assert once == twice


# --- SMT-LIB scripts --------------------------------------------------------

SMT_TEXT = """
(set-logic LIA)
(set-info :source |whatever|)
(declare-const a Int)
(declare-fun b () Int)
(declare-const p Bool)
(assert (>= (+ a b) 0))
(assert p)
(check-sat)
"""


def test_parse_smt_collects_declarations_and_assertions():
    prob = parse_smt(SMT_TEXT)
    assert prob.logic == "LIA"
    assert prob.variables == [("a", INT), ("b", INT), ("p", BOOL)]
    assert len(prob.assertions) == 2
    assert print_term(prob.assertions[0]) == "(>= (+ a b) 0)"
    assert prob.var_env["p"] is BOOL


def test_parse_smt_rejects_duplicate_declaration():
    with pytest.raises(ParseError):
        parse_smt("(declare-const a Int)(declare-const a Int)")


def test_parse_smt_rejects_nonzero_arity():
    with pytest.raises(UnsupportedError):
        parse_smt("(declare-fun g (Int) Int)")


def test_parse_smt_rejects_unknown_command():
    with pytest.raises(UnsupportedError):
        parse_smt("(define-fun g () Int 1)")


# --- SyGuS problems ---------------------------------------------------------

def test_parse_sygus_basic_shape():
    p = parse_sygus(MAX2_TEXT)
    assert p.target_name == "f"
    assert p.params == (("x", INT), ("y", INT))
    assert p.return_sort is INT
    assert p.variables == (("x", INT), ("y", INT))
    # constraints conjoin in order
    assert p.constraint.head == "and"
    assert len(p.constraint.args) == 3


def test_parse_sygus_requires_check_synth():
    with pytest.raises(ParseError):
        parse_sygus("(set-logic LIA)(synth-fun f ((x Int)) Int)(constraint true)")


def test_parse_sygus_rejects_other_logics():
    with pytest.raises(UnsupportedError):
        parse_sygus("(set-logic BV)(synth-fun f ((x Int)) Int)(check-synth)")


def test_parse_sygus_with_explicit_grammar():
    text = """
    (set-logic LIA)
    (synth-fun f ((x Int)) Int
      ((S Int))
      ((S Int (x 0 (+ S S)))))
    (declare-var x Int)
    (constraint (>= (f x) x))
    (check-synth)
    """
    p = parse_sygus(text)
    assert p.grammar.start == "S"
    assert len(p.grammar.rules) == 3
    spells = {str(r) for r in p.grammar.rules}
    assert spells == {"S -> x", "S -> 0", "S -> (+ S S)"}


def test_default_grammar_attached_when_block_missing():
    p = parse_sygus(MAX2_TEXT)
    rhs = {str(r) for r in p.grammar.rules}
    assert "I -> x" in rhs and "I -> y" in rhs
    assert any("ite" in s for s in rhs)


def test_sygus_round_trip_through_text():
    p = parse_sygus(MAX2_TEXT)
    q = parse_sygus(sygus_to_text(p))
    assert q.target_name == p.target_name
    assert q.params == p.params
    assert q.return_sort is p.return_sort
    assert q.variables == p.variables
    assert q.constraint == p.constraint
    assert q.grammar == p.grammar


def test_parse_sygus_constraint_defaults_to_true():
    p = parse_sygus("(set-logic LIA)(synth-fun f ((x Int)) Int)(check-synth)")
    assert print_term(p.constraint) == "true"
