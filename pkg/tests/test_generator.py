"""Mining synthesis problems out of SMT assertions: candidate selection,
problem emission, classification, and the corpus pipeline."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from conftest import fresh_oracle
from liasynth.generator import (
    Category,
    GenerationError,
    SolutionRejectedError,
    classify,
    filter_similar,
    generate_corpus,
    generate_sygus,
    harvest_constants,
    select_subterms,
)
from liasynth.oracle import Verdict, bundled_solver_command
from liasynth.parsing import parse_smt
from liasynth.terms import app, free_vars, intval, print_term, substitute, var
from liasynth.terms import INT

SOLVER = bundled_solver_command()


def assertions_of(text: str):
    src = parse_smt(text)
    return src.assertions, src.variables


# --- candidate selection -------------------------------------------------------

MUL_SOURCE = """
(set-logic LIA)
(assert (>= (+ (* 2 1) 8) 8))
(assert (>= (+ (* 2 3) 5) 3))
"""


def test_largest_shared_template_ranks_first():
    assertions, _ = assertions_of(MUL_SOURCE)
    sets = select_subterms(assertions)
    assert sets
    top = sets[0]
    assert print_term(top.gen.lgg) == "(+ (* 2 x1) x2)"
    assert top.gen.fresh_vars == ("x1", "x2")
    assert top.lgg_size == 5 and top.n_fresh == 2
    # each witness reinstantiates its occurrence exactly
    for occ, witness in zip(top.occurrences, top.gen.witnesses):
        assert substitute(top.gen.lgg, witness) == occ.term


def test_bare_variable_templates_are_dropped():
    assertions, _ = assertions_of(
        """
        (set-logic LIA)
        (declare-const x Int)
        (declare-const y Int)
        (assert (>= x 0))
        (assert (>= y 0))
        """
    )
    assert select_subterms(assertions) == []


def test_identical_occurrences_are_dropped():
    assertions, _ = assertions_of(
        """
        (set-logic LIA)
        (declare-const x Int)
        (declare-const y Int)
        (assert (>= x (+ 2 2)))
        (assert (<= (+ 2 2) y))
        """
    )
    sets = select_subterms(assertions)
    assert all(s.n_fresh >= 1 for s in sets)
    assert not any(print_term(s.gen.lgg) == "(+ 2 2)" for s in sets)


def test_templates_mentioning_source_variables_are_dropped():
    assertions, _ = assertions_of(
        """
        (set-logic LIA)
        (declare-const x Int)
        (assert (>= (+ x 1) x))
        (assert (>= (+ x 2) x))
        """
    )
    for s in select_subterms(assertions):
        assert free_vars(s.gen.lgg) <= set(s.gen.fresh_vars)
        assert "x" not in free_vars(s.gen.lgg)


def test_overlapping_occurrences_are_dropped():
    assertions, _ = assertions_of(
        """
        (set-logic LIA)
        (assert (>= (+ (+ 1 2) 3) (+ (+ 1 2) 3)))
        """
    )
    for s in select_subterms(assertions):
        (a, b) = s.occurrences
        if a.assertion == b.assertion:
            shorter, longer = sorted((a.path, b.path), key=len)
            assert longer[: len(shorter)] != shorter


def test_repeated_differences_share_one_fresh_variable():
    assertions, _ = assertions_of(
        """
        (set-logic LIA)
        (assert (not (= (+ 2 2) (+ 3 3))))
        """
    )
    sets = select_subterms(assertions)
    assert any(
        print_term(s.gen.lgg) == "(+ x1 x1)" and s.gen.fresh_vars == ("x1",)
        for s in sets
    )


# --- emitting one problem ------------------------------------------------------

def test_emitted_problem_matches_the_worked_example():
    assertions, variables = assertions_of(MUL_SOURCE)
    cand = select_subterms(assertions)[0]
    gp = generate_sygus(assertions, variables, cand, "toy", SOLVER)

    p = gp.problem
    assert p.target_name == "f"
    assert p.params == (("x1", INT), ("x2", INT))
    assert print_term(p.constraint) == "(and (>= (f 1 8) 8) (>= (f 3 5) 3))"
    assert print_term(gp.known_solution) == "(+ (* 2 x1) x2)"
    assert p.variables == ()  # fully ground after replacement

    consts = {r.rhs.value for r in p.grammar.rules if r.rhs.is_const}
    assert {0, 1, 2, 3, 5, 8} <= consts
    assert any(r.rhs.is_app and r.rhs.head == "*" for r in p.grammar.rules)

    # paths point at exactly the terms the witnesses rebuild
    assert gp.occurrence_paths == tuple(
        (o.assertion, o.path) for o in cand.occurrences
    )
    with fresh_oracle(p) as oracle:
        assert oracle.verify(gp.known_solution).verdict is Verdict.VALID


def test_multiplication_rule_only_appears_when_the_template_needs_it():
    assertions, variables = assertions_of(
        """
        (set-logic LIA)
        (assert (and (= (+ 3 1) 4) (= (+ 7 1) 8)))
        """
    )
    cand = next(
        s for s in select_subterms(assertions) if print_term(s.gen.lgg) == "(+ x1 1)"
    )
    gp = generate_sygus(assertions, variables, cand, "addonly", SOLVER)
    assert not any(r.rhs.is_app and r.rhs.head == "*" for r in gp.problem.grammar.rules)


def test_invalid_source_formula_is_rejected():
    # same source as the residue test below, but with the validity gate on:
    # (>= 3 x) is falsifiable, so emission stops before any mining happens
    assertions, variables = assertions_of(
        """
        (set-logic LIA)
        (declare-const x Int)
        (assert (>= (+ 2 1) x))
        (assert (>= (+ 5 1) x))
        """
    )
    cand = select_subterms(assertions)[0]
    with pytest.raises(GenerationError, match="not valid"):
        generate_sygus(assertions, variables, cand, "bad", SOLVER)


def test_nonlinear_template_is_rejected():
    assertions, _ = assertions_of(
        """
        (set-logic LIA)
        (assert (>= (+ (* 2 1) 8) 8))
        (assert (>= (+ (* 1 3) 5) 3))
        """
    )
    top = select_subterms(assertions)[0]
    assert print_term(top.gen.lgg) == "(+ (* x1 x2) x3)"
    with pytest.raises(GenerationError):
        generate_sygus(assertions, [], top, "nonlin", SOLVER, check_source=False)


def test_template_failing_on_unreplaced_variables_is_rejected_loudly():
    # the residue (>= 3 x) does not hold for every x, so the harvested
    # solution must fail its own verification
    assertions, variables = assertions_of(
        """
        (set-logic LIA)
        (declare-const x Int)
        (assert (>= (+ 2 1) x))
        (assert (>= (+ 5 1) x))
        """
    )
    cand = next(
        s for s in select_subterms(assertions) if print_term(s.gen.lgg) == "(+ x1 1)"
    )
    with pytest.raises(SolutionRejectedError):
        generate_sygus(assertions, variables, cand, "res", SOLVER, check_source=False)


def test_unverifiable_solution_is_an_error_not_a_problem():
    assertions, variables = assertions_of(
        """
        (set-logic LIA)
        (declare-const x Int)
        (assert (and (>= (+ 2 1) 0) (>= (+ 5 1) 0) (>= (* x x) 0)))
        """
    )
    cand = next(
        s for s in select_subterms(assertions) if print_term(s.gen.lgg) == "(+ x1 1)"
    )
    with pytest.raises(GenerationError):
        generate_sygus(assertions, variables, cand, "nl", SOLVER, check_source=False)


# --- constants and similarity --------------------------------------------------

def test_harvest_constants_dedupes_and_sorts():
    t = app(
        "+",
        (
            app("*", (intval(2), var("x", INT))),
            app(
                "ite",
                (app(">=", (var("x", INT), intval(5))), intval(2), intval(-7)),
            ),
        ),
    )
    assert harvest_constants(t) == [-7, 2, 5]


def make_gp(text: str, source: str, name: str = "g"):
    assertions, variables = assertions_of(text)
    cand = select_subterms(assertions)[0]
    return generate_sygus(assertions, variables, cand, name, SOLVER, source=source)


def test_filter_similar_keeps_one_per_family_and_shape():
    a = make_gp(MUL_SOURCE, "bench_01.smt2")
    b = make_gp(MUL_SOURCE.replace("8", "9"), "bench_02.smt2")
    c = make_gp(MUL_SOURCE, "lin2_01.smt2")
    d = make_gp(MUL_SOURCE, "lin3_01.smt2")
    kept = filter_similar([a, b, c, d])
    assert kept == [a, c, d]  # bench_02 folds into bench_01; lin2/lin3 differ
    assert filter_similar(kept) == kept


# --- classification -------------------------------------------------------------

def test_parameter_solvable_problem_is_basic():
    gp = make_gp(
        """
        (set-logic LIA)
        (assert (not (= (+ 2 2) (+ 3 3))))
        """,
        "eq.smt2",
    )
    assert classify(gp, SOLVER, budget_seconds=5.0) is Category.BASIC


def test_searched_ite_free_problem_is_straight_line():
    gp = make_gp(
        """
        (set-logic LIA)
        (assert (and (= (+ 3 1) 4) (= (+ 7 1) 8)))
        """,
        "inc.smt2",
    )
    assert classify(gp, SOLVER, budget_seconds=20.0) is Category.STRAIGHT_LINE


def test_starved_search_reports_unsolved():
    gp = make_gp(
        """
        (set-logic LIA)
        (assert (and (= (+ (* 3 3) 1) 10) (= (+ (* 3 7) 1) 22)))
        """,
        "hard.smt2",
    )
    assert classify(gp, SOLVER, budget_seconds=0.05) is Category.UNSOLVED


# --- the pipeline ----------------------------------------------------------------

def test_corpus_pipeline_emits_manifest_and_skip_log(tmp_path):
    smt = tmp_path / "smt"
    out = tmp_path / "out"
    smt.mkdir()
    (smt / "good.smt2").write_text(MUL_SOURCE)
    # invalid as stated, valid once negated
    (smt / "flip.smt2").write_text(
        "(set-logic LIA)\n(assert (= (+ 2 2) (+ 3 3)))\n"
    )
    (smt / "broken.smt2").write_text("(assert (= 1")
    messages = []
    report = generate_corpus(
        smt, out, classify_budget=5.0, solver_command=SOLVER, log=messages.append
    )

    names = [name for name, _ in report.emitted]
    assert any(n.startswith("good__") for n in names)
    assert any(n.startswith("flip__") for n in names)
    assert any(src == "broken.smt2" for src, _ in report.skipped)

    rows = [
        json.loads(line)
        for line in (out / "manifest.jsonl").read_text().splitlines()
    ]
    assert len(rows) == len(report.emitted)
    for row in rows:
        assert set(row) == {
            "file",
            "source",
            "category",
            "known_solution",
            "lgg_size",
            "occurrences",
        }
        assert (out / row["file"]).exists()
        assert row["category"] in {"B", "S", "C", "U"}
    assert (out / "skipped.log").exists()
    assert messages and "emitted" in messages[0]


def test_corpus_problems_round_trip_and_verify(tmp_path):
    from liasynth.parsing import parse_sygus

    smt = tmp_path / "smt"
    out = tmp_path / "out"
    smt.mkdir()
    (smt / "good.smt2").write_text(MUL_SOURCE)
    report = generate_corpus(
        smt, out, classify_budget=0.0, solver_command=SOLVER, log=lambda m: None
    )
    assert report.emitted
    for name, gp in report.emitted:
        reloaded = parse_sygus((out / f"{name}.sl").read_text())
        with fresh_oracle(reloaded) as oracle:
            assert oracle.verify(gp.known_solution).verdict is Verdict.VALID
