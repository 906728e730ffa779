"""The bundled SMT-LIB v2 solver, driven over its actual pipe protocol."""
from __future__ import annotations

import subprocess
import sys

import pytest

from liasynth.oracle import SolverProcess, bundled_solver_command
from liasynth.terms import INT, BOOL


def run_script(script: str, timeout: float = 20.0) -> list[str]:
    proc = subprocess.run(
        bundled_solver_command(),
        input=script,
        capture_output=True,
        text=True,
        timeout=timeout,
    )
    assert proc.returncode == 0, proc.stderr
    return [ln for ln in proc.stdout.splitlines() if ln.strip()]


def test_check_sat_and_get_value():
    out = run_script(
        "(set-logic LIA)"
        "(declare-const x Int)"
        "(assert (> x 3))(assert (< x 5))"
        "(check-sat)"
        "(get-value (x (+ x 1)))"
    )
    assert out == ["sat", "((x 4) ((+ x 1) 5))"]


def test_unsat():
    out = run_script(
        "(declare-const x Int)(assert (> x 3))(assert (< x 4))(check-sat)"
    )
    assert out == ["unsat"]


def test_push_pop_scoping():
    out = run_script(
        "(declare-const x Int)"
        "(assert (>= x 0))"
        "(push 1)(assert (< x 0))(check-sat)(pop 1)"
        "(check-sat)"
    )
    assert out == ["unsat", "sat"]


def test_get_model_shape():
    out = run_script(
        "(declare-const x Int)(declare-const p Bool)"
        "(assert (= x (- 2)))(assert p)(check-sat)(get-model)"
    )
    assert out[0] == "sat"
    body = "\n".join(out[1:])
    assert "(define-fun x () Int (- 2))" in body
    assert "(define-fun p () Bool true)" in body


def test_model_unavailable_before_check():
    out = run_script("(declare-const x Int)(get-model)")
    assert out[0].startswith("(error")


def test_model_invalidated_by_new_assertion():
    out = run_script(
        "(declare-const x Int)(assert (> x 0))(check-sat)"
        "(assert (< x 0))(get-model)"
    )
    assert out[0] == "sat"
    assert out[1].startswith("(error")


def test_print_success_mode():
    out = run_script(
        "(set-option :print-success true)"
        "(declare-const x Int)"
        "(assert (>= x 1))"
        "(check-sat)"
    )
    assert out == ["success", "success", "success", "sat"]


def test_error_replies_keep_the_session_alive():
    out = run_script(
        "(declare-const x Int)"
        "(declare-const x Int)"   # duplicate
        "(assert (+ x 1))"        # not a Bool
        "(frobnicate)"            # unknown command
        "(pop 1)"                 # nothing pushed
        "(assert (= x 2))(check-sat)(get-value (x))"
    )
    assert [ln.startswith("(error") for ln in out[:4]] == [True] * 4
    assert out[4:] == ["sat", "((x 2))"]


def test_echo_and_exit():
    proc = subprocess.run(
        bundled_solver_command(),
        input='(echo "ping")(exit)(check-sat)',
        capture_output=True,
        text=True,
        timeout=20,
    )
    # exit stops reading: the trailing check-sat is never answered
    assert proc.stdout.splitlines() == ["ping"]
    assert proc.returncode == 0


def test_reset_assertions_keeps_declarations():
    out = run_script(
        "(declare-const x Int)(assert (= x 1))(check-sat)"
        "(reset-assertions)"
        "(assert (= x 2))(check-sat)(get-value (x))"
    )
    assert out == ["sat", "sat", "((x 2))"]


def test_commands_split_across_lines():
    out = run_script("(declare-const x Int)\n(assert\n  (= x\n     41))\n(check-sat)\n(get-value (x))")
    assert out == ["sat", "((x 41))"]


# --- the SolverProcess client ------------------------------------------------

def test_solver_process_conversation():
    with SolverProcess(bundled_solver_command()) as proc:
        proc.send("(declare-const a Int)")
        proc.send("(declare-const q Bool)")
        proc.send("(assert (and q (>= a 10)))")
        assert proc.check_sat() == "sat"
        model = proc.get_model({"a": INT, "q": BOOL})
        assert model["a"] >= 10 and model["q"] is True
        proc.send("(push 1)")
        proc.send("(assert (not q))")
        assert proc.check_sat() == "unsat"
        proc.send("(pop 1)")
        assert proc.check_sat() == "sat"


def test_solver_process_reports_crash():
    from liasynth.oracle import SolverCrashError

    with SolverProcess([sys.executable, "-c", "pass"]) as proc:
        with pytest.raises(SolverCrashError):
            proc.send("(check-sat)")
            proc.check_sat()
