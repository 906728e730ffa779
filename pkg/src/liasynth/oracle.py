"""Verification oracle: an SMT-LIB v2 solver subprocess behind a typed API.

The oracle owns one long-lived solver process per problem, declares the
problem's free variables once, and answers candidate-correctness queries
incrementally with push/pop.  A candidate body is correct iff the constraint
with every target application inlined is valid, i.e. its negation is
unsatisfiable.  Counterexamples are parsed from get-model and cross-checked
against the in-process evaluator, so a lying or confused solver is caught
instead of silently steering the search.
"""
from __future__ import annotations

import os
import shutil
import subprocess
import sys
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .grammar import SygusProblem
from .parsing import Atom, ParseError, read_all
from .terms import (
    BOOL,
    INT,
    Sort,
    Substitution,
    Term,
    app,
    evaluate,
    free_vars,
    print_term,
    substitute,
)


class OracleError(Exception):
    pass


class SolverCrashError(OracleError):
    """The solver process died or closed its pipes mid-session."""


class ProtocolError(OracleError):
    """The solver replied with something that is not in the protocol."""


class Verdict(Enum):
    VALID = "valid"
    INVALID = "invalid"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class VerificationResult:
    verdict: Verdict
    counterexample: Optional[dict] = None
    elapsed: float = 0.0

    @property
    def is_valid(self) -> bool:
        return self.verdict is Verdict.VALID


def bundled_solver_command() -> list[str]:
    return [sys.executable, "-m", "liasynth.smtsolver"]


def default_solver_command() -> list[str]:
    """Resolve the solver: $LIASYNTH_SOLVER, then z3/cvc5 on PATH, then bundled."""
    env = os.environ.get("LIASYNTH_SOLVER")
    if env:
        return env.split()
    if shutil.which("z3"):
        return ["z3", "-in"]
    if shutil.which("cvc5"):
        return ["cvc5", "--incremental", "--produce-models", "--lang", "smt2"]
    return bundled_solver_command()


def inline_target(constraint: Term, problem: SygusProblem, body: Term) -> Term:
    """Replace every application of the target by body with arguments substituted."""
    if constraint.head == problem.target_name and constraint.is_app:
        args = [inline_target(a, problem, body) for a in constraint.args]
        binding = Substitution(
            {name: arg for (name, _), arg in zip(problem.params, args)}
        )
        return substitute(body, binding)
    if not constraint.args:
        return constraint
    new_args = tuple(inline_target(a, problem, body) for a in constraint.args)
    if all(n is o for n, o in zip(new_args, constraint.args)):
        return constraint
    return Term(constraint.tag, constraint.head, constraint.value, new_args, constraint.sort)


def falsifies(problem: SygusProblem, body: Term, assignment: dict) -> bool:
    """True iff the assignment makes the inlined constraint evaluate to false."""
    inlined = inline_target(problem.constraint, problem, body)
    env = {}
    for name, sort in problem.variables:
        env[name] = assignment.get(name, 0 if sort is INT else False)
    return not evaluate(inlined, env)


class SolverProcess:
    """Line-level SMT-LIB v2 conversation with one solver subprocess."""

    def __init__(self, command: Sequence[str], timeout: float = 5.0):
        self.command = list(command)
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
            )
        except OSError as e:
            raise SolverCrashError(f"cannot start {self.command[0]}: {e}") from None
        self.send("(set-option :print-success false)")
        self.send(f"(set-option :timeout {int(self.timeout * 1000)})")
        self.send("(set-option :produce-models true)")
        self.send("(set-logic LIA)")

    def send(self, line: str):
        if self.proc.poll() is not None:
            raise SolverCrashError("solver process has exited")
        try:
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise SolverCrashError(f"solver pipe closed: {e}") from None

    def read_line(self) -> str:
        line = self.proc.stdout.readline()
        if line == "":
            raise SolverCrashError("solver closed stdout")
        return line.strip()

    def read_sexpr(self) -> str:
        """Read one complete s-expression (possibly spanning lines)."""
        buf = ""
        depth = 0
        while True:
            line = self.proc.stdout.readline()
            if line == "":
                raise SolverCrashError("solver closed stdout")
            buf += line
            depth = buf.count("(") - buf.count(")")
            if depth <= 0 and buf.strip():
                return buf.strip()

    def check_sat(self) -> str:
        self.send("(check-sat)")
        while True:
            line = self.read_line()
            if line in ("sat", "unsat", "unknown"):
                return line
            if line.startswith("(error"):
                raise ProtocolError(f"solver error: {line}")
            # some solvers emit blank lines or informational output; skip it
            if line:
                raise ProtocolError(f"unexpected check-sat reply: {line!r}")

    def get_model(self, names: dict[str, Sort]) -> dict:
        self.send("(get-model)")
        text = self.read_sexpr()
        if text.startswith("(error"):
            raise ProtocolError(f"solver error: {text}")
        try:
            parsed = read_all(text)
        except ParseError as e:
            raise ProtocolError(f"unparsable model: {e}") from None
        if len(parsed) != 1 or not isinstance(parsed[0], list):
            raise ProtocolError(f"unexpected model shape: {text!r}")
        items = parsed[0]
        if items and isinstance(items[0], Atom) and items[0].text == "model":
            items = items[1:]
        model: dict = {}
        for item in items:
            if not (isinstance(item, list) and len(item) >= 5):
                continue
            if not (isinstance(item[0], Atom) and item[0].text == "define-fun"):
                continue
            name = item[1].text if isinstance(item[1], Atom) else None
            if name not in names or not isinstance(item[2], list) or item[2]:
                continue
            model[name] = _parse_value(item[4])
        missing = set(names) - set(model)
        for name in missing:  # solvers may omit don't-care variables
            model[name] = 0 if names[name] is INT else False
        return model

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write("(exit)\n")
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError):
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        for stream in (self.proc.stdin, self.proc.stdout):
            if stream:
                stream.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _parse_value(sx):
    if isinstance(sx, Atom):
        if sx.text == "true":
            return True
        if sx.text == "false":
            return False
        if sx.text.isdigit():
            return int(sx.text)
        if sx.text.lstrip("-").isdigit():
            return int(sx.text)
    elif (
        isinstance(sx, list)
        and len(sx) == 2
        and isinstance(sx[0], Atom)
        and sx[0].text == "-"
        and isinstance(sx[1], Atom)
        and sx[1].text.isdigit()
    ):
        return -int(sx[1].text)
    raise ProtocolError(f"unparsable model value: {sx!r}")


class Oracle:
    """Per-problem verification sessions with memoization and statistics."""

    def __init__(
        self,
        problem: SygusProblem,
        solver_command: Optional[Sequence[str]] = None,
        timeout: float = 5.0,
        paranoid: bool = True,
    ):
        self.problem = problem
        self.command = list(solver_command) if solver_command else default_solver_command()
        self.timeout = timeout
        self.paranoid = paranoid
        self._proc: Optional[SolverProcess] = None
        self._memo: dict[Term, VerificationResult] = {}
        self.n_queries = 0
        self.n_memo_hits = 0

    def _session(self) -> SolverProcess:
        if self._proc is None or self._proc.proc.poll() is not None:
            self._proc = SolverProcess(self.command, timeout=self.timeout)
            for name, sort in self.problem.variables:
                self._proc.send(f"(declare-const {name} {sort})")
        return self._proc

    def verify(self, body: Term) -> VerificationResult:
        """Is `body` a correct implementation of the target?"""
        if body.nt_count:
            raise OracleError("cannot verify a partial program")
        if body.sort is not self.problem.return_sort:
            raise OracleError("candidate has the wrong sort")
        extra = free_vars(body) - {n for n, _ in self.problem.params}
        if extra:
            raise OracleError(f"candidate mentions non-parameters: {sorted(extra)}")
        hit = self._memo.get(body)
        if hit is not None:
            self.n_memo_hits += 1
            return hit
        t0 = time.monotonic()
        inlined = inline_target(self.problem.constraint, self.problem, body)
        result = self._check_negation(inlined)
        result = VerificationResult(
            result.verdict, result.counterexample, time.monotonic() - t0
        )
        self._memo[body] = result
        return result

    def _check_negation(self, inlined: Term) -> VerificationResult:
        self.n_queries += 1
        proc = self._session()
        try:
            proc.send("(push 1)")
            proc.send(f"(assert (not {print_term(inlined)}))")
            answer = proc.check_sat()
            if answer == "sat":
                names = dict(self.problem.variables)
                model = proc.get_model(names)
                proc.send("(pop 1)")
                if self.paranoid and not evaluate(
                    app("not", (inlined,)), model
                ):
                    raise ProtocolError(
                        "solver returned a counterexample that does not falsify "
                        "the constraint"
                    )
                return VerificationResult(Verdict.INVALID, model)
            proc.send("(pop 1)")
            if answer == "unsat":
                return VerificationResult(Verdict.VALID)
            return VerificationResult(Verdict.UNKNOWN)
        except SolverCrashError:
            self._proc = None
            raise

    def close(self):
        if self._proc is not None:
            self._proc.close()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def check_validity(
    phi: Term,
    variables: Sequence[tuple[str, Sort]],
    solver_command: Optional[Sequence[str]] = None,
    timeout: float = 5.0,
) -> tuple[Verdict, Optional[dict]]:
    """Is phi true under every assignment to the given variables?"""
    command = list(solver_command) if solver_command else default_solver_command()
    with SolverProcess(command, timeout=timeout) as proc:
        for name, sort in variables:
            proc.send(f"(declare-const {name} {sort})")
        proc.send(f"(assert (not {print_term(phi)}))")
        answer = proc.check_sat()
        if answer == "unsat":
            return Verdict.VALID, None
        if answer == "sat":
            model = proc.get_model(dict(variables))
            return Verdict.INVALID, model
        return Verdict.UNKNOWN, None
