"""Mining synthesis problems out of plain SMT problems.

Pipeline per source file: check the assertion conjunction is valid (or use
its negation if that is), enumerate integer-sorted subterm occurrence sets,
anti-unify each set into a least general generalization, replace the
occurrences by applications of a fresh target function (arguments given by
the anti-unification witnesses), attach the template grammar extended with
the constants harvested from the new constraint, and keep the LGG as the
problem's known solution — which is verified against the oracle before the
problem is emitted, so every emitted problem is solvable by construction.
Problems are then classified by what kind of search cracks them and
near-duplicates are filtered out.
"""
from __future__ import annotations

import json
import re
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence

from .grammar import Grammar, PartialProgram, Rule, SygusProblem, derives, lia_grammar
from .oracle import Oracle, Verdict, bundled_solver_command, check_validity, default_solver_command
from .parsing import ParseError, UnsupportedError, parse_smt_file
from .search import Guidance, SearchBudget, big_steps
from .terms import (
    INT,
    Sort,
    Term,
    app,
    apply_target,
    free_vars,
    is_linear,
    print_term,
    replace_at,
    subterm_at,
    subterms,
)
from .unification import GeneralizationResult, anti_unify


class GenerationError(Exception):
    pass


class SolutionRejectedError(GenerationError):
    """The mined known solution failed oracle verification — a pipeline bug."""


class Category(Enum):
    BASIC = "B"
    STRAIGHT_LINE = "S"
    CONTROL_FLOW = "C"
    UNSOLVED = "U"


@dataclass(frozen=True)
class Occurrence:
    assertion: int
    path: tuple[int, ...]
    term: Term


@dataclass(frozen=True)
class CandidateSet:
    occurrences: tuple[Occurrence, ...]
    gen: GeneralizationResult

    @property
    def lgg_size(self) -> int:
        return self.gen.lgg.size

    @property
    def n_fresh(self) -> int:
        return len(self.gen.fresh_vars)


@dataclass
class GeneratedProblem:
    problem: SygusProblem
    known_solution: Term
    source_name: str
    occurrence_paths: tuple[tuple[int, tuple[int, ...]], ...]
    category: Optional[Category] = None

    @property
    def lgg_size(self) -> int:
        return self.known_solution.size


def _int_occurrences(assertions: Sequence[Term], max_per_file: int) -> list[Occurrence]:
    out = []
    for ai, a in enumerate(assertions):
        for t, path in subterms(a):
            if t.sort is INT:
                out.append(Occurrence(ai, path, t))
                if len(out) >= max_per_file:
                    return out
    return out


def _overlapping(a: Occurrence, b: Occurrence) -> bool:
    if a.assertion != b.assertion:
        return False
    shorter, longer = sorted((a.path, b.path), key=len)
    return longer[: len(shorter)] == shorter


def select_subterms(
    assertions: Sequence[Term],
    k: int = 2,
    max_sets: int = 50,
    max_occurrences: int = 60,
) -> list[CandidateSet]:
    """Ranked candidate sets of k integer subterm occurrences to generalize.

    Ranking: larger LGG first, then fewer fresh variables, then document
    order.  Sets are dropped when the LGG is a lone fresh variable (nothing
    shared), has no fresh variables at all (occurrences identical, which
    would synthesize a constant function), mentions source variables (the
    solution would not be closed over the target's parameters), or when
    occurrences overlap (replacement would be ill-defined).
    """
    occs = _int_occurrences(assertions, max_occurrences)
    sets: list[CandidateSet] = []
    for combo in combinations(occs, k):
        if any(_overlapping(a, b) for a, b in combinations(combo, 2)):
            continue
        gen = anti_unify([o.term for o in combo])
        if gen.lgg.is_var or gen.lgg.is_nt:
            continue
        if not gen.fresh_vars:
            continue
        lgg_vars = free_vars(gen.lgg)
        if lgg_vars - set(gen.fresh_vars):
            continue
        sets.append(CandidateSet(occurrences=combo, gen=gen))
    sets.sort(
        key=lambda s: (
            -s.lgg_size,
            s.n_fresh,
            [(o.assertion, o.path) for o in s.occurrences],
        )
    )
    return sets[:max_sets]


def harvest_constants(t: Term) -> list[int]:
    values = {s.value for s, _ in subterms(t) if s.is_const and s.sort is INT}
    return sorted(values)


def _fresh_target_name(taken: set) -> str:
    if "f" not in taken:
        return "f"
    i = 0
    while f"f{i}" in taken:
        i += 1
    return f"f{i}"


def generate_sygus(
    assertions: Sequence[Term],
    variables: Sequence[tuple[str, Sort]],
    cand: CandidateSet,
    name: str,
    solver_command: Optional[Sequence[str]] = None,
    check_source: bool = True,
    source: str = "",
) -> GeneratedProblem:
    """Turn one candidate occurrence set into a verified synthesis problem."""
    solver_command = list(solver_command) if solver_command else default_solver_command()
    phi = app("and", list(assertions)) if len(assertions) > 1 else assertions[0]
    if check_source:
        verdict, _ = check_validity(phi, variables, solver_command)
        if verdict is not Verdict.VALID:
            raise GenerationError(f"source formula is not valid ({verdict.value})")

    lgg = cand.gen.lgg
    fresh = cand.gen.fresh_vars
    params = tuple((v, INT) for v in fresh)
    target = _fresh_target_name({n for n, _ in variables})

    new_assertions = list(assertions)
    for occ, witness in zip(cand.occurrences, cand.gen.witnesses):
        args = [witness[v] for v in fresh]
        call = apply_target(target, tuple(s for _, s in params), INT, args)
        new_assertions[occ.assertion] = replace_at(
            new_assertions[occ.assertion], occ.path, call
        )
    constraint = (
        app("and", new_assertions) if len(new_assertions) > 1 else new_assertions[0]
    )

    used = free_vars(constraint)
    kept_vars = tuple((n, s) for n, s in variables if n in used)
    constants = sorted(set(harvest_constants(constraint)) | set(harvest_constants(lgg)))
    grammar = lia_grammar(
        params,
        extra_constants=constants,
        include_mul=any(s.head == "*" for s, _ in subterms(lgg) if s.is_app),
    )
    problem = SygusProblem(
        target_name=target,
        params=params,
        return_sort=INT,
        constraint=constraint,
        grammar=grammar,
        variables=kept_vars,
        logic="LIA",
        name=name,
    )
    if not is_linear(lgg) or not derives(grammar, lgg):
        raise GenerationError("known solution falls outside the emitted grammar")

    with Oracle(problem, solver_command) as oracle:
        result = oracle.verify(lgg)
    if result.verdict is Verdict.INVALID:
        raise SolutionRejectedError(
            f"known solution {print_term(lgg)} failed verification "
            f"(counterexample {result.counterexample})"
        )
    if result.verdict is Verdict.UNKNOWN:
        raise GenerationError("solver could not verify the known solution")
    return GeneratedProblem(
        problem=problem,
        known_solution=lgg,
        source_name=source or name,
        occurrence_paths=tuple((o.assertion, o.path) for o in cand.occurrences),
    )


def _ite_free(grammar: Grammar) -> Grammar:
    rules = [
        r
        for r in grammar.rules
        if not any(s.is_app and s.head == "ite" for s, _ in subterms(r.rhs))
    ]
    return Grammar(nonterminals=grammar.nonterminals, rules=rules, start=grammar.start)


def classify(
    gp: GeneratedProblem,
    solver_command: Optional[Sequence[str]] = None,
    budget_seconds: float = 30.0,
    seed: int = 0,
) -> Category:
    """B: a parameter or constant already solves it.  S: an ite-free search
    does.  C: the full-grammar search does.  U: nothing above did."""
    solver_command = list(solver_command) if solver_command else default_solver_command()
    problem = gp.problem
    g = problem.grammar
    with Oracle(problem, solver_command) as oracle:
        for i in g.rules_for(g.start):
            rhs = g.rules[i].rhs
            if rhs.nt_count == 0:
                if oracle.verify(rhs).verdict is Verdict.VALID:
                    return Category.BASIC
        budget = SearchBudget(wall_clock=budget_seconds)
        try:
            restricted = _ite_free(g)
        except Exception:
            restricted = None
        if restricted is not None and restricted.rules_for(restricted.start):
            stripped = SygusProblem(
                target_name=problem.target_name,
                params=problem.params,
                return_sort=problem.return_sort,
                constraint=problem.constraint,
                grammar=restricted,
                variables=problem.variables,
                logic=problem.logic,
                name=problem.name,
            )
            if big_steps(stripped, oracle, budget, seed=seed).solved:
                return Category.STRAIGHT_LINE
        if big_steps(problem, oracle, budget, seed=seed).solved:
            return Category.CONTROL_FLOW
    return Category.UNSOLVED


_TRAILING_NUMBER = re.compile(r"[-_.]*\d+$")


def _stem_key(name: str) -> str:
    # one trailing number group is a copy index (bench_01, bench_02 -> bench);
    # anything before it is part of the family name proper (lin2 stays lin2)
    return _TRAILING_NUMBER.sub("", Path(name).stem)


def _shape_key(gp: GeneratedProblem):
    c = gp.problem.constraint
    heads = [a.head for a in c.args] if c.is_app and c.head == "and" else [c.head]
    return (_stem_key(gp.source_name), frozenset(Counter(heads).items()))


def filter_similar(problems: Sequence[GeneratedProblem]) -> list[GeneratedProblem]:
    """Keep the first problem of each (source family, constraint shape) group.

    Idempotent: filtering a filtered list changes nothing.
    """
    seen = set()
    kept = []
    for gp in problems:
        key = _shape_key(gp)
        if key not in seen:
            seen.add(key)
            kept.append(gp)
    return kept


@dataclass
class CorpusReport:
    emitted: list[tuple[str, GeneratedProblem]] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (source, reason)

    def summary(self) -> str:
        counts = Counter(
            gp.category.value if gp.category else "?" for _, gp in self.emitted
        )
        by_cat = " ".join(f"{c}:{counts[c]}" for c in sorted(counts))
        return (
            f"{len(self.emitted)} problems emitted ({by_cat}), "
            f"{len(self.skipped)} sources/candidates skipped"
        )


def generate_corpus(
    smt_dir,
    out_dir,
    k: int = 2,
    classify_budget: float = 30.0,
    per_file: int = 2,
    solver_command: Optional[Sequence[str]] = None,
    seed: int = 0,
    log=None,
) -> CorpusReport:
    """Run the whole mining pipeline over a directory of .smt2 files."""
    solver_command = list(solver_command) if solver_command else default_solver_command()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = CorpusReport()
    log = log or (lambda msg: print(msg, file=sys.stderr))

    for path in sorted(Path(smt_dir).glob("*.smt2")):
        try:
            source = parse_smt_file(path)
        except (ParseError, UnsupportedError) as e:
            report.skipped.append((path.name, f"parse: {e}"))
            continue
        if not source.assertions:
            report.skipped.append((path.name, "no assertions"))
            continue
        assertions = source.assertions
        phi = app("and", assertions) if len(assertions) > 1 else assertions[0]
        verdict, _ = check_validity(phi, source.variables, solver_command)
        if verdict is not Verdict.VALID:
            neg = app("not", (phi,))
            verdict2, _ = check_validity(neg, source.variables, solver_command)
            if verdict2 is Verdict.VALID:
                assertions = [neg]
            else:
                report.skipped.append((path.name, f"not valid either way ({verdict.value})"))
                continue

        emitted_here = 0
        for cand in select_subterms(assertions, k=k):
            if emitted_here >= per_file:
                break
            name = f"{path.stem}__g{emitted_here}"
            try:
                gp = generate_sygus(
                    assertions,
                    source.variables,
                    cand,
                    name,
                    solver_command,
                    check_source=False,
                    source=path.name,
                )
            except SolutionRejectedError:
                raise  # a rejected known solution is a bug, never skip it quietly
            except GenerationError as e:
                report.skipped.append((name, str(e)))
                continue
            report.emitted.append((name, gp))
            emitted_here += 1

    report.emitted = _refilter(report.emitted)

    for name, gp in report.emitted:
        if classify_budget > 0:
            gp.category = classify(gp, solver_command, classify_budget, seed=seed)
        (out_dir / f"{name}.sl").write_text(gp.problem.to_text())

    manifest = out_dir / "manifest.jsonl"
    with open(manifest, "w") as f:
        for name, gp in report.emitted:
            f.write(
                json.dumps(
                    {
                        "file": f"{name}.sl",
                        "source": gp.source_name,
                        "category": gp.category.value if gp.category else None,
                        "known_solution": print_term(gp.known_solution),
                        "lgg_size": gp.lgg_size,
                        "occurrences": [
                            [ai, list(path)] for ai, path in gp.occurrence_paths
                        ],
                    }
                )
                + "\n"
            )
    if report.skipped:
        with open(out_dir / "skipped.log", "w") as f:
            for name, reason in report.skipped:
                f.write(f"{name}\t{reason}\n")
    log(report.summary())
    return report


def _refilter(emitted: list[tuple[str, GeneratedProblem]]) -> list[tuple[str, GeneratedProblem]]:
    kept_gens = filter_similar([gp for _, gp in emitted])
    kept_ids = {id(gp) for gp in kept_gens}
    return [(name, gp) for name, gp in emitted if id(gp) in kept_ids]
