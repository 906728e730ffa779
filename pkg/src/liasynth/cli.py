"""Command-line front end.

    liasynth solve <problem.sl> [search flags]
    liasynth generate <smt-dir> <out-dir> [generator flags]
    liasynth train <config.toml>
    liasynth bench <problem-dir> [--models DIR]

Exit codes: 0 success (for `solve`: solved), 1 search exhausted without a
solution, 2 usage error, 3 internal error (bad input file, solver crash, ...).
"""
from __future__ import annotations

import argparse
import json
import re
import shlex
import sys
from pathlib import Path
from typing import Optional

from .guidance import HASH_BASE
from .harness import RunConfig, bench, rl_loop
from .oracle import Oracle, default_solver_command
from .parsing import ParseError, UnsupportedError, parse_sygus_file
from .search import Guidance, SearchBudget, big_steps
from .terms import print_term

EXIT_SOLVED = 0
EXIT_UNSOLVED = 1
EXIT_USAGE = 2
EXIT_ERROR = 3


def _add_search_flags(p: argparse.ArgumentParser):
    p.add_argument("--wall-clock", type=float, default=None, metavar="S",
                   help="per-problem time budget in seconds")
    p.add_argument("--bigsteps", type=int, default=None, metavar="N")
    p.add_argument("--rollouts", type=int, default=None, metavar="N",
                   help="rollouts per big step")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--gamma-decay", type=float, default=None)
    p.add_argument("--max-size", type=int, default=None, metavar="N",
                   help="discard candidate programs larger than this")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", type=str, default=None, metavar="CMD",
                   help="SMT solver command line (default: auto-detect)")
    p.add_argument("--oracle-timeout", type=float, default=5.0, metavar="S")


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--models", type=str, default=None, metavar="DIR",
                   help="directory of iter<k>.{policy,value}.json (newest pair used)")
    p.add_argument("--policy", type=str, default=None, metavar="FILE")
    p.add_argument("--value", type=str, default=None, metavar="FILE")


def _budget_from_args(args) -> SearchBudget:
    defaults = SearchBudget()
    return SearchBudget(
        max_bigsteps=args.bigsteps if args.bigsteps is not None else defaults.max_bigsteps,
        rollouts_per_bigstep=(
            args.rollouts if args.rollouts is not None else defaults.rollouts_per_bigstep
        ),
        wall_clock=args.wall_clock if args.wall_clock is not None else defaults.wall_clock,
        gamma=args.gamma if args.gamma is not None else defaults.gamma,
        gamma_decay=(
            args.gamma_decay if args.gamma_decay is not None else defaults.gamma_decay
        ),
        max_program_size=(
            args.max_size if args.max_size is not None else defaults.max_program_size
        ),
    )


_ITER_MODEL = re.compile(r"iter(\d+)\.(policy|value)\.json$")


def latest_models(models_dir) -> tuple[Optional[str], Optional[str]]:
    """The highest-iteration policy/value pair in a directory, if any."""
    best: dict[str, tuple[int, str]] = {}
    for p in Path(models_dir).glob("*.json"):
        m = _ITER_MODEL.match(p.name)
        if m:
            k, kind = int(m.group(1)), m.group(2)
            if kind not in best or k > best[kind][0]:
                best[kind] = (k, str(p))
    # plain policy.json / value.json as a fallback spelling
    for kind in ("policy", "value"):
        plain = Path(models_dir) / f"{kind}.json"
        if kind not in best and plain.exists():
            best[kind] = (-1, str(plain))
    return (
        best.get("policy", (0, None))[1],
        best.get("value", (0, None))[1],
    )


def _resolve_models(args) -> tuple[Optional[str], Optional[str]]:
    policy, value = args.policy, args.value
    if args.models:
        found_p, found_v = latest_models(args.models)
        policy = policy or found_p
        value = value or found_v
    for path in (policy, value):
        if path and not Path(path).exists():
            raise FileNotFoundError(f"model file not found: {path}")
    return policy, value


def _solver_from_args(args) -> Optional[list[str]]:
    return shlex.split(args.solver) if args.solver else None


def cmd_solve(args) -> int:
    problem = parse_sygus_file(args.problem)
    import dataclasses

    problem = dataclasses.replace(problem, name=Path(args.problem).stem)
    policy_path, value_path = _resolve_models(args)
    from .gbt import Model

    guidance = Guidance(
        policy=Model.load(policy_path) if policy_path else None,
        value=Model.load(value_path) if value_path else None,
    )
    budget = _budget_from_args(args)
    solver = _solver_from_args(args)
    with Oracle(problem, solver, timeout=args.oracle_timeout) as oracle:
        result = big_steps(problem, oracle, budget, guidance=guidance, seed=args.seed)
    if args.trace and result.trace is not None:
        Path(args.trace).write_text(result.trace.to_json(problem))
    stats = (
        f"{result.elapsed:.2f}s, {result.rollouts} rollouts, "
        f"{result.bigsteps} big steps, {result.oracle_queries} oracle calls"
    )
    if result.solved:
        body = print_term(result.solution)
        params = " ".join(f"({n} {s})" for n, s in problem.params)
        print(f"(define-fun {problem.target_name} ({params}) {problem.return_sort} {body})")
        if not args.quiet:
            print(f"; solved in {stats}", file=sys.stderr)
        return EXIT_SOLVED
    print(f"; no solution found ({result.reason}; {stats})")
    return EXIT_UNSOLVED


def cmd_generate(args) -> int:
    from .generator import generate_corpus

    report = generate_corpus(
        args.smt_dir,
        args.out_dir,
        k=args.k,
        per_file=args.per_file,
        classify_budget=args.classify_budget,
        solver_command=_solver_from_args(args),
        seed=args.seed,
        log=(lambda msg: None) if args.quiet else None,
    )
    print(report.summary())
    return EXIT_SOLVED


def cmd_train(args) -> int:
    config = RunConfig.from_toml(args.config)
    if args.quiet:
        config.verbose = False
    reports = rl_loop(config)
    last = reports[-1]
    print(
        f"finished {len(reports)} iterations: "
        f"train {last.solved_count('train')}/{last.total('train')}, "
        f"test {last.solved_count('test')}/{last.total('test')} "
        f"(reports under {config.out_dir})"
    )
    return EXIT_SOLVED


def cmd_bench(args) -> int:
    policy_path, value_path = _resolve_models(args)
    config = RunConfig(
        problems=args.problem_dir,
        budget=_budget_from_args(args),
        seed=args.seed,
        solver=_solver_from_args(args),
        oracle_timeout=args.oracle_timeout,
        workers=args.workers,
        verbose=not args.quiet,
    )
    report = bench(args.problem_dir, config, policy_path, value_path)
    for o in report.outcomes:
        mark = "solved" if o.solved else o.reason
        print(f"{o.name}: {mark} ({o.seconds:.2f}s, {o.oracle_calls} oracle calls)")
    n = len(report.outcomes)
    print(f"total: {report.cumulative_solved_test}/{n} solved in {report.elapsed:.1f}s")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(report.to_json())
    return EXIT_SOLVED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liasynth",
        description="MCTS-based SyGuS solver for linear integer arithmetic",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one SyGuS problem file")
    p.add_argument("problem", help=".sl file in SyGuS v2 syntax")
    _add_search_flags(p)
    _add_model_flags(p)
    p.add_argument("--trace", type=str, default=None, metavar="FILE",
                   help="dump the search trace as JSON")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="mine SyGuS problems from SMT files")
    p.add_argument("smt_dir", help="directory of .smt2 input files")
    p.add_argument("out_dir", help="directory to write .sl files and the manifest")
    p.add_argument("--k", type=int, default=2, help="occurrences per generalization")
    p.add_argument("--per-file", type=int, default=2, metavar="N",
                   help="max problems emitted per source file")
    p.add_argument("--classify-budget", type=float, default=30.0, metavar="S",
                   help="search budget per difficulty classification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", type=str, default=None, metavar="CMD")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="run the full RL loop from a TOML config")
    p.add_argument("config", help="TOML run configuration")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="evaluate a problem directory once")
    p.add_argument("problem_dir")
    _add_search_flags(p)
    _add_model_flags(p)
    p.add_argument("--workers", type=int, default=0,
                   help="parallel workers (0 = one per spare core)")
    p.add_argument("--out", type=str, default=None, metavar="FILE",
                   help="also write the report as JSON")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, UnsupportedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130
    except Exception as e:  # pragma: no cover - last-resort diagnostics
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
