"""Reinforcement-learning loop and batch evaluation over problem corpora.

Iteration 0 searches every problem with default guidance; each later
iteration trains policy/value models on the traces of the last W iterations'
*training-split* searches and re-runs everything with the new models.  Test
problems are evaluated with the same models but never contribute training
rows.  Reports and the summary CSV are flushed after every iteration, so a
killed run keeps everything finished so far.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import os
import random
import sys
import time
from dataclasses import dataclass, field, asdict
from multiprocessing import get_context
from pathlib import Path
from typing import Optional, Sequence

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import gbt
from .gbt import GbtParams, Model
from .guidance import HASH_BASE, TrainingRow, extract_training_data, fnv1a64, save_rows
from .oracle import Oracle, bundled_solver_command, default_solver_command
from .parsing import parse_sygus_file
from .search import Guidance, SearchBudget, SearchResult, big_steps
from .terms import print_term


@dataclass(frozen=True)
class GbtConfig:
    rounds: int = 100
    learning_rate: float = 0.3
    value_depth: int = 20
    policy_depth: int = 25
    min_samples_leaf: int = 1

    def params(self, kind: str) -> GbtParams:
        return GbtParams(
            kind=kind,
            rounds=self.rounds,
            learning_rate=self.learning_rate,
            max_depth=self.value_depth if kind == "value" else self.policy_depth,
            min_samples_leaf=self.min_samples_leaf,
        )


@dataclass
class RunConfig:
    problems: str
    out_dir: str = "results"
    models_dir: str = "models"
    iterations: int = 3
    window: int = 4
    split_ratio: float = 0.75
    seed: int = 0
    workers: int = 0  # 0 = one per spare core
    hash_base: int = HASH_BASE
    oracle_timeout: float = 5.0
    solver: Optional[list[str]] = None
    budget: SearchBudget = field(default_factory=SearchBudget)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    verbose: bool = True

    def __post_init__(self):
        if not (0 < self.split_ratio < 1):
            raise ValueError("split_ratio must be in (0, 1)")
        if self.iterations < 0 or self.window < 1:
            raise ValueError("iterations/window must be sensible")

    @property
    def effective_workers(self) -> int:
        if self.workers > 0:
            return self.workers
        return max(1, (os.cpu_count() or 1) - 1)

    @classmethod
    def from_toml(cls, path) -> "RunConfig":
        with open(path, "rb") as f:
            doc = tomllib.load(f)
        budget = SearchBudget(**doc.pop("budget", {}))
        gbt_cfg = GbtConfig(**doc.pop("gbt", {}))
        return cls(budget=budget, gbt=gbt_cfg, **doc)


@dataclass
class ProblemOutcome:
    name: str
    split: str
    solved: bool
    seconds: float
    oracle_calls: int
    rollouts: int = 0
    expansions: int = 0
    reason: str = ""
    solution: Optional[str] = None
    error: Optional[str] = None


@dataclass
class IterationReport:
    iteration: int
    policy_model: Optional[str]
    value_model: Optional[str]
    outcomes: list[ProblemOutcome]
    elapsed: float
    cumulative_solved_train: int = 0
    cumulative_solved_test: int = 0

    def solved_count(self, split: str) -> int:
        return sum(1 for o in self.outcomes if o.split == split and o.solved)

    def total(self, split: str) -> int:
        return sum(1 for o in self.outcomes if o.split == split)

    def to_json(self) -> str:
        doc = {
            "iteration": self.iteration,
            "models": {"policy": self.policy_model, "value": self.value_model},
            "solved": {
                "train": self.solved_count("train"),
                "test": self.solved_count("test"),
            },
            "totals": {"train": self.total("train"), "test": self.total("test")},
            "cumulative_solved": {
                "train": self.cumulative_solved_train,
                "test": self.cumulative_solved_test,
            },
            "elapsed": self.elapsed,
            "outcomes": [asdict(o) for o in self.outcomes],
        }
        return json.dumps(doc, indent=1)


def split_problems(names: Sequence[str], ratio: float, seed: int):
    """Deterministic shuffle-split of problem names into (train, test)."""
    ordered = sorted(names)
    rng = random.Random(seed)
    rng.shuffle(ordered)
    cut = round(len(ordered) * ratio)
    cut = min(max(cut, 1), len(ordered) - 1) if len(ordered) > 1 else len(ordered)
    return sorted(ordered[:cut]), sorted(ordered[cut:])


def problem_seed(run_seed: int, iteration: int, name: str) -> int:
    """Stable per-search seed, independent of worker assignment."""
    return fnv1a64(f"{run_seed}:{iteration}:{name}".encode()) % (2**31)


_MODEL_CACHE: dict[str, Model] = {}


def _load_model(path: Optional[str]) -> Optional[Model]:
    if path is None:
        return None
    model = _MODEL_CACHE.get(path)
    if model is None:
        model = _MODEL_CACHE[path] = Model.load(path)
    return model


def _search_task(task: dict):
    """Worker entry: solve one problem file, return (outcome, trace or None)."""
    name = task["name"]
    t0 = time.monotonic()
    try:
        problem = dataclasses.replace(parse_sygus_file(task["path"]), name=name)
        guidance = Guidance(
            policy=_load_model(task["policy"]),
            value=_load_model(task["value"]),
            hash_base=task["hash_base"],
        )
        budget = SearchBudget(**task["budget"])
        with Oracle(problem, task["solver"], timeout=task["oracle_timeout"]) as oracle:
            result = big_steps(
                problem, oracle, budget, guidance=guidance, seed=task["seed"]
            )
        outcome = ProblemOutcome(
            name=name,
            split=task["split"],
            solved=result.solved,
            seconds=result.elapsed,
            oracle_calls=result.oracle_queries,
            rollouts=result.rollouts,
            expansions=result.expansions,
            reason=result.reason,
            solution=None if result.solution is None else print_term(result.solution),
        )
        trace = result.trace if task["collect"] else None
        return outcome, trace
    except Exception as e:  # a broken problem must not sink the whole iteration
        return (
            ProblemOutcome(
                name=name,
                split=task["split"],
                solved=False,
                seconds=time.monotonic() - t0,
                oracle_calls=0,
                reason="error",
                error=f"{type(e).__name__}: {e}",
            ),
            None,
        )


def run_iteration(
    paths: dict[str, Path],
    splits: dict[str, str],
    config: RunConfig,
    iteration: int,
    policy_path: Optional[str],
    value_path: Optional[str],
    collect: bool = True,
):
    """Search every problem once; returns (outcomes, traces of collected train runs)."""
    budget_fields = {
        "max_bigsteps": config.budget.max_bigsteps,
        "rollouts_per_bigstep": config.budget.rollouts_per_bigstep,
        "wall_clock": config.budget.wall_clock,
        "gamma": config.budget.gamma,
        "gamma_decay": config.budget.gamma_decay,
        "max_program_size": config.budget.max_program_size,
    }
    solver = config.solver or default_solver_command()
    tasks = []
    for name in sorted(paths):
        tasks.append(
            {
                "name": name,
                "path": str(paths[name]),
                "split": splits[name],
                "seed": problem_seed(config.seed, iteration, name),
                "policy": policy_path,
                "value": value_path,
                "hash_base": config.hash_base,
                "budget": budget_fields,
                "solver": solver,
                "oracle_timeout": config.oracle_timeout,
                "collect": collect and splits[name] == "train",
            }
        )
    n_workers = min(config.effective_workers, len(tasks)) or 1
    results = []
    if n_workers == 1:
        for task in tasks:
            results.append(_search_task(task))
            _progress(config, iteration, results[-1][0])
    else:
        # static round-robin assignment keeps runs reproducible across worker counts
        ctx = get_context("fork")
        chunks = [tasks[i::n_workers] for i in range(n_workers)]
        with ctx.Pool(n_workers) as pool:
            chunk_results = pool.map(_run_chunk, chunks)
        by_name = {}
        for chunk in chunk_results:
            for outcome, trace in chunk:
                by_name[outcome.name] = (outcome, trace)
        for task in tasks:
            results.append(by_name[task["name"]])
            _progress(config, iteration, results[-1][0])
    outcomes = [r[0] for r in results]
    traces = {r[0].name: r[1] for r in results if r[1] is not None}
    return outcomes, traces


def _run_chunk(tasks):
    return [_search_task(t) for t in tasks]


def _progress(config: RunConfig, iteration: int, outcome: ProblemOutcome):
    if config.verbose:
        status = "solved" if outcome.solved else outcome.reason
        print(
            f"[iter {iteration}] {outcome.name}: {status} "
            f"({outcome.seconds:.1f}s, {outcome.oracle_calls} oracle calls)",
            file=sys.stderr,
        )


def _write_summary_rows(path: Path, outcomes, iteration: int):
    new = not path.exists()
    with open(path, "a", newline="") as f:
        writer = csv.writer(f)
        if new:
            writer.writerow(["problem", "iteration", "solved", "seconds", "oracle_calls"])
        for o in outcomes:
            writer.writerow([o.name, iteration, int(o.solved), f"{o.seconds:.3f}", o.oracle_calls])


def train_models(
    rows: list[TrainingRow], config: RunConfig, meta: Optional[dict] = None
) -> tuple[Optional[Model], Optional[Model]]:
    """Fit (policy, value) models from pooled rows; None when a kind has no rows."""
    out = []
    for kind, width in (("policy", 3 * config.hash_base), ("value", 2 * config.hash_base)):
        subset = [r for r in rows if r.kind == kind]
        if not subset:
            out.append(None)
            continue
        model = gbt.fit_sparse(
            [r.indices for r in subset],
            [r.counts for r in subset],
            [r.target for r in subset],
            n_features=width,
            params=config.gbt.params(kind),
            meta=meta,
        )
        out.append(model)
    return out[0], out[1]


def rl_loop(config: RunConfig) -> list[IterationReport]:
    """The full experiment: baseline, then `iterations` train/evaluate rounds."""
    problems_dir = Path(config.problems)
    paths = {p.stem: p for p in sorted(problems_dir.glob("*.sl"))}
    if not paths:
        raise FileNotFoundError(f"no .sl problems under {problems_dir}")
    train_names, test_names = split_problems(list(paths), config.split_ratio, config.seed)
    splits = {n: ("train" if n in set(train_names) else "test") for n in paths}

    out_dir = Path(config.out_dir)
    models_dir = Path(config.models_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    models_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "training").mkdir(exist_ok=True)

    reports: list[IterationReport] = []
    rows_by_iter: dict[int, list[TrainingRow]] = {}
    policy_path: Optional[str] = None
    value_path: Optional[str] = None
    ever_train: set = set()
    ever_test: set = set()

    for iteration in range(config.iterations + 1):
        t0 = time.monotonic()
        outcomes, traces = run_iteration(
            paths, splits, config, iteration, policy_path, value_path, collect=True
        )
        # training rows come from training-split traces only
        train_set = set(train_names)
        rows: list[TrainingRow] = []
        for name, trace in traces.items():
            assert name in train_set, "collected a trace outside the training split"
            for row in extract_training_data(trace, config.hash_base):
                row.iteration = iteration
                row.split = "train"
                rows.append(row)
        rows_by_iter[iteration] = rows
        save_rows(rows, out_dir / "training" / f"iter{iteration}.rows.csv")

        for o in outcomes:
            if o.solved:
                (ever_train if o.split == "train" else ever_test).add(o.name)
        report = IterationReport(
            iteration=iteration,
            policy_model=policy_path,
            value_model=value_path,
            outcomes=outcomes,
            elapsed=time.monotonic() - t0,
            cumulative_solved_train=len(ever_train),
            cumulative_solved_test=len(ever_test),
        )
        reports.append(report)
        (out_dir / f"iter{iteration}.report.json").write_text(report.to_json())
        _write_summary_rows(out_dir / "summary.csv", outcomes, iteration)
        if config.verbose:
            print(
                f"[iter {iteration}] train {report.solved_count('train')}/{report.total('train')} "
                f"test {report.solved_count('test')}/{report.total('test')} "
                f"in {report.elapsed:.0f}s",
                file=sys.stderr,
            )

        if iteration == config.iterations:
            break
        window_rows: list[TrainingRow] = []
        for i in range(max(0, iteration - config.window + 1), iteration + 1):
            window_rows.extend(rows_by_iter.get(i, []))
        policy, value = train_models(
            window_rows, config, meta={"iteration": iteration, "seed": config.seed}
        )
        next_iter = iteration + 1
        if policy is not None:
            policy_path = str(models_dir / f"iter{next_iter}.policy.json")
            policy.save(policy_path)
            _MODEL_CACHE.pop(policy_path, None)
        if value is not None:
            value_path = str(models_dir / f"iter{next_iter}.value.json")
            value.save(value_path)
            _MODEL_CACHE.pop(value_path, None)

    return reports


def repeated_experiment(base: RunConfig, root, repeats: int = 5) -> dict:
    """Run the RL loop under several seeds and summarize train-split movement.

    Each repeat gets its own results/models directories under `root`.  The
    summary compares every repeat's best post-baseline iteration against its
    iteration-0 baseline, counting strict improvements.
    """
    root = Path(root)
    runs = []
    t0 = time.monotonic()
    for seed in range(repeats):
        cfg = dataclasses.replace(
            base,
            seed=seed,
            out_dir=str(root / f"seed{seed}" / "results"),
            models_dir=str(root / f"seed{seed}" / "models"),
        )
        reports = rl_loop(cfg)
        train = [r.solved_count("train") for r in reports]
        test = [r.solved_count("test") for r in reports]
        runs.append(
            {
                "seed": seed,
                "train_solved": train,
                "test_solved": test,
                "train_total": reports[0].total("train"),
                "test_total": reports[0].total("test"),
                "baseline": train[0],
                "best": max(train[1:]) if len(train) > 1 else train[0],
            }
        )
    summary = {
        "repeats": repeats,
        "iterations": base.iterations,
        "wall_clock": base.budget.wall_clock,
        "elapsed": time.monotonic() - t0,
        "runs": runs,
        "never_worse": all(r["best"] >= r["baseline"] for r in runs),
        "strict_improvements": sum(r["best"] > r["baseline"] for r in runs),
    }
    (root / "experiment_summary.json").write_text(json.dumps(summary, indent=1))
    return summary


def bench(
    problems_dir,
    config: RunConfig,
    policy_path: Optional[str] = None,
    value_path: Optional[str] = None,
) -> IterationReport:
    """One evaluation pass over a directory; no training, no trace collection."""
    paths = {p.stem: p for p in sorted(Path(problems_dir).glob("*.sl"))}
    if not paths:
        raise FileNotFoundError(f"no .sl problems under {problems_dir}")
    splits = {n: "test" for n in paths}
    t0 = time.monotonic()
    outcomes, _ = run_iteration(
        paths, splits, config, iteration=0,
        policy_path=policy_path, value_path=value_path, collect=False,
    )
    solved = {o.name for o in outcomes if o.solved}
    return IterationReport(
        iteration=0,
        policy_model=policy_path,
        value_model=value_path,
        outcomes=outcomes,
        elapsed=time.monotonic() - t0,
        cumulative_solved_test=len(solved),
    )
