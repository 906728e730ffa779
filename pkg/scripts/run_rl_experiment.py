#!/usr/bin/env python3
"""Run the repeated RL-improvement experiment over the generated corpus.

Builds the StraightLine/ControlFlow subset of data/generated (by manifest
category), then runs the full train loop under several seeds and reports
whether the learned guidance beats the unguided baseline on the training
split.  All artifacts (per-seed reports, models, training rows, and the
aggregate experiment_summary.json) land under --out.
"""
import argparse
import json
import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from liasynth.harness import RunConfig, repeated_experiment


def build_sc_corpus(generated: Path, dest: Path) -> int:
    """Copy every S/C-classified problem from a generated corpus into dest."""
    manifest = generated / "manifest.jsonl"
    rows = [json.loads(line) for line in manifest.read_text().splitlines()]
    picked = [r["file"] for r in rows if r["category"] in ("S", "C")]
    dest.mkdir(parents=True, exist_ok=True)
    for name in picked:
        shutil.copy(generated / name, dest / name)
    return len(picked)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/experiment.toml",
                    help="base run configuration (problems field is replaced)")
    ap.add_argument("--generated", default="data/generated",
                    help="corpus directory with manifest.jsonl")
    ap.add_argument("--out", default="results/experiment")
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    out = Path(args.out)
    corpus = out / "corpus"
    n = build_sc_corpus(Path(args.generated), corpus)
    print(f"experiment corpus: {n} S/C problems -> {corpus}")

    base = RunConfig.from_toml(args.config)
    base.problems = str(corpus)
    summary = repeated_experiment(base, out, repeats=args.repeats)

    for run in summary["runs"]:
        marks = " ".join(str(c) for c in run["train_solved"])
        print(
            f"seed {run['seed']}: train solved per iteration [{marks}] "
            f"of {run['train_total']} (baseline {run['baseline']}, best {run['best']})"
        )
    print(
        f"never worse than baseline: {summary['never_worse']}; "
        f"strict improvements: {summary['strict_improvements']}/{summary['repeats']}; "
        f"elapsed {summary['elapsed']:.0f}s"
    )


if __name__ == "__main__":
    main()
