"""Hashed count features, guidance defaults, and training-data extraction.

States and actions are encoded as fixed-length integer count vectors: every
leaf symbol (constant spelling, variable, nonterminal) and every parent/child
operator pair is hashed with 64-bit FNV-1a onto `hash_base` buckets and the
bucket counts concatenated — [phi || state] for value queries, [phi || state
|| successor] for policy queries.  The same encoding turns finished search
traces into regression rows for the boosted-tree models.
"""
from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .grammar import PartialProgram
from .terms import Term

HASH_BASE = 4093

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
_PAIR_SEP = 0x1F  # unit separator byte between parent and child spellings


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


_word_cache: dict[str, int] = {}
_pair_cache: dict[tuple[str, str], int] = {}


def _word_hash(s: str) -> int:
    h = _word_cache.get(s)
    if h is None:
        h = _word_cache[s] = fnv1a64(s.encode())
    return h


def _pair_hash(parent: str, child: str) -> int:
    key = (parent, child)
    h = _pair_cache.get(key)
    if h is None:
        h = _pair_cache[key] = fnv1a64(
            parent.encode() + bytes((_PAIR_SEP,)) + child.encode()
        )
    return h


# encode_state/encode_action re-featurize the (large, fixed) constraint on
# every call during guided search, so count vectors are memoized; entries are
# frozen because callers concatenate them into fresh arrays anyway
_FEAT_CACHE: "OrderedDict[tuple[int, Term], np.ndarray]" = OrderedDict()
_FEAT_CACHE_SIZE = 1024


def featurize(t: Union[Term, PartialProgram], n: int = HASH_BASE) -> np.ndarray:
    """Count vector of hashed leaf words and parent/child pair words."""
    if isinstance(t, PartialProgram):
        t = t.term
    key = (n, t)
    cached = _FEAT_CACHE.get(key)
    if cached is not None:
        _FEAT_CACHE.move_to_end(key)
        return cached
    vec = np.zeros(n, dtype=np.int32)
    stack = [t]
    while stack:
        cur = stack.pop()
        if cur.args:
            head = cur.head
            for child in cur.args:
                vec[_pair_hash(head, child.head) % n] += 1
                stack.append(child)
        else:
            vec[_word_hash(cur.head) % n] += 1
    vec.setflags(write=False)
    _FEAT_CACHE[key] = vec
    if len(_FEAT_CACHE) > _FEAT_CACHE_SIZE:
        _FEAT_CACHE.popitem(last=False)
    return vec


def encode_state(phi: Term, h: Union[Term, PartialProgram], n: int = HASH_BASE) -> np.ndarray:
    return np.concatenate([featurize(phi, n), featurize(h, n)])


def encode_action(
    phi: Term,
    h: Union[Term, PartialProgram],
    successor: Union[Term, PartialProgram],
    n: int = HASH_BASE,
) -> np.ndarray:
    return np.concatenate([featurize(phi, n), featurize(h, n), featurize(successor, n)])


def default_policy_score() -> float:
    return 1.0


def default_value_score(h: Union[Term, PartialProgram]) -> float:
    nts = h.nt_count if isinstance(h, PartialProgram) else h.nt_count
    return 0.95**nts


@dataclass
class TrainingRow:
    """One regression example; the input vector is kept sparse."""

    kind: str  # "policy" | "value"
    width: int
    indices: np.ndarray  # int32, sorted
    counts: np.ndarray  # int32
    target: float
    iteration: int = 0
    origin: str = ""
    split: str = ""

    def to_dense(self) -> np.ndarray:
        vec = np.zeros(self.width, dtype=np.int32)
        vec[self.indices] = self.counts
        return vec


def _sparsify(kind, vec, target, origin) -> TrainingRow:
    idx = np.flatnonzero(vec).astype(np.int32)
    return TrainingRow(
        kind=kind,
        width=len(vec),
        indices=idx,
        counts=vec[idx].astype(np.int32),
        target=float(target),
        origin=origin,
    )


def extract_training_data(trace, n: int = HASH_BASE) -> list[TrainingRow]:
    """Turn one finished search trace into value and policy rows.

    Value rows: every state on the trace path, target 0.9**(distance from the
    final state) when the search solved the problem and 0.0 otherwise.

    Policy rows (solved traces only): for each non-final path state, one row
    per child with the child's share of the state's total child visits as the
    target; states whose children were never visited are skipped.
    """
    rows: list[TrainingRow] = []
    phi = featurize(trace.constraint, n)
    path = trace.path
    last = len(path) - 1
    for i, step in enumerate(path):
        state_vec = featurize(step.state, n)
        target = 0.9 ** (last - i) if trace.solved else 0.0
        rows.append(
            _sparsify(
                "value",
                np.concatenate([phi, state_vec]),
                target,
                trace.problem_name,
            )
        )
        if trace.solved and i < last and step.children:
            total = sum(v for _, _, v in step.children)
            if total <= 0:
                continue
            for _, child_state, visits in step.children:
                rows.append(
                    _sparsify(
                        "policy",
                        np.concatenate([phi, state_vec, featurize(child_state, n)]),
                        visits / total,
                        trace.problem_name,
                    )
                )
    return rows


# ---------------------------------------------------------------------------
# CSV persistence with run-length-encoded feature blocks


def rle_encode(values: Iterable[int]) -> str:
    runs = []
    cur = None
    count = 0
    for v in values:
        if v == cur:
            count += 1
        else:
            if cur is not None:
                runs.append(f"{count}*{cur}")
            cur, count = v, 1
    if cur is not None:
        runs.append(f"{count}*{cur}")
    return ";".join(runs)


def rle_decode(text: str) -> list[int]:
    out: list[int] = []
    if not text:
        return out
    for run in text.split(";"):
        count, _, value = run.partition("*")
        out.extend([int(value)] * int(count))
    return out


_CSV_FIELDS = ["kind", "iteration", "origin", "split", "target", "width", "features"]


def save_rows(rows: Sequence[TrainingRow], path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_FIELDS)
        for r in rows:
            writer.writerow(
                [
                    r.kind,
                    r.iteration,
                    r.origin,
                    r.split,
                    repr(r.target),
                    r.width,
                    rle_encode(r.to_dense().tolist()),
                ]
            )


def load_rows(path) -> list[TrainingRow]:
    rows: list[TrainingRow] = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != _CSV_FIELDS:
            raise ValueError(f"unrecognized training-data header: {header}")
        for rec in reader:
            kind, iteration, origin, split, target, width, features = rec
            dense = np.array(rle_decode(features), dtype=np.int32)
            if len(dense) != int(width):
                raise ValueError("feature block length disagrees with width")
            row = _sparsify(kind, dense, float(target), origin)
            row.iteration = int(iteration)
            row.split = split
            rows.append(row)
    return rows
