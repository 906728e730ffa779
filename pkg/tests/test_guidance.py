"""Feature hashing, default scores, training-row extraction, persistence."""
from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from conftest import int_terms
from liasynth.grammar import PartialProgram
from liasynth.guidance import (
    HASH_BASE,
    TrainingRow,
    default_policy_score,
    default_value_score,
    encode_action,
    encode_state,
    extract_training_data,
    featurize,
    fnv1a64,
    load_rows,
    rle_decode,
    rle_encode,
    save_rows,
)
from liasynth.parsing import read_all, term_from_sexpr
from liasynth.search import SearchTrace, TraceStep
from liasynth.terms import BOOL, INT, Term, app, intval, nt, var

x, y = var("x", INT), var("y", INT)
I = nt("I", INT)


# --- FNV-1a ------------------------------------------------------------------

def ref_fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) % 2**64
    return h


def test_fnv_published_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


@given(st.binary(max_size=64))
def test_fnv_matches_reference(data):
    assert fnv1a64(data) == ref_fnv1a64(data)


# --- featurize ----------------------------------------------------------------

def ref_featurize(t: Term, n: int) -> list[int]:
    """Independent recount: leaf words plus parent/child pair words."""
    vec = [0] * n

    def walk(node: Term):
        if node.args:
            for child in node.args:
                word = node.head.encode() + b"\x1f" + child.head.encode()
                vec[ref_fnv1a64(word) % n] += 1
                walk(child)
        else:
            vec[ref_fnv1a64(node.head.encode()) % n] += 1

    walk(t)
    return vec


def leaf_count(t: Term) -> int:
    if not t.args:
        return 1
    return sum(leaf_count(a) for a in t.args)


def test_single_variable_is_one_feature():
    vec = featurize(x, 101)
    assert vec.sum() == 1
    assert np.count_nonzero(vec) == 1


def test_plus_x_one_has_mass_four():
    vec = featurize(app("+", (x, intval(1))), HASH_BASE)
    assert vec.sum() == 4  # leaves x, 1 and walks (+,x), (+,1)


def test_nonterminals_contribute_their_symbol():
    a = featurize(app("+", (I, I)), HASH_BASE)
    b = ref_featurize(app("+", (I, I)), HASH_BASE)
    assert a.tolist() == b
    assert a.sum() == 4


@given(int_terms(names=("x", "y")), st.sampled_from([7, 97, 4093]))
def test_featurize_matches_reference(t, n):
    assert featurize(t, n).tolist() == ref_featurize(t, n)


@given(int_terms(names=("x", "y")))
def test_mass_is_leaves_plus_edges(t):
    vec = featurize(t, HASH_BASE)
    assert vec.sum() == leaf_count(t) + t.size - 1


@given(int_terms(names=("x", "y")))
def test_mass_is_invariant_under_base(t):
    masses = {int(featurize(t, n).sum()) for n in (5, 53, 997, HASH_BASE)}
    assert len(masses) == 1


def test_distinct_symbols_make_distinct_vectors():
    phi = app(">=", (x, y))
    h1, h2 = app("+", (x, I)), app("+", (y, I))
    assert not np.array_equal(
        encode_state(phi, h1, HASH_BASE), encode_state(phi, h2, HASH_BASE)
    )


def test_encode_state_concatenates():
    phi = app(">=", (x, y))
    h = PartialProgram(app("+", (x, I)))
    vec = encode_state(phi, h, 97)
    assert vec.shape == (2 * 97,)
    assert np.array_equal(vec[:97], featurize(phi, 97))
    assert np.array_equal(vec[97:], featurize(h, 97))


def test_encode_action_concatenates():
    phi = app(">=", (x, y))
    h, h2 = app("+", (I, I)), app("+", (x, I))
    vec = encode_action(phi, h, h2, 97)
    assert vec.shape == (3 * 97,)
    assert np.array_equal(vec[2 * 97 :], featurize(h2, 97))
    # second segment of the worked example: leaves E,E plus walks (+,E),(+,E)
    assert featurize(h, 97).sum() == 4


def test_featurize_is_deterministic_across_processes():
    script = (
        "from liasynth.guidance import featurize\n"
        "from liasynth.parsing import read_all, term_from_sexpr\n"
        "from liasynth.terms import INT\n"
        "t = term_from_sexpr(read_all('(ite (>= x y) (+ x 1) (- y 2))')[0], {'x': INT, 'y': INT})\n"
        "v = featurize(t, 4093)\n"
        "print([(int(i), int(v[i])) for i in v.nonzero()[0]])\n"
    )
    out = subprocess.run(
        [sys.executable, "-c", script], capture_output=True, text=True, timeout=60
    )
    assert out.returncode == 0, out.stderr
    t = term_from_sexpr(
        read_all("(ite (>= x y) (+ x 1) (- y 2))")[0], {"x": INT, "y": INT}
    )
    v = featurize(t, 4093)
    here = [(int(i), int(v[i])) for i in v.nonzero()[0]]
    assert out.stdout.strip() == str(here)


# --- default scores -------------------------------------------------------------

def test_default_scores():
    assert default_policy_score() == 1.0
    assert default_value_score(PartialProgram(x)) == 1.0
    assert default_value_score(PartialProgram(I)) == 0.95
    three = PartialProgram(app("ite", (nt("B", BOOL), I, I)))
    assert abs(default_value_score(three) - 0.857375) < 1e-12
    assert default_value_score(three) == 0.95**3


@given(st.integers(0, 12))
def test_default_value_is_exponential_in_nonterminals(k):
    t = I
    for _ in range(k):
        t = app("+", (I, t))
    assert default_value_score(PartialProgram(t)) == 0.95 ** (k + 1)


# --- training-row extraction ------------------------------------------------------

PHI = app(">=", (app("+", (x, y)), x))


def make_trace(solved: bool) -> SearchTrace:
    s0 = I
    s1 = app("+", (x, I))
    s2 = app("+", (x, intval(1)))
    return SearchTrace(
        problem_name="toy",
        constraint=PHI,
        solved=solved,
        path=[
            TraceStep(state=s0, children=[(0, s1, 5), (1, x, 3)]),
            TraceStep(state=s1, children=[(2, s2, 7)]),
            TraceStep(state=s2, children=[]),
        ],
    )


def test_solved_trace_value_targets_decay_toward_the_solution():
    rows = extract_training_data(make_trace(True), n=97)
    value = [r for r in rows if r.kind == "value"]
    assert [r.target for r in value] == [0.9**2, 0.9, 1.0]
    assert all(r.width == 2 * 97 for r in value)
    assert all(r.origin == "toy" for r in rows)


def test_solved_trace_policy_targets_are_visit_shares():
    rows = extract_training_data(make_trace(True), n=97)
    policy = [r for r in rows if r.kind == "policy"]
    assert [r.target for r in policy] == [5 / 8, 3 / 8, 1.0]
    assert all(r.width == 3 * 97 for r in policy)
    # shares at each decision point sum to one
    assert abs(policy[0].target + policy[1].target - 1.0) < 1e-9


def test_failed_trace_yields_zero_values_and_no_policy():
    rows = extract_training_data(make_trace(False), n=97)
    assert all(r.kind == "value" for r in rows)
    assert all(r.target == 0.0 for r in rows)


def test_zero_visit_states_are_skipped_for_policy():
    trace = make_trace(True)
    trace.path[0].children = [(0, app("+", (x, I)), 0), (1, x, 0)]
    rows = extract_training_data(trace, n=97)
    policy = [r for r in rows if r.kind == "policy"]
    assert [r.target for r in policy] == [1.0]  # only the second step remains
    assert len([r for r in rows if r.kind == "value"]) == 3


def test_row_vectors_are_the_documented_encodings():
    n = 97
    rows = extract_training_data(make_trace(True), n=n)
    s0 = I
    s1 = app("+", (x, I))
    value = [r for r in rows if r.kind == "value"]
    assert np.array_equal(value[0].to_dense(), encode_state(PHI, s0, n))
    policy = [r for r in rows if r.kind == "policy"]
    assert np.array_equal(policy[0].to_dense(), encode_action(PHI, s0, s1, n))


@given(int_terms(names=("x", "y")))
def test_to_dense_inverts_sparsify(t):
    rows = extract_training_data(
        SearchTrace("p", PHI, True, [TraceStep(state=t, children=[])]), n=53
    )
    (row,) = rows
    dense = row.to_dense()
    assert np.array_equal(dense, encode_state(PHI, t, 53))
    assert (dense[row.indices] == row.counts).all()
    assert np.count_nonzero(dense) == len(row.indices)


# --- RLE + CSV persistence ----------------------------------------------------------

def test_rle_anchors():
    assert rle_encode([]) == ""
    assert rle_encode([0, 0, 0, 1, 1, 2]) == "3*0;2*1;1*2"
    assert rle_decode("3*0;2*1;1*2") == [0, 0, 0, 1, 1, 2]
    assert rle_decode("") == []


@given(st.lists(st.integers(0, 4), max_size=60))
def test_rle_round_trip(values):
    assert rle_decode(rle_encode(values)) == values


@given(st.lists(st.integers(0, 3), min_size=1, max_size=40))
def test_rle_is_compact(values):
    # runs collapse: encoding never has more runs than value changes + 1
    changes = sum(1 for a, b in zip(values, values[1:]) if a != b)
    assert rle_encode(values).count(";") == changes


def test_save_load_round_trip(tmp_path):
    rows = extract_training_data(make_trace(True), n=53)
    for i, r in enumerate(rows):
        r.iteration = 2
        r.split = "train" if i % 2 == 0 else "test"
    path = tmp_path / "rows.csv"
    save_rows(rows, path)
    back = load_rows(path)
    assert len(back) == len(rows)
    for a, b in zip(rows, back):
        assert a.kind == b.kind
        assert a.width == b.width
        assert a.target == b.target  # repr() persistence: bit-exact
        assert a.iteration == b.iteration
        assert a.split == b.split
        assert a.origin == b.origin
        assert np.array_equal(a.indices, b.indices)
        assert np.array_equal(a.counts, b.counts)


def test_load_rows_rejects_foreign_headers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        load_rows(path)
