"""Gradient-boosted regression trees over integer count features.

Squared-error boosting: each round fits a depth-capped regression tree to the
current residuals and adds `learning_rate` times its prediction.  Training is
fully deterministic — no subsampling, ties broken toward the lowest feature
index and threshold — so identical inputs give bit-identical models.  Models
serialize to JSON with thresholds and leaf values as decimal strings (repr of
the float), which round-trips exactly.

Feature vectors are hashed-count rows: almost entirely zero, and every count
nonnegative.  The grower exploits that: it never materializes the dense
matrix, instead walking per-column lists of the nonzero entries and treating
each column's zero rows as one implicit block (their residual sum is derived
by subtracting the column's nonzero sum from the node sum).  Trees are built
level-by-level; node ids are assigned in level order.

For reproducibility the arithmetic order is pinned down: node sums accumulate
in row order (the order induced by stable partitions of the original row
order), and column scans visit nonzero entries sorted by (value, original row
index).  `tests` hold a plain-Python reference implementation of these rules
that training must match bit-for-bit.

The tree grower and the batch predictor are numba kernels; everything else is
plain numpy.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

_EPS_GAIN = 1e-12


class ModelFormatError(Exception):
    pass


@dataclass(frozen=True)
class GbtParams:
    kind: str  # "policy" | "value"
    rounds: int = 100
    learning_rate: float = 0.3
    max_depth: Optional[int] = None  # default depends on kind
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.kind not in ("policy", "value"):
            raise ValueError(f"unknown model kind '{self.kind}'")
        if self.rounds < 1 or self.learning_rate <= 0 or self.min_samples_leaf < 1:
            raise ValueError("bad boosting parameters")

    @property
    def depth(self) -> int:
        if self.max_depth is not None:
            return self.max_depth
        return 25 if self.kind == "policy" else 20


@njit(cache=True)
def _row_value(r, a, row_starts, row_feat, row_val):
    lo = row_starts[r]
    hi = row_starts[r + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        c = row_feat[mid]
        if c == a:
            return row_val[mid]
        elif c < a:
            lo = mid + 1
        else:
            hi = mid
    return np.int32(0)


@njit(cache=True)
def _grow_tree_csc(
    n, n_feat, feat_starts, csc_row, csc_val,
    row_starts, row_feat, row_val, y, max_depth, min_leaf,
):
    cap = 2 * n + 3
    feat = np.full(cap, -1, np.int32)
    thr = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    val = np.zeros(cap, np.float64)

    perm = np.arange(n, dtype=np.int64)
    tmp = np.empty(n, np.int64)
    node_of = np.zeros(n, np.int32)

    node_lo = np.zeros(cap, np.int64)
    node_hi = np.zeros(cap, np.int64)
    node_hi[0] = n
    ysum_n = np.zeros(cap, np.float64)
    m_n = np.zeros(cap, np.int64)
    parent_score = np.zeros(cap, np.float64)
    splittable = np.zeros(cap, np.uint8)
    best_gain = np.zeros(cap, np.float64)
    best_f = np.zeros(cap, np.int32)
    best_thr = np.zeros(cap, np.float64)
    # per-(level, feature) scratch, lazily reset via stamps
    nz_cnt = np.zeros(cap, np.int64)
    nz_sum = np.zeros(cap, np.float64)
    acc_cnt = np.zeros(cap, np.int64)
    acc_sum = np.zeros(cap, np.float64)
    last_val = np.zeros(cap, np.int32)
    stamp1 = np.full(cap, -1, np.int64)
    stamp2 = np.full(cap, -1, np.int64)

    level = np.empty(cap, np.int32)
    nxt = np.empty(cap, np.int32)
    level[0] = 0
    level_len = 1
    count = 1
    depth = 0
    stamp = 0

    while level_len > 0:
        any_splittable = False
        for li in range(level_len):
            u = level[li]
            lo = node_lo[u]
            hi = node_hi[u]
            m = hi - lo
            ysum = 0.0
            ysq = 0.0
            for i in range(lo, hi):
                v = y[perm[i]]
                ysum += v
                ysq += v * v
            val[u] = ysum / m
            ysum_n[u] = ysum
            m_n[u] = m
            sse = ysq - ysum * ysum / m
            if depth < max_depth and m >= 2 * min_leaf and sse > 1e-15:
                splittable[u] = 1
                any_splittable = True
                parent_score[u] = ysum * ysum / m
                best_gain[u] = _EPS_GAIN
                best_f[u] = -1
        if not any_splittable:
            break

        for a in range(n_feat):
            # pass 1: the column's nonzero count and residual sum per node
            stamp += 1
            for e in range(feat_starts[a], feat_starts[a + 1]):
                r = csc_row[e]
                u = node_of[r]
                if not splittable[u]:
                    continue
                if stamp1[u] != stamp:
                    stamp1[u] = stamp
                    nz_cnt[u] = 0
                    nz_sum[u] = 0.0
                nz_cnt[u] += 1
                nz_sum[u] += y[r]
            # pass 2: boundary-only split candidates, values ascending; the
            # implicit zero block comes first and is aggregated by subtraction
            for e in range(feat_starts[a], feat_starts[a + 1]):
                r = csc_row[e]
                u = node_of[r]
                if not splittable[u]:
                    continue
                v = csc_val[e]
                if stamp2[u] != stamp:
                    stamp2[u] = stamp
                    zc = m_n[u] - nz_cnt[u]
                    if zc > 0:
                        zs = ysum_n[u] - nz_sum[u]
                        rc = m_n[u] - zc
                        if zc >= min_leaf and rc >= min_leaf:
                            rs = ysum_n[u] - zs
                            gain = zs * zs / zc + rs * rs / rc - parent_score[u]
                            if gain > best_gain[u]:
                                best_gain[u] = gain
                                best_f[u] = a
                                best_thr[u] = (0 + v) / 2.0
                        acc_cnt[u] = zc
                        acc_sum[u] = zs
                    else:
                        acc_cnt[u] = 0
                        acc_sum[u] = 0.0
                    last_val[u] = v
                elif v != last_val[u]:
                    lc = acc_cnt[u]
                    ls = acc_sum[u]
                    rc = m_n[u] - lc
                    if lc >= min_leaf and rc >= min_leaf:
                        rs = ysum_n[u] - ls
                        gain = ls * ls / lc + rs * rs / rc - parent_score[u]
                        if gain > best_gain[u]:
                            best_gain[u] = gain
                            best_f[u] = a
                            best_thr[u] = (last_val[u] + v) / 2.0
                    last_val[u] = v
                acc_cnt[u] += 1
                acc_sum[u] += y[r]

        nxt_len = 0
        for li in range(level_len):
            u = level[li]
            if not splittable[u]:
                continue
            splittable[u] = 0
            if best_f[u] < 0:
                continue
            a = best_f[u]
            t = best_thr[u]
            lo = node_lo[u]
            hi = node_hi[u]
            # stable partition of perm[lo:hi] around the threshold
            k = 0
            for i in range(lo, hi):
                r = perm[i]
                if _row_value(r, a, row_starts, row_feat, row_val) < t:
                    tmp[k] = r
                    k += 1
            split = lo + k
            for i in range(lo, hi):
                r = perm[i]
                if not (_row_value(r, a, row_starts, row_feat, row_val) < t):
                    tmp[k] = r
                    k += 1
            for i in range(hi - lo):
                perm[lo + i] = tmp[i]
            feat[u] = a
            thr[u] = t
            lc_id = count
            rc_id = count + 1
            left[u] = lc_id
            right[u] = rc_id
            node_lo[lc_id] = lo
            node_hi[lc_id] = split
            node_lo[rc_id] = split
            node_hi[rc_id] = hi
            for i in range(lo, split):
                node_of[perm[i]] = lc_id
            for i in range(split, hi):
                node_of[perm[i]] = rc_id
            nxt[nxt_len] = lc_id
            nxt[nxt_len + 1] = rc_id
            nxt_len += 2
            count += 2
        for li in range(nxt_len):
            level[li] = nxt[li]
        level_len = nxt_len
        depth += 1

    return feat[:count], thr[:count], left[:count], right[:count], val[:count]


@njit(cache=True)
def _predict_packed(feat, thr, left, right, val, starts, X, base, lr, out):
    n = X.shape[0]
    n_trees = starts.shape[0] - 1
    for i in range(n):
        acc = base
        for t in range(n_trees):
            node = starts[t]
            while feat[node] >= 0:
                if X[i, feat[node]] < thr[node]:
                    node = left[node]
                else:
                    node = right[node]
            acc += lr * val[node]
        out[i] = acc


@njit(cache=True)
def _predict_tree_csr(feat, thr, left, right, val, row_starts, row_feat, row_val, out):
    for r in range(row_starts.shape[0] - 1):
        node = 0
        while feat[node] >= 0:
            if _row_value(r, feat[node], row_starts, row_feat, row_val) < thr[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = val[node]


class Model:
    """A trained boosted ensemble; predictions are clamped to [0, 1]."""

    def __init__(self, kind: str, n_features: int, base_score: float,
                 learning_rate: float, trees: list, meta: Optional[dict] = None):
        self.kind = kind
        self.n_features = n_features
        self.base_score = base_score
        self.learning_rate = learning_rate
        self.trees = trees  # list of (feat, thr, left, right, val) arrays
        self.meta = meta or {}
        self._pack()

    def _pack(self):
        if self.trees:
            self._feat = np.concatenate([t[0] for t in self.trees])
            self._thr = np.concatenate([t[1] for t in self.trees])
            self._left = np.concatenate([t[2] for t in self.trees])
            self._right = np.concatenate([t[3] for t in self.trees])
            self._val = np.concatenate([t[4] for t in self.trees])
            sizes = [0] + [len(t[0]) for t in self.trees]
            offsets = np.cumsum(sizes).astype(np.int64)
            # child pointers must be rebased to the packed layout
            self._feat = self._feat.astype(np.int32)
            self._left = self._left.astype(np.int64)
            self._right = self._right.astype(np.int64)
            for t in range(len(self.trees)):
                a, b = offsets[t], offsets[t + 1]
                mask = self._feat[a:b] >= 0
                self._left[a:b][mask] += a
                self._right[a:b][mask] += a
            self._starts = offsets
        else:
            self._feat = np.empty(0, np.int32)
            self._thr = np.empty(0, np.float64)
            self._left = np.empty(0, np.int64)
            self._right = np.empty(0, np.int64)
            self._val = np.empty(0, np.float64)
            self._starts = np.zeros(1, np.int64)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"{self.kind} model expects {self.n_features} features, "
                f"got shape {X.shape}"
            )
        X = np.ascontiguousarray(X, dtype=np.int32)
        out = np.empty(X.shape[0], np.float64)
        _predict_packed(
            self._feat, self._thr, self._left, self._right, self._val,
            self._starts, X, self.base_score, self.learning_rate, out,
        )
        return np.clip(out, 0.0, 1.0)

    def predict(self, x: np.ndarray) -> float:
        return float(self.predict_batch(np.asarray(x).reshape(1, -1))[0])

    # -- persistence

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "n_features": self.n_features,
            "base_score": repr(self.base_score),
            "learning_rate": repr(self.learning_rate),
            "meta": self.meta,
            "trees": [
                {
                    "feature": [int(v) for v in t[0]],
                    "threshold": [repr(float(v)) for v in t[1]],
                    "left": [int(v) for v in t[2]],
                    "right": [int(v) for v in t[3]],
                    "value": [repr(float(v)) for v in t[4]],
                }
                for t in self.trees
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Model":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"not JSON: {e}") from None
        try:
            trees = [
                (
                    np.array(t["feature"], np.int32),
                    np.array([float(s) for s in t["threshold"]], np.float64),
                    np.array(t["left"], np.int32),
                    np.array(t["right"], np.int32),
                    np.array([float(s) for s in t["value"]], np.float64),
                )
                for t in doc["trees"]
            ]
            return cls(
                kind=doc["kind"],
                n_features=int(doc["n_features"]),
                base_score=float(doc["base_score"]),
                learning_rate=float(doc["learning_rate"]),
                trees=trees,
                meta=doc.get("meta", {}),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"malformed model document: {e}") from None

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Model":
        with open(path) as f:
            return cls.from_json(f.read())


def fit_sparse(
    indices: Sequence[np.ndarray],
    counts: Sequence[np.ndarray],
    targets: Sequence[float],
    n_features: int,
    params: GbtParams,
    meta: Optional[dict] = None,
) -> Model:
    """Train a model from sparse rows (per row: feature indices and counts).

    Counts must be nonnegative; explicit zero counts are dropped.  Only
    columns that are nonzero somewhere in the data can carry a split, so
    training projects to just those; tree nodes still refer to original
    feature indices, which keeps prediction independent of the projection.
    """
    n_rows = len(indices)
    if n_rows == 0:
        raise ValueError("cannot train on zero rows")
    if not (len(counts) == len(targets) == n_rows):
        raise ValueError("indices/counts/targets disagree on row count")
    y = np.asarray(targets, dtype=np.float64)

    lens = np.array([len(ix) for ix in indices], dtype=np.int64)
    all_idx = (
        np.concatenate([np.asarray(ix, np.int64) for ix in indices])
        if lens.sum()
        else np.empty(0, np.int64)
    )
    all_cnt = (
        np.concatenate([np.asarray(c, np.int64) for c in counts])
        if lens.sum()
        else np.empty(0, np.int64)
    )
    if all_idx.size and (all_idx.min() < 0 or all_idx.max() >= n_features):
        raise ValueError("feature index out of range")
    if all_cnt.size and all_cnt.min() < 0:
        raise ValueError("count features must be nonnegative")
    row_ids = np.repeat(np.arange(n_rows, dtype=np.int64), lens)
    keep = all_cnt != 0
    all_idx, all_cnt, row_ids = all_idx[keep], all_cnt[keep], row_ids[keep]
    active = np.unique(all_idx)
    proj = np.searchsorted(active, all_idx).astype(np.int64)
    values = all_cnt.astype(np.int32)

    # CSR, columns ascending within each row (rows keep their given order)
    order = np.lexsort((proj, row_ids))
    row_feat = proj[order].astype(np.int64)
    row_val = values[order]
    row_starts = np.zeros(n_rows + 1, np.int64)
    np.add.at(row_starts, row_ids + 1, 1)
    np.cumsum(row_starts, out=row_starts)
    # CSC, entries sorted by (column, value, original row)
    order = np.lexsort((row_ids, values, proj))
    csc_row = row_ids[order]
    csc_val = values[order]
    feat_starts = np.zeros(len(active) + 1, np.int64)
    np.add.at(feat_starts, proj + 1, 1)
    np.cumsum(feat_starts, out=feat_starts)

    base = float(y.mean())
    pred = np.full(n_rows, base, np.float64)
    trees = []
    rounds_used = 0
    for _ in range(params.rounds):
        residual = y - pred
        if np.abs(residual).max() < 1e-12:
            break
        feat, thr, left, right, val = _grow_tree_csc(
            n_rows, len(active), feat_starts, csc_row, csc_val,
            row_starts, row_feat, row_val,
            residual, params.depth, params.min_samples_leaf,
        )
        contrib = np.empty(n_rows, np.float64)
        _predict_tree_csr(feat, thr, left, right, val,
                          row_starts, row_feat, row_val, contrib)
        pred += params.learning_rate * contrib
        # remap split features from the active projection to original indices
        mapped = feat.copy()
        mask = feat >= 0
        if active.size:
            mapped[mask] = active[feat[mask]].astype(np.int32)
        trees.append((mapped, thr, left, right, val))
        rounds_used += 1

    info = dict(meta or {})
    info.update(
        {
            "rounds": params.rounds,
            "rounds_used": rounds_used,
            "max_depth": params.depth,
            "min_samples_leaf": params.min_samples_leaf,
            "n_rows": n_rows,
            "n_active_features": int(active.size),
        }
    )
    return Model(
        kind=params.kind,
        n_features=n_features,
        base_score=base,
        learning_rate=params.learning_rate,
        trees=trees,
        meta=info,
    )
