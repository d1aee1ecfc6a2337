"""Binary random forest with class-posterior leaves and leaf-posterior fine-tuning.

Trees are grown CART-style on bootstrap resamples (Gini impurity, a random
subset of ``max_features`` candidate features per node, thresholds at
midpoints of consecutive distinct values). Each node keeps its weighted
class counts; a leaf's posterior is the fraction of class 1. Fine-tuning
reroutes new labeled data through the frozen trees and replaces every
leaf's counts, so structure and thresholds never change.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numba
import numpy as np

# values closer than this are treated as ties when choosing thresholds
FEATURE_THRESHOLD = 1e-7


class ForestError(ValueError):
    pass


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: str | int | float | None = "sqrt"
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    bootstrap: bool = True

    def n_candidates(self, p: int) -> int:
        mf = self.max_features
        if mf is None or mf == "all":
            k = p
        elif mf == "sqrt":
            k = int(math.sqrt(p))
        elif mf == "log2":
            k = int(math.log2(p))
        elif isinstance(mf, float):
            k = int(mf * p)
        else:
            k = int(mf)
        return max(1, min(p, k))


@dataclass(frozen=True)
class Tree:
    left: np.ndarray  # child index, -1 at leaves
    right: np.ndarray
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray  # go left when x[feature] <= threshold
    counts: np.ndarray  # (n_nodes, 2) weighted class counts

    @property
    def n_nodes(self) -> int:
        return self.left.shape[0]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.left < 0

    def posterior(self) -> np.ndarray:
        """Class-1 posterior per node; 0.5 where a node holds no data."""
        total = self.counts.sum(axis=1)
        out = np.full(self.n_nodes, 0.5)
        np.divide(self.counts[:, 1], total, out=out, where=total > 0)
        return out


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    n_features: int
    classes: tuple  # (negative, positive) label values
    seed: int
    params: ForestParams = field(default_factory=ForestParams)

    def structure_hash(self) -> str:
        """Digest of node layout, split features and thresholds (not counts)."""
        h = hashlib.sha256()
        h.update(str(self.n_features).encode())
        for t in self.trees:
            for arr in (t.left, t.right, t.feature):
                h.update(np.ascontiguousarray(arr, dtype="<i8").tobytes())
            h.update(np.ascontiguousarray(t.threshold, dtype="<f8").tobytes())
        return h.hexdigest()


@numba.njit(cache=True)
def _grow(X, y, w, sample_idx, max_features, max_depth, min_split, min_leaf, seed):
    np.random.seed(seed)
    n, p = X.shape
    n_samp = sample_idx.shape[0]
    cap = 2 * n_samp + 1
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    counts = np.zeros((cap, 2))
    depth = np.zeros(cap, np.int64)
    lo = np.zeros(cap, np.int64)
    hi = np.zeros(cap, np.int64)

    idx = sample_idx.copy()
    lo[0] = 0
    hi[0] = n_samp
    n_nodes = 1
    stack = np.empty(cap, np.int64)
    top = 0
    stack[top] = 0
    top += 1
    features = np.arange(p)
    vals = np.empty(n_samp)
    order_buf = np.empty(n_samp, np.int64)

    while top > 0:
        top -= 1
        node = stack[top]
        a = lo[node]
        b = hi[node]
        c0 = 0.0
        c1 = 0.0
        for i in range(a, b):
            s = idx[i]
            if y[s] == 1:
                c1 += w[s]
            else:
                c0 += w[s]
        counts[node, 0] = c0
        counts[node, 1] = c1
        m = b - a
        if m < min_split or c0 == 0.0 or c1 == 0.0 or m < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth[node] >= max_depth:
            continue

        best_score = -1.0
        best_feat = -1
        best_thr = 0.0
        total = c0 + c1
        visited = 0
        # Fisher-Yates draw of candidate features without replacement
        for f in range(p):
            features[f] = f
        f_left = p
        while f_left > 0 and (visited < max_features or best_feat < 0):
            j = np.random.randint(0, f_left)
            feat = features[j]
            features[j] = features[f_left - 1]
            features[f_left - 1] = feat
            f_left -= 1

            for i in range(m):
                vals[i] = X[idx[a + i], feat]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[m - 1]] <= vals[order[0]] + FEATURE_THRESHOLD:
                continue  # constant here; does not count toward max_features
            visited += 1
            l0 = 0.0
            l1 = 0.0
            for i in range(m - 1):
                s = idx[a + order[i]]
                if y[s] == 1:
                    l1 += w[s]
                else:
                    l0 += w[s]
                v_here = vals[order[i]]
                v_next = vals[order[i + 1]]
                if v_next <= v_here + FEATURE_THRESHOLD:
                    continue
                n_l = i + 1
                if n_l < min_leaf or m - n_l < min_leaf:
                    continue
                wl = l0 + l1
                wr = total - wl
                r0 = c0 - l0
                r1 = c1 - l1
                score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr
                if score > best_score + 1e-12:
                    best_score = score
                    best_feat = feat
                    thr = v_here / 2.0 + v_next / 2.0
                    if thr >= v_next or thr < v_here:
                        thr = v_here
                    best_thr = thr

        if best_feat < 0:
            continue
        # partition idx[a:b] so left samples come first
        k = 0
        for i in range(m):
            s = idx[a + i]
            if X[s, best_feat] <= best_thr:
                order_buf[k] = s
                k += 1
        r = k
        for i in range(m):
            s = idx[a + i]
            if X[s, best_feat] > best_thr:
                order_buf[r] = s
                r += 1
        for i in range(m):
            idx[a + i] = order_buf[i]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        lo[lc] = a
        hi[lc] = a + k
        lo[rc] = a + k
        hi[rc] = b
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        stack[top] = rc
        top += 1
        stack[top] = lc
        top += 1

    return left[:n_nodes], right[:n_nodes], feature[:n_nodes], threshold[:n_nodes], counts[:n_nodes]


@numba.njit(cache=True)
def _apply(X, left, right, feature, threshold):
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        node = 0
        while left[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _check_X(X, n_features: Optional[int] = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ForestError(f"X must be 2-D, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ForestError(f"forest expects {n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ForestError("X contains non-finite values")
    return X


def _encode(y, classes) -> np.ndarray:
    y = np.asarray(y)
    out = np.full(y.shape[0], -1, dtype=np.int64)
    out[y == classes[0]] = 0
    out[y == classes[1]] = 1
    if np.any(out < 0):
        raise ForestError(f"labels outside {classes}")
    return out


def train(X, y, params: ForestParams = ForestParams(), seed: int = 0) -> Forest:
    """Grow a bootstrap forest; deterministic given ``(X, y, params, seed)``."""
    X = _check_X(X)
    y = np.asarray(y)
    n, p = X.shape
    if y.shape != (n,):
        raise ForestError(f"{y.shape[0]} labels for {n} rows")
    if n < 2:
        raise ForestError("need at least 2 training rows")
    classes = np.unique(y)
    if classes.size != 2:
        raise ForestError(f"training labels must contain exactly 2 classes, got {classes.tolist()}")
    y01 = _encode(y, classes)
    rng = np.random.default_rng(seed)
    k = params.n_candidates(p)
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    trees = []
    for _ in range(params.n_trees):
        if params.bootstrap:
            draw = rng.integers(0, n, n)
            w = np.bincount(draw, minlength=n).astype(np.float64)
        else:
            w = np.ones(n)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        sample_idx = np.flatnonzero(w > 0)
        parts = _grow(X, y01, w, sample_idx, k, max_depth, params.min_samples_split,
                      params.min_samples_leaf, tree_seed)
        arrays = [np.array(a) for a in parts]
        for a in arrays:
            a.setflags(write=False)
        trees.append(Tree(*arrays))
    return Forest(trees=tuple(trees), n_features=p, classes=tuple(classes.tolist()), seed=int(seed), params=params)


def apply(forest: Forest, X) -> np.ndarray:
    """Leaf index reached in every tree, shape (n_trees, m)."""
    X = _check_X(X, forest.n_features)
    return np.stack([_apply(X, t.left, t.right, t.feature, t.threshold) for t in forest.trees])


def predict_posterior(forest: Forest, X) -> np.ndarray:
    """Mean over trees of the reached leaf's class-1 posterior."""
    X = _check_X(X, forest.n_features)
    total = np.zeros(X.shape[0])
    for t in forest.trees:
        total += t.posterior()[_apply(X, t.left, t.right, t.feature, t.threshold)]
    return total / len(forest.trees)


def predict(forest: Forest, X) -> np.ndarray:
    """Class labels; a posterior of exactly 0.5 goes to the positive class."""
    post = predict_posterior(forest, X)
    neg, pos = forest.classes
    return np.where(post >= 0.5, pos, neg)


def fine_tune(forest: Forest, X_new, y_new) -> Forest:
    """Replace every leaf's counts with those of the new labeled data.

    Leaves reached by no new sample end up with posterior 0.5.
    """
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.size == 0:
        X_new = X_new.reshape(0, forest.n_features)
    X_new = _check_X(X_new, forest.n_features)
    y_new = np.asarray(y_new)
    if y_new.shape != (X_new.shape[0],):
        raise ForestError(f"{y_new.shape[0] if y_new.ndim else 0} labels for {X_new.shape[0]} rows")
    y01 = _encode(y_new, forest.classes) if y_new.size else np.zeros(0, dtype=np.int64)
    trees = []
    for t in forest.trees:
        leaves = _apply(X_new, t.left, t.right, t.feature, t.threshold)
        counts = np.zeros_like(t.counts)
        np.add.at(counts, (leaves, y01), 1.0)
        counts = _propagate_up(t, counts)
        counts.setflags(write=False)
        trees.append(replace(t, counts=counts))
    return replace(forest, trees=tuple(trees))


def _propagate_up(t: Tree, counts: np.ndarray) -> np.ndarray:
    # children always have larger indices than their parent
    for node in range(t.n_nodes - 1, -1, -1):
        if t.left[node] >= 0:
            counts[node] = counts[t.left[node]] + counts[t.right[node]]
    return counts


def balanced_accuracy(y_true, y_pred) -> float:
    """Mean of per-class recalls over the classes present in ``y_true``."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    classes = np.unique(y_true)
    if classes.size < 2:
        raise ValueError("balanced accuracy is undefined when y_true has a single class")
    return float(np.mean([np.mean(y_pred[y_true == c] == c) for c in classes]))


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("accuracy of an empty prediction is undefined")
    return float(np.mean(y_true == y_pred))


def params_from_mapping(mapping: Optional[dict]) -> ForestParams:
    mapping = dict(mapping or {})
    allowed = set(ForestParams.__dataclass_fields__)
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise KeyError(f"unknown forest parameters: {unknown}")
    return ForestParams(**mapping)


def leaf_table(forest: Forest) -> Sequence[np.ndarray]:
    """Per-tree array of leaf node indices."""
    return [np.flatnonzero(t.is_leaf) for t in forest.trees]
