"""Bootstrap forest of Gini-impurity CART trees with hard-vote aggregation."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .._random import rng_for
from ..parallel import pmap


class Tree:
    """Array-backed binary tree. Leaves have ``feature == -1``."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self):
        return len(self.feature)

    def apply(self, X):
        """Leaf index reached by each row."""
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            f = self.feature[node[active]]
            go_left = X[active, f] <= self.threshold[node[active]]
            node[active] = np.where(go_left, self.left[node[active]], self.right[node[active]])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_class(self, X):
        # argmax picks the lowest class index on ties
        return np.argmax(self.value[self.apply(X)], axis=1)

    def to_dict(self):
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"])


@njit(cache=True)
def _best_split(X, y_pos, idx, feats, n_classes, min_leaf):
    """Best (feature, threshold, weighted child impurity) over ``feats``.

    Ties keep the earliest feature in ``feats`` and then the lowest split
    position. Returns feature -1 when no valid split exists.
    """
    n = idx.shape[0]
    best_f = -1
    best_thr = 0.0
    best_imp = np.inf
    xs = np.empty(n)
    total = np.zeros(n_classes)
    for i in range(n):
        total[y_pos[idx[i]]] += 1.0
    left = np.empty(n_classes)
    for fi in range(feats.shape[0]):
        f = feats[fi]
        for i in range(n):
            xs[i] = X[idx[i], f]
        order = np.argsort(xs, kind="mergesort")
        left[:] = 0.0
        sum_l = 0.0  # sum of squared left counts
        sum_r = 0.0
        for c in range(n_classes):
            sum_r += total[c] * total[c]
        for pos in range(n - 1):
            c = y_pos[idx[order[pos]]]
            lc = left[c]
            rc = total[c] - lc
            sum_l += 2.0 * lc + 1.0
            sum_r -= 2.0 * rc - 1.0
            left[c] = lc + 1.0
            nl = pos + 1.0
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            lo = xs[order[pos]]
            hi = xs[order[pos + 1]]
            if not hi > lo:
                continue
            imp = (nl - sum_l / nl + nr - sum_r / nr) / n
            if imp < best_imp:
                best_imp = imp
                best_f = f
                thr = 0.5 * (lo + hi)
                best_thr = thr if thr < hi else lo
    return best_f, best_thr, best_imp


def build_tree(X, y_pos, n_classes, max_depth, n_sub, min_leaf, rng, importances):
    """Grow one tree on rows ``(X, y_pos)``; impurity decreases are added
    into ``importances`` weighted by node size."""
    n_total, d = X.shape
    Yoh = np.zeros((n_total, n_classes))
    Yoh[np.arange(n_total), y_pos] = 1.0
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(counts):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts)
        return len(feature) - 1

    X = np.ascontiguousarray(X, dtype=np.float64)
    y_pos = np.ascontiguousarray(y_pos, dtype=np.int64)
    root_idx = np.arange(n_total)
    stack = [(new_node(Yoh.sum(axis=0)), root_idx, 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = value[node]
        n = len(idx)
        if n < 2 * min_leaf or (max_depth is not None and depth >= max_depth) or np.count_nonzero(counts) <= 1:
            continue
        node_gini = 1.0 - float(((counts / n) ** 2).sum())
        perm = rng.permutation(d)
        f = -1
        # draw n_sub candidates; keep drawing if none of them can split
        for start in range(0, d, n_sub):
            f, thr, child_imp = _best_split(X, y_pos, idx, perm[start:start + n_sub], n_classes, min_leaf)
            if f >= 0:
                break
        if f < 0:
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        importances[f] += n / n_total * (node_gini - child_imp)
        feature[node], threshold[node] = f, thr
        left[node] = new_node(Yoh[li].sum(axis=0))
        right[node] = new_node(Yoh[ri].sum(axis=0))
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))
    return Tree(feature, threshold, left, right, np.array(value))


def n_candidate_features(max_features, d):
    if max_features == "sqrt":
        return max(1, int(math.sqrt(d)))
    if max_features == "log2":
        return max(1, int(math.log2(d))) if d > 1 else 1
    return d


class RandomForest:
    def __init__(self, n_trees, max_depth, max_features, min_samples_leaf):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_leaf = min_samples_leaf
        self.trees: list[Tree] = []
        self.n_classes = 0
        self.gini_importance = None

    def fit(self, X, y_pos, n_classes, seed=0):
        n, d = X.shape
        self.n_classes = n_classes
        n_sub = n_candidate_features(self.max_features, d)

        def grow(t):
            rng = rng_for(seed, "tree", t)
            rows = rng.integers(0, n, n)
            imp = np.zeros(d)
            tree = build_tree(X[rows], y_pos[rows], n_classes, self.max_depth, n_sub, self.min_leaf, rng, imp)
            return tree, imp

        grown = pmap(grow, range(self.n_trees))
        self.trees = [t for t, _ in grown]
        total = np.sum([imp for _, imp in grown], axis=0)
        s = total.sum()
        self.gini_importance = total / s if s > 0 else total
        return self

    def tree_votes(self, X):
        """(n_trees, n_rows) predicted class position per tree."""
        return np.stack([t.predict_class(X) for t in self.trees])

    def scores(self, X):
        votes = self.tree_votes(X)
        out = np.zeros((len(X), self.n_classes))
        for row in votes:
            out[np.arange(len(X)), row] += 1.0
        return out / len(self.trees)

    def get_state(self):
        return {"n_classes": self.n_classes, "trees": [t.to_dict() for t in self.trees],
                "gini_importance": self.gini_importance.tolist()}

    def set_state(self, state):
        self.n_classes = int(state["n_classes"])
        self.trees = [Tree.from_dict(t) for t in state["trees"]]
        self.gini_importance = np.asarray(state["gini_importance"], dtype=np.float64)
        return self
