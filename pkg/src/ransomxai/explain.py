"""Shapley-value explanations with an interventional (background-marginal)
value function.

A coalition's value is the model score averaged over hybrid rows that take
the coalition's features from the explained row and all other features from
each background row.

* :func:`kernel_shap`: the exact weighted least-squares solve over every
  coalition for small feature counts; above ``exact_threshold`` it samples
  coalitions with Shapley-kernel weights and solves the constrained WLS.
* :func:`tree_shap_small`: per-tree coalition enumeration for forests,
  averaged over trees.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._random import rng_for
from .errors import DegenerateSystem, InvalidSpec, TooManyFeatures
from .parallel import pmap


@dataclass(frozen=True)
class ShapConfig:
    background_size: int = 100
    exact_threshold: int = 12
    n_coalition_samples: int = 2048
    target: str = "predicted_class"
    seed: int = 0
    max_retries: int = 3

    def __post_init__(self):
        if self.background_size < 1 or self.exact_threshold < 1:
            raise InvalidSpec("background_size and exact_threshold must be at least 1")
        if self.n_coalition_samples < 2:
            raise InvalidSpec("n_coalition_samples must be at least 2")
        if self.target not in ("predicted_class", "per_class"):
            raise InvalidSpec(f"unknown target mode {self.target!r}")


def sample_background(X_train, cfg: ShapConfig) -> np.ndarray:
    X_train = np.asarray(X_train, dtype=np.float64)
    if len(X_train) <= cfg.background_size:
        return X_train.copy()
    rows = rng_for(cfg.seed, "background").choice(len(X_train), cfg.background_size, replace=False)
    return X_train[np.sort(rows)]


def shapley_kernel_weight(M: int, s: int) -> float:
    """Kernel weight of a coalition of size ``s`` among ``M`` players (0 < s < M)."""
    return (M - 1) / (math.comb(M, s) * s * (M - s))


def all_coalitions(M: int) -> np.ndarray:
    """Boolean matrix of all ``2**M`` coalitions; row ``m`` is the bitmask ``m``."""
    masks = np.arange(2 ** M, dtype=np.int64)
    return ((masks[:, None] >> np.arange(M)) & 1).astype(bool)


def coalition_values(score_fn, x, background, Z, max_block: int = 2_000_000) -> np.ndarray:
    """Mean score over background-hybrids for each coalition row of ``Z``.

    ``score_fn`` maps a 2-D array of rows to an array of shape ``(rows,)`` or
    ``(rows, outputs)``; the result has one row per coalition.
    """
    B, M = background.shape
    chunk = max(1, max_block // max(1, B * M))
    out = []
    for s in range(0, len(Z), chunk):
        z = Z[s:s + chunk]
        hybrid = np.where(z[:, None, :], x[None, None, :], background[None, :, :]).reshape(-1, M)
        v = np.asarray(score_fn(hybrid), dtype=np.float64)
        v = v.reshape(len(z), B, *v.shape[1:]).mean(axis=1)
        out.append(v)
    return np.concatenate(out, axis=0)


def _constrained_wls(Z, v, w, v_empty, v_full):
    """Solve min sum w (v - v_empty - Z phi)^2 subject to sum(phi) = v_full - v_empty."""
    M = Z.shape[1]
    delta = v_full - v_empty
    if M == 1:
        return np.asarray(delta)[None, ...]
    Zf = Z.astype(np.float64)
    # substitute phi_M = delta - sum(phi_1..M-1)
    A = Zf[:, :-1] - Zf[:, -1:]
    rhs = (v - v_empty) - np.multiply.outer(Zf[:, -1], delta)
    sw = np.sqrt(w)
    Aw = A * sw[:, None]
    rw = rhs * (sw if rhs.ndim == 1 else sw[:, None])
    sol, _res, rank, _sv = np.linalg.lstsq(Aw, rw, rcond=None)
    if rank < M - 1:
        raise DegenerateSystem(f"coalition design has rank {rank} < {M - 1}")
    last = delta - sol.sum(axis=0)
    return np.concatenate([sol, np.asarray(last)[None, ...]], axis=0)


def _sample_coalitions(M, n, rng):
    sizes = np.arange(1, M)
    p = (M - 1) / (sizes * (M - sizes))
    p = p / p.sum()
    half = max(1, n // 2)
    Z = np.zeros((2 * half, M), dtype=bool)
    drawn = rng.choice(sizes, size=half, p=p)
    for i, s in enumerate(drawn):
        members = rng.choice(M, size=s, replace=False)
        Z[2 * i, members] = True
        Z[2 * i + 1] = ~Z[2 * i]  # paired complement
    return Z


def kernel_shap_multi(score_fn, x, background, cfg: ShapConfig, rng=None):
    """Vector-output variant: returns ``(base[K], phi[M, K])`` for a score
    function producing ``K`` outputs per row (or scalars, giving ``(base, phi[M])``)."""
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    M = x.shape[0]
    v_empty = np.asarray(score_fn(background), dtype=np.float64).mean(axis=0)
    v_full = np.asarray(score_fn(x[None, :]), dtype=np.float64)[0]
    if M == 0:
        return v_empty, np.zeros((0,) + np.shape(v_empty))
    if M == 1:
        return v_empty, np.asarray(v_full - v_empty)[None, ...]
    if M <= cfg.exact_threshold:
        Z = all_coalitions(M)[1:-1]
        sizes = Z.sum(axis=1)
        w = np.array([shapley_kernel_weight(M, int(s)) for s in sizes])
        v = coalition_values(score_fn, x, background, Z)
        return v_empty, _constrained_wls(Z, v, w, v_empty, v_full)

    rng = rng if rng is not None else rng_for(cfg.seed, "coalitions")
    n = cfg.n_coalition_samples
    for _attempt in range(cfg.max_retries + 1):
        Z = _sample_coalitions(M, n, rng)
        v = coalition_values(score_fn, x, background, Z)
        try:
            return v_empty, _constrained_wls(Z, v, np.ones(len(Z)), v_empty, v_full)
        except DegenerateSystem:
            n *= 2
    raise DegenerateSystem(f"sampled design stayed rank-deficient after {cfg.max_retries} retries")


def kernel_shap(score_fn, x, background, cfg: ShapConfig | None = None, rng=None):
    """Shapley values of the scalar ``score_fn`` at ``x``.

    Returns ``(base_value, phi)`` with ``base_value + phi.sum() == score_fn(x)``.
    """
    cfg = cfg or ShapConfig()
    base, phi = kernel_shap_multi(score_fn, x, background, cfg, rng)
    return float(np.squeeze(base)), np.asarray(phi).reshape(len(x))


def exact_shapley_from_values(v: np.ndarray, M: int) -> np.ndarray:
    """Shapley values from a table of ``2**M`` coalition values (bitmask order)."""
    masks = np.arange(2 ** M)
    size = np.array([bin(m).count("1") for m in masks])
    fact = [math.factorial(i) for i in range(M + 1)]
    weight = np.array([fact[s] * fact[M - s - 1] / fact[M] if s < M else 0.0 for s in size])
    phi = np.zeros((M,) + v.shape[1:])
    for j in range(M):
        without = masks[(masks >> j) & 1 == 0]
        with_j = without | (1 << j)
        diff = v[with_j] - v[without]
        phi[j] = np.tensordot(weight[without], diff, axes=(0, 0))
    return phi


def tree_shap_small(model, x, background, cfg: ShapConfig | None = None, target=None):
    """Exact interventional Shapley values of a forest's vote share for class
    ``target`` (a class label; defaults to the predicted class), computed tree
    by tree and averaged. Returns ``(base_value, phi)``."""
    cfg = cfg or ShapConfig()
    if model.kind != "RF":
        raise ValueError("tree_shap_small needs a random-forest model")
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    M = x.shape[0]
    if M > cfg.exact_threshold:
        raise TooManyFeatures(f"{M} features exceed the exact threshold {cfg.exact_threshold}")
    if target is None:
        target = model.predict(x[None, :])[0]
    pos = int(np.searchsorted(model.classes, target))
    Z = all_coalitions(M)
    B = len(background)
    hybrid = np.where(Z[:, None, :], x[None, None, :], background[None, :, :]).reshape(-1, M)
    phi = np.zeros(M)
    base = 0.0
    trees = model.estimator.trees
    for tree in trees:
        v = (tree.predict_class(hybrid) == pos).astype(np.float64).reshape(len(Z), B).mean(axis=1)
        phi += exact_shapley_from_values(v, M)
        base += v[0]
    return base / len(trees), phi / len(trees)


# ---------------------------------------------------------------- datasets


@dataclass
class ShapArray:
    values: np.ndarray  # (rows, explained targets, features)
    base_values: np.ndarray  # (rows, explained targets)
    targets: np.ndarray  # class label explained in each (row, target) slot
    feature_names: list
    mode: str = "predicted_class"
    seed: int = 0

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "base_values": self.base_values.tolist(),
                "targets": self.targets.tolist(), "feature_names": list(self.feature_names),
                "mode": self.mode, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class SummaryRanking:
    features: list
    mean_abs: list
    seed: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "mean_abs_shap"])
        for f, m in zip(self.features, self.mean_abs):
            w.writerow([f, repr(float(m))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SummaryRanking":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        return cls([r[0] for r in rows], [float(r[1]) for r in rows])

    def to_dict(self) -> dict:
        return {"features": list(self.features), "mean_abs_shap": [float(m) for m in self.mean_abs],
                "seed": self.seed}


def _model_score_fn(model):
    return lambda H: model.score_matrix(H)


def explain_dataset(model, X, background, cfg: ShapConfig | None = None) -> ShapArray:
    """One Shapley row per row of ``X``.

    ``predicted_class`` explains the score of each row's predicted class;
    ``per_class`` explains every class score. Forests with few enough
    features use :func:`tree_shap_small`.
    """
    cfg = cfg or ShapConfig()
    X = np.asarray(X, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    M = X.shape[1]
    n_cls = len(model.classes)
    use_tree = model.kind == "RF" and M <= cfg.exact_threshold
    score_fn = _model_score_fn(model)
    preds = model.predict(X) if len(X) else np.zeros(0, dtype=np.int64)

    def one(r):
        x = X[r]
        if cfg.target == "predicted_class":
            wanted = [int(np.searchsorted(model.classes, preds[r]))]
        else:
            wanted = list(range(n_cls))
        if use_tree:
            pairs = [tree_shap_small(model, x, background, cfg, target=model.classes[p]) for p in wanted]
            return np.array([b for b, _ in pairs]), np.stack([p for _, p in pairs])
        base, phi = kernel_shap_multi(score_fn, x, background, cfg, rng_for(cfg.seed, "shap-row", r))
        return base[wanted], phi[:, wanted].T

    results = pmap(one, range(len(X)))
    K = 1 if cfg.target == "predicted_class" else n_cls
    values = np.stack([v for _, v in results]) if results else np.zeros((0, K, M))
    bases = np.stack([b for b, _ in results]) if results else np.zeros((0, K))
    if cfg.target == "predicted_class":
        targets = preds.reshape(-1, 1)
    else:
        targets = np.tile(model.classes, (len(X), 1))
    return ShapArray(values, bases, targets, list(model.feature_names), cfg.target, cfg.seed)


def summarize(shap: ShapArray, top_k: int | None = None) -> SummaryRanking:
    """Features ordered by mean |SHAP| over rows and explained targets
    (descending, ties by name), truncated to ``top_k``."""
    if shap.values.size:
        means = np.abs(shap.values).mean(axis=(0, 1))
    else:
        means = np.zeros(len(shap.feature_names))
    order = sorted(range(len(means)), key=lambda j: (-means[j], shap.feature_names[j]))
    if top_k is not None:
        order = order[:top_k]
    return SummaryRanking([shap.feature_names[j] for j in order], [float(means[j]) for j in order], shap.seed)
