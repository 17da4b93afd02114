"""Recursive feature elimination with cross-validated choice of subset size."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ._random import derive_seed
from .data import stratified_kfold
from .errors import InvalidSpec
from .learners import importance, train
from .parallel import pmap


@dataclass(frozen=True)
class RfecvConfig:
    min_features_to_select: int = 1
    cv_folds: int = 5
    step: int = 1
    scoring: str = "accuracy"
    seed: int = 0

    def __post_init__(self):
        if self.min_features_to_select < 1:
            raise InvalidSpec("min_features_to_select must be at least 1")
        if self.cv_folds < 2:
            raise InvalidSpec("cv_folds must be at least 2")
        if self.step < 1:
            raise InvalidSpec("step must be at least 1")
        if self.scoring != "accuracy":
            raise InvalidSpec(f"unsupported scoring {self.scoring!r}")


@dataclass
class RfeResult:
    support: np.ndarray
    eliminated: list  # column indices in the order they were removed
    ranking: np.ndarray


@dataclass
class RfecvResult:
    support: np.ndarray
    ranking: np.ndarray
    cv_curve: list  # (subset size, mean accuracy, std) ordered from largest size down
    feature_names: list = field(default_factory=list)

    @property
    def n_selected(self) -> int:
        return int(self.support.sum())

    @property
    def selected(self) -> list:
        return [n for n, s in zip(self.feature_names, self.support) if s]

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "support": [bool(s) for s in self.support],
            "ranking": [int(r) for r in self.ranking],
            "selected": self.selected,
            "n_selected": self.n_selected,
            "cv_curve": [{"n_features": int(s), "mean_accuracy": float(m), "std": float(sd)}
                         for s, m, sd in self.cv_curve],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RfecvResult":
        curve = [(c["n_features"], c["mean_accuracy"], c["std"]) for c in d["cv_curve"]]
        return cls(np.array(d["support"], dtype=bool), np.array(d["ranking"], dtype=np.int64),
                   curve, list(d["feature_names"]))


def _ranking(n_features, surviving, eliminated):
    rank = np.ones(n_features, dtype=np.int64)
    m = len(eliminated)
    for i, j in enumerate(eliminated):
        rank[j] = m - i + 1  # the last feature removed ranks 2
    return rank


def _elimination_path(kind, hp, X, y, n_target, step, seed, X_val, y_val, on_size=None):
    surviving = list(range(X.shape[1]))
    eliminated = []
    while True:
        done = len(surviving) <= n_target
        if done and on_size is None:
            break
        model = train(kind, hp, X[:, surviving], y, seed=seed)
        if on_size is not None:
            on_size(list(surviving), model)
        if done:
            break
        imp = importance(model, X_val[:, surviving], y_val, seed=seed)
        n_remove = min(step, len(surviving) - n_target)
        # lowest importance first; on ties the higher column index goes first
        order = sorted(range(len(surviving)), key=lambda i: (imp[i], -surviving[i]))
        drop = {surviving[i] for i in order[:n_remove]}
        eliminated.extend(surviving[i] for i in order[:n_remove])
        surviving = [s for s in surviving if s not in drop]
    return surviving, eliminated


def rfe(kind, hp, X, y, n_target, seed=0, step=1, X_val=None, y_val=None) -> RfeResult:
    """Repeatedly fit, score feature importance and drop the ``step`` weakest
    columns until ``n_target`` remain.

    Permutation-importance learners (KNN, NB) use ``(X_val, y_val)``, falling
    back to the training rows when no validation split is given.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    d = X.shape[1]
    if not 1 <= n_target <= d:
        raise InvalidSpec(f"n_target must lie in [1, {d}], got {n_target}")
    if X_val is None:
        X_val, y_val = X, y
    surviving, eliminated = _elimination_path(kind, hp, X, y, n_target, step, seed, X_val, y_val)
    support = np.zeros(d, dtype=bool)
    support[surviving] = True
    return RfeResult(support, eliminated, _ranking(d, surviving, eliminated))


def candidate_sizes(n_features, min_features, step):
    sizes = list(range(n_features, min_features, -step))
    if not sizes or sizes[-1] != min_features:
        sizes.append(min_features)
    return sizes


def rfecv(kind, hp, X_train, y_train, cfg: RfecvConfig, feature_names=None) -> RfecvResult:
    """Choose the subset size with the best mean stratified-CV accuracy.

    Elimination is re-run inside every fold (fold-train rows only), so the
    validation rows never influence which columns survive in that fold.
    Ties on the curve go to the smaller subset.
    """
    X = np.asarray(X_train, dtype=np.float64)
    y = np.asarray(y_train)
    d = X.shape[1]
    min_feat = min(cfg.min_features_to_select, d)
    sizes = candidate_sizes(d, min_feat, cfg.step)
    folds = stratified_kfold(y, cfg.cv_folds, derive_seed(cfg.seed, "rfecv-folds"))

    def run_fold(f):
        tr, va = folds[f]
        scores = {}

        def record(cols, model):
            scores[len(cols)] = float(np.mean(model.predict(X[np.ix_(va, cols)]) == y[va]))

        _elimination_path(kind, hp, X[tr], y[tr], min_feat, cfg.step,
                          derive_seed(cfg.seed, "rfecv-fold", f), X[va], y[va], on_size=record)
        return [scores[s] for s in sizes]

    per_fold = np.array(pmap(run_fold, range(len(folds))))
    means = per_fold.mean(axis=0)
    stds = per_fold.std(axis=0)
    curve = [(s, float(m), float(sd)) for s, m, sd in zip(sizes, means, stds)]
    best = max(means)
    chosen = min(s for s, m in zip(sizes, means) if m == best)

    final = rfe(kind, hp, X, y, chosen, seed=derive_seed(cfg.seed, "rfecv-final"), step=cfg.step)
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(d)]
    return RfecvResult(final.support, final.ranking, curve, names)
