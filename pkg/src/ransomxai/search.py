"""Random hyperparameter search scored by stratified k-fold accuracy."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from ._random import derive_seed, rng_for
from .data import stratified_kfold
from .errors import ConfigMismatch, InvalidSpec
from .learners import make_params, train
from .learners.params import PARAM_TYPES, check_kind, params_to_dict
from .parallel import pmap


@dataclass(frozen=True)
class Choice:
    values: tuple

    def __post_init__(self):
        if len(self.values) == 0:
            raise InvalidSpec("choice set is empty")

    def sample(self, rng):
        return self.values[int(rng.integers(len(self.values)))]


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidSpec(f"uniform range needs lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng):
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise InvalidSpec(f"log-uniform range needs 0 < lo < hi, got [{self.lo}, {self.hi}]")

    def sample(self, rng):
        return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))


DEFAULT_SPACES = {
    "LR": {
        "l2_strength": LogUniform(1e-4, 1e2),
        "learning_rate": Choice((0.01, 0.05, 0.1)),
        "epochs": Choice((200, 500, 1000)),
    },
    "SGD": {
        "loss": Choice(("hinge", "logistic")),
        "l2_strength": LogUniform(1e-6, 1e-1),
        "epochs": Choice((10, 30, 50)),
    },
    "KNN": {
        "k": Choice(tuple(range(1, 26))),
        "weighting": Choice(("uniform", "inverse_distance")),
    },
    "NB": {
        "variance_smoothing": LogUniform(1e-12, 1e-6),
    },
    "RF": {
        "n_trees": Choice((50, 100, 200, 300)),
        "max_depth": Choice((8, 16, 24, None)),
        "max_features": Choice(("sqrt", "log2")),
        "min_samples_leaf": Choice((1, 2, 5)),
    },
    "SVM": {
        "l2_strength": LogUniform(1e-5, 1e-1),
        "epochs": Choice((20, 50, 100)),
    },
}


def check_space(kind: str, space: dict) -> dict:
    fields = {f.name for f in dataclasses.fields(PARAM_TYPES[check_kind(kind)])}
    unknown = set(space) - fields
    if unknown:
        raise ConfigMismatch(f"{kind} has no hyperparameters {sorted(unknown)}")
    for name, dist in space.items():
        if not hasattr(dist, "sample"):
            raise InvalidSpec(f"{kind}.{name}: not a distribution")
    return space


def space_from_json(doc: dict) -> dict:
    """``{"k": [1, 3]}`` is a choice set; ``{"type": "loguniform", "lo": .., "hi": ..}``
    or ``"uniform"`` give ranges."""
    out = {}
    for name, spec in doc.items():
        if isinstance(spec, list):
            out[name] = Choice(tuple(spec))
        elif isinstance(spec, dict) and spec.get("type") == "loguniform":
            out[name] = LogUniform(float(spec["lo"]), float(spec["hi"]))
        elif isinstance(spec, dict) and spec.get("type") == "uniform":
            out[name] = Uniform(float(spec["lo"]), float(spec["hi"]))
        else:
            out[name] = Choice((spec,))
    return out


@dataclass(frozen=True)
class SearchConfig:
    n_iter: int = 25
    cv_folds: int = 5
    scoring: str = "accuracy"
    seed: int = 0

    def __post_init__(self):
        if self.n_iter < 1:
            raise InvalidSpec("n_iter must be at least 1")
        if self.cv_folds < 2:
            raise InvalidSpec("cv_folds must be at least 2")
        if self.scoring != "accuracy":
            raise InvalidSpec(f"unsupported scoring {self.scoring!r}")


@dataclass
class Trial:
    hyperparams: object
    mean: float
    std: float
    error: str | None = None

    def to_dict(self):
        return {"hyperparams": params_to_dict(self.hyperparams), "mean": self.mean,
                "std": self.std, "error": self.error}


@dataclass
class SearchResult:
    best_hp: object
    best_cv_score: float
    trials: list


def draw_params(kind, space, n_iter, seed):
    rng = rng_for(seed, "search-draws", kind)
    draws = []
    for _ in range(n_iter):
        # sorted names fix the draw order regardless of dict construction
        values = {name: space[name].sample(rng) for name in sorted(space)}
        draws.append(make_params(kind, values))
    return draws


def cv_accuracy(kind, hp, X, y, folds, seed):
    scores = []
    for f, (tr, va) in enumerate(folds):
        model = train(kind, hp, X[tr], y[tr], seed=derive_seed(seed, "fold", f))
        scores.append(float(np.mean(model.predict(X[va]) == y[va])))
    return float(np.mean(scores)), float(np.std(scores))


def random_search(kind, space, X, y, cfg: SearchConfig) -> SearchResult:
    """Score ``n_iter`` seeded draws from ``space`` by mean CV accuracy.

    A draw whose training fails scores ``-inf`` and keeps its error message.
    The best trial is the first one attaining the maximum mean.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    space = check_space(kind, space if space is not None else DEFAULT_SPACES[kind])
    draws = draw_params(kind, space, cfg.n_iter, cfg.seed)
    folds = stratified_kfold(y, cfg.cv_folds, derive_seed(cfg.seed, "search-folds"))

    def run(i):
        try:
            mean, std = cv_accuracy(kind, draws[i], X, y, folds, derive_seed(cfg.seed, "trial", i))
            return Trial(draws[i], mean, std)
        except Exception as exc:  # a failed draw must not sink the search
            return Trial(draws[i], -math.inf, math.nan, f"{type(exc).__name__}: {exc}")

    trials = pmap(run, range(len(draws)))
    best = max(range(len(trials)), key=lambda i: (trials[i].mean, -i))
    return SearchResult(trials[best].hyperparams, trials[best].mean, trials)
