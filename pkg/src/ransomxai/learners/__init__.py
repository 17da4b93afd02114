"""Six learners behind one train / predict / score / importance contract.

LR, SGD and SVM are one-vs-rest ensembles of binary linear scorers; KNN, NB
and RF are natively multiclass. ``predict`` is always the argmax of
``score_matrix`` with ties going to the lowest class.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .._random import rng_for
from ..errors import DegenerateClass, NotTrained, ShapeMismatch, SingularInput
from .forest import RandomForest
from .linear import LogisticOvR, SubgradientOvR
from .neighbors import GaussianNB, KNNVote
from .params import (
    KINDS,
    OVR_KINDS,
    PARAM_TYPES,
    KNNParams,
    LRParams,
    NBParams,
    RFParams,
    SGDParams,
    SVMParams,
    check_kind,
    default_params,
    make_params,
    params_to_dict,
)

MODEL_FORMAT = "ransomxai-model"
MODEL_VERSION = 1

__all__ = [
    "KINDS", "OVR_KINDS", "LRParams", "SGDParams", "KNNParams", "NBParams", "RFParams",
    "SVMParams", "TrainedModel", "train", "predict", "score_matrix", "importance",
    "permutation_importance", "default_params", "make_params",
]


def _estimator(kind, hp):
    if kind == "LR":
        return LogisticOvR(hp.l2_strength, hp.learning_rate, hp.epochs)
    if kind == "SGD":
        return SubgradientOvR(hp.loss, hp.l2_strength, hp.epochs, hp.learning_rate)
    if kind == "SVM":
        return SubgradientOvR("hinge", hp.l2_strength, hp.epochs, hp.learning_rate, project=True)
    if kind == "KNN":
        return KNNVote(hp.k, hp.weighting)
    if kind == "NB":
        return GaussianNB(hp.variance_smoothing)
    return RandomForest(hp.n_trees, hp.max_depth, hp.max_features, hp.min_samples_leaf)


@dataclass
class TrainedModel:
    kind: str
    hyperparams: object
    classes: np.ndarray
    feature_names: list
    estimator: object = field(repr=False)
    seed: int = 0

    @property
    def n_features(self):
        return len(self.feature_names)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeMismatch(f"expected {self.n_features} features, got array of shape {X.shape}")
        return X

    def score_matrix(self, X) -> np.ndarray:
        return self.estimator.scores(self._check(X))

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.score_matrix(X), axis=1)]

    # ---- serialisation ----
    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "hyperparams": params_to_dict(self.hyperparams),
            "classes": [int(c) for c in self.classes],
            "feature_names": list(self.feature_names),
            "seed": int(self.seed),
            "state": self.estimator.get_state(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise ValueError(f"not a version-{MODEL_VERSION} {MODEL_FORMAT} document")
        kind = check_kind(doc["kind"])
        hp = make_params(kind, doc["hyperparams"])
        est = _estimator(kind, hp).set_state(doc["state"])
        return cls(kind, hp, np.asarray(doc["classes"], dtype=np.int64), list(doc["feature_names"]),
                   est, doc.get("seed", 0))

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def train(kind: str, hp, X, y, seed: int = 0, feature_names=None, classes=None) -> TrainedModel:
    """Fit a learner of ``kind``. ``classes`` optionally fixes the expected
    label set; any of them absent from ``y`` raises :class:`DegenerateClass`."""
    check_kind(kind)
    if hp is None:
        hp = default_params(kind)
    if not isinstance(hp, PARAM_TYPES[kind]):
        raise TypeError(f"{kind} needs {PARAM_TYPES[kind].__name__}, got {type(hp).__name__}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise SingularInput("training matrix has no features")
    if len(X) != len(y):
        raise ShapeMismatch(f"{len(X)} rows but {len(y)} labels")
    if np.isnan(X).any():
        raise ValueError("training matrix contains missing values; impute first")
    present = np.unique(y)
    if classes is not None:
        classes = np.unique(np.asarray(classes, dtype=np.int64))
        absent = np.setdiff1d(classes, present)
        if len(absent):
            raise DegenerateClass(f"classes with no training rows: {absent.tolist()}")
    else:
        classes = present
    if len(classes) < 2:
        raise DegenerateClass(f"{kind} needs at least two classes, got {classes.tolist()}")
    y_pos = np.searchsorted(classes, y)
    est = _estimator(kind, hp).fit(X, y_pos, len(classes), seed=seed)
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(X.shape[1])]
    return TrainedModel(kind, hp, classes, names, est, seed)


def predict(model: TrainedModel, X) -> np.ndarray:
    return model.predict(X)


def score_matrix(model: TrainedModel, X) -> np.ndarray:
    return model.score_matrix(X)


def permutation_importance(model: TrainedModel, X_val, y_val, seed: int = 0) -> np.ndarray:
    """Accuracy drop when each column is shuffled (one seeded permutation per column), floored at 0."""
    X_val = model._check(X_val)
    y_val = np.asarray(y_val)
    base = np.mean(model.predict(X_val) == y_val)
    out = np.zeros(X_val.shape[1])
    for j in range(X_val.shape[1]):
        perm = rng_for(seed, "permute", j).permutation(len(X_val))
        Xp = X_val.copy()
        Xp[:, j] = X_val[perm, j]
        out[j] = max(0.0, base - np.mean(model.predict(Xp) == y_val))
    return out


def importance(model: TrainedModel, X_val=None, y_val=None, seed: int = 0) -> np.ndarray:
    """Non-negative per-feature ranking signal used by recursive elimination."""
    if model is None or getattr(model, "estimator", None) is None:
        raise NotTrained("model has not been trained")
    if model.kind in OVR_KINDS:
        return model.estimator.coef_abs_mean()
    if model.kind == "RF":
        return model.estimator.gini_importance.copy()
    if X_val is None or y_val is None:
        raise ValueError(f"{model.kind} importance is permutation-based and needs validation data")
    return permutation_importance(model, X_val, y_val, seed)
