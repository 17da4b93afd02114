"""Hyperparameter records for the six learner kinds."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import InvalidSpec

KINDS = ("LR", "SGD", "KNN", "NB", "RF", "SVM")
OVR_KINDS = ("LR", "SGD", "SVM")


def _positive(**values):
    for name, v in values.items():
        if not v > 0:
            raise InvalidSpec(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class LRParams:
    l2_strength: float = 1e-3
    learning_rate: float = 0.1
    epochs: int = 500

    def __post_init__(self):
        _positive(l2_strength=self.l2_strength, learning_rate=self.learning_rate, epochs=self.epochs)


@dataclass(frozen=True)
class SGDParams:
    loss: str = "hinge"
    l2_strength: float = 1e-4
    epochs: int = 30
    learning_rate: float = 0.1  # eta0 of eta_t = eta0 / (1 + eta0 * l2 * t)

    def __post_init__(self):
        if self.loss not in ("hinge", "logistic"):
            raise InvalidSpec(f"unknown SGD loss {self.loss!r}")
        _positive(l2_strength=self.l2_strength, epochs=self.epochs, learning_rate=self.learning_rate)


@dataclass(frozen=True)
class KNNParams:
    k: int = 5
    weighting: str = "uniform"

    def __post_init__(self):
        if self.weighting not in ("uniform", "inverse_distance"):
            raise InvalidSpec(f"unknown KNN weighting {self.weighting!r}")
        _positive(k=self.k)


@dataclass(frozen=True)
class NBParams:
    variance_smoothing: float = 1e-9

    def __post_init__(self):
        _positive(variance_smoothing=self.variance_smoothing)


@dataclass(frozen=True)
class RFParams:
    n_trees: int = 100
    max_depth: int | None = None
    max_features: str = "sqrt"
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_features not in ("sqrt", "log2", "all"):
            raise InvalidSpec(f"unknown max_features {self.max_features!r}")
        _positive(n_trees=self.n_trees, min_samples_leaf=self.min_samples_leaf)
        if self.max_depth is not None:
            _positive(max_depth=self.max_depth)


@dataclass(frozen=True)
class SVMParams:
    l2_strength: float = 1e-3
    epochs: int = 50
    learning_rate: float = 0.1

    def __post_init__(self):
        _positive(l2_strength=self.l2_strength, epochs=self.epochs, learning_rate=self.learning_rate)


PARAM_TYPES = {
    "LR": LRParams,
    "SGD": SGDParams,
    "KNN": KNNParams,
    "NB": NBParams,
    "RF": RFParams,
    "SVM": SVMParams,
}


def check_kind(kind: str) -> str:
    if kind not in PARAM_TYPES:
        raise InvalidSpec(f"unknown classifier kind {kind!r}; expected one of {KINDS}")
    return kind


def default_params(kind: str):
    return PARAM_TYPES[check_kind(kind)]()


def make_params(kind: str, values: dict | None = None):
    return PARAM_TYPES[check_kind(kind)](**(values or {}))


def params_to_dict(hp) -> dict:
    return dataclasses.asdict(hp)
