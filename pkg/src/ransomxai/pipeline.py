"""Train-side orchestration: preprocess, search, optional RFECV, refit, evaluate.

Everything up to the final fit sees the training partition only. The test
partition is transformed and scored afterwards.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._random import derive_seed
from .data import Dataset, stratified_kfold
from .errors import ConfigMismatch
from .learners import TrainedModel, train as train_model
from .learners.params import check_kind
from .metrics import ConfusionMatrix, MetricsReport, confusion, metrics
from .preprocess import Preprocessor
from .rfecv import RfecvConfig, RfecvResult, rfecv
from .search import SearchConfig, SearchResult, check_space, random_search, DEFAULT_SPACES


@dataclass(frozen=True)
class PipelineConfig:
    kind: str
    space: dict | None = None  # None -> DEFAULT_SPACES[kind]
    rfecv: RfecvConfig | None = None  # None disables feature selection
    search: SearchConfig = field(default_factory=SearchConfig)
    seed: int = 0
    impute_k: int = 5
    scale: bool = True
    timing_repeats: int = 1  # final fit is repeated and the median time kept

    def __post_init__(self):
        check_kind(self.kind)
        if self.timing_repeats < 1:
            raise ConfigMismatch("timing_repeats must be at least 1")
        check_space(self.kind, self.space if self.space is not None else DEFAULT_SPACES[self.kind])

    @property
    def fs_enabled(self) -> bool:
        return self.rfecv is not None


@dataclass
class PipelineResult:
    kind: str
    fs_enabled: bool
    preprocessor: Preprocessor
    model: TrainedModel
    search: SearchResult
    rfecv: RfecvResult | None
    feature_names: list  # columns the final model was trained on
    all_feature_names: list  # every post-encoding column
    y_true: np.ndarray
    y_pred: np.ndarray
    confusion: ConfusionMatrix
    report: MetricsReport
    seconds: float  # search + selection + final fit + predict
    final_fit_seconds: float
    stages: list = field(default_factory=list)


def _check_pair(train: Dataset, test: Dataset):
    if train.schema.names != test.schema.names or train.schema.kinds != test.schema.kinds:
        raise ConfigMismatch("train and test partitions have different schemas")
    if train.schema.dataset_id != test.schema.dataset_id:
        raise ConfigMismatch(
            f"train is {train.schema.dataset_id!r} but test is {test.schema.dataset_id!r}")


def run_pipeline(cfg: PipelineConfig, train: Dataset, test: Dataset) -> PipelineResult:
    """Fit one arm on ``train`` and evaluate it on ``test``.

    The order is search, then RFECV with the searched hyperparameters, then
    a refit on the surviving columns. The final-fit seed does not depend on
    whether selection is enabled, so both arms differ only in their columns.
    """
    _check_pair(train, test)
    stages = []
    pre = Preprocessor(k=cfg.impute_k, scale=cfg.scale)
    Xtr = pre.fit_transform(train).to_matrix()
    ytr = np.asarray(train.labels)
    names = pre.output_names
    classes = np.unique(ytr)
    stages.append("preprocess")

    t0 = time.perf_counter()
    search_cfg = SearchConfig(cfg.search.n_iter, cfg.search.cv_folds, cfg.search.scoring,
                              derive_seed(cfg.seed, "search", cfg.kind))
    found = random_search(cfg.kind, cfg.space, Xtr, ytr, search_cfg)
    stages.append("search")

    selection = None
    cols = np.arange(len(names))
    if cfg.fs_enabled:
        r = cfg.rfecv
        rcfg = RfecvConfig(r.min_features_to_select, r.cv_folds, r.step, r.scoring,
                           derive_seed(cfg.seed, "rfecv", cfg.kind))
        selection = rfecv(cfg.kind, found.best_hp, Xtr, ytr, rcfg, feature_names=names)
        cols = np.flatnonzero(selection.support)
        stages.append("rfecv")

    kept = [names[j] for j in cols]
    fit_times = []
    for _ in range(cfg.timing_repeats):
        t_fit = time.perf_counter()
        model = train_model(cfg.kind, found.best_hp, Xtr[:, cols], ytr,
                            seed=derive_seed(cfg.seed, "final-fit", cfg.kind),
                            feature_names=kept, classes=classes)
        fit_times.append(time.perf_counter() - t_fit)
    final_fit_seconds = float(np.median(fit_times))
    stages.append("final-fit")

    # first contact with the held-out rows
    Xte = pre.transform(test).to_matrix()[:, cols]
    stages.append("test-transform")
    y_pred = model.predict(Xte)
    seconds = time.perf_counter() - t0
    stages.append("predict")

    y_true = np.asarray(test.labels)
    cm = confusion(y_true, y_pred, classes=np.union1d(classes, y_true))
    return PipelineResult(cfg.kind, cfg.fs_enabled, pre, model, found, selection, kept, list(names),
                          y_true, y_pred, cm, metrics(cm), seconds, final_fit_seconds, stages)


@dataclass
class NestedResult:
    fold_accuracies: list
    fold_results: list

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracies))


def nested_cv(cfg: PipelineConfig, data: Dataset, n_outer: int = 5) -> NestedResult:
    """k outer folds, each running the full pipeline with its own fold as test."""
    folds = stratified_kfold(data.labels, n_outer, derive_seed(cfg.seed, "outer-folds"))
    results = []
    for f, (tr, te) in enumerate(folds):
        fold_cfg = PipelineConfig(cfg.kind, cfg.space, cfg.rfecv, cfg.search,
                                  derive_seed(cfg.seed, "outer", f), cfg.impute_k, cfg.scale,
                                  cfg.timing_repeats)
        results.append(run_pipeline(fold_cfg, data.take(tr), data.take(te)))
    return NestedResult([r.report.accuracy for r in results], results)
