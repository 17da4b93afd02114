"""Train-fitted transforms: drop-first one-hot encoding, min-max scaling and
nan-aware k-nearest-neighbour imputation, applied in that order."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, NUMERIC, Dataset, Feature, FeatureSchema
from .errors import ColumnUnimputable, NotFitted, TypeMismatch


@dataclass(frozen=True)
class EncoderState:
    # feature name -> sorted train categories; the first one is the dropped baseline
    categories: dict
    input_schema: FeatureSchema

    def output_names(self) -> list[str]:
        names = []
        for feat in self.input_schema.features:
            if feat.kind == NUMERIC:
                names.append(feat.name)
            else:
                names.extend(f"{feat.name}={c}" for c in self.categories[feat.name][1:])
        return names


def fit_onehot(train: Dataset) -> EncoderState:
    cats = {}
    for feat, col in zip(train.schema.features, train.columns):
        if feat.kind == CATEGORICAL:
            cats[feat.name] = tuple(sorted({v for v in col if v is not None}))
    return EncoderState(cats, train.schema)


def apply_onehot(state: EncoderState | None, ds: Dataset) -> Dataset:
    """Expand each categorical feature into ``c - 1`` indicator columns.

    Unseen categories encode like the baseline (all zeros); a missing cell
    makes every indicator of that feature missing.
    """
    if state is None:
        raise NotFitted("encoder has not been fitted")
    if ds.schema.names != state.input_schema.names:
        raise TypeMismatch("dataset columns differ from the columns the encoder was fitted on")
    columns = []
    for feat, col in zip(ds.schema.features, ds.columns):
        if feat.kind == NUMERIC:
            columns.append(col)
            continue
        missing = np.array([v is None for v in col], dtype=bool)
        for cat in state.categories[feat.name][1:]:
            ind = np.array([v == cat for v in col], dtype=np.float64)
            ind[missing] = np.nan
            columns.append(ind)
    schema = FeatureSchema(ds.schema.dataset_id, tuple(Feature(n, NUMERIC) for n in state.output_names()),
                           ds.schema.label_column)
    return Dataset(schema, columns, ds.labels, ds.metadata)


@dataclass(frozen=True)
class ScalerState:
    names: tuple
    mins: np.ndarray
    maxs: np.ndarray


def fit_minmax(train: Dataset) -> ScalerState:
    X = train.to_matrix()
    with np.errstate(all="ignore"):
        observed = ~np.isnan(X)
        mins = np.where(observed.any(axis=0), np.nanmin(np.where(observed, X, np.inf), axis=0), 0.0)
        maxs = np.where(observed.any(axis=0), np.nanmax(np.where(observed, X, -np.inf), axis=0), 0.0)
    return ScalerState(tuple(train.feature_names), mins, maxs)


def apply_minmax(state: ScalerState | None, ds: Dataset) -> Dataset:
    """``(x - min) / (max - min)`` with train extremes; constant columns map to 0,
    values outside the train range are not clipped."""
    if state is None:
        raise NotFitted("scaler has not been fitted")
    if tuple(ds.feature_names) != state.names:
        raise TypeMismatch("dataset columns differ from the columns the scaler was fitted on")
    X = ds.to_matrix()
    span = state.maxs - state.mins
    safe = np.where(span > 0, span, 1.0)
    Z = (X - state.mins) / safe
    Z = np.where(span > 0, Z, np.where(np.isnan(X), np.nan, 0.0))
    return Dataset(ds.schema, [Z[:, j] for j in range(Z.shape[1])], ds.labels, ds.metadata)


@dataclass(frozen=True)
class ImputerState:
    reference: np.ndarray
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        self.reference.setflags(write=False)


def fit_imputer(train: Dataset, k: int = 5) -> ImputerState:
    return ImputerState(train.to_matrix().copy(), k)


def nan_euclidean(rows: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Distances over coordinates observed in both vectors, scaled by
    ``sqrt(total / shared)``; ``inf`` when nothing is shared."""
    n_cols = rows.shape[1]
    out = np.empty((rows.shape[0], ref.shape[0]))
    chunk = max(1, 2_000_000 // max(1, ref.size))
    for s in range(0, rows.shape[0], chunk):
        diff = rows[s:s + chunk, None, :] - ref[None, :, :]
        shared = (~np.isnan(diff)).sum(axis=2)
        sq = np.nansum(diff * diff, axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.sqrt(sq * n_cols / shared)
        d[shared == 0] = np.inf
        out[s:s + chunk] = d
    return out


def knn_impute(state: ImputerState | None, ds: Dataset) -> Dataset:
    """Fill each missing cell with the mean of the ``k`` nearest reference rows
    that observe that column; ties go to the lower reference index."""
    if state is None:
        raise NotFitted("imputer has not been fitted")
    X = ds.to_matrix()
    ref = state.reference
    if X.shape[1] != ref.shape[1]:
        raise TypeMismatch("dataset width differs from the imputer reference")
    miss = np.isnan(X)
    if not miss.any():
        return ds
    ref_obs = ~np.isnan(ref)
    for j in np.flatnonzero(miss.any(axis=0)):
        if not ref_obs[:, j].any():
            raise ColumnUnimputable(f"no reference row observes column {ds.feature_names[j]!r}")
    out = X.copy()
    rows = np.flatnonzero(miss.any(axis=1))
    dist = nan_euclidean(X[rows], ref)
    for i, r in enumerate(rows):
        order = np.argsort(dist[i], kind="stable")
        finite = np.isfinite(dist[i][order])
        for j in np.flatnonzero(miss[r]):
            donors = order[ref_obs[order, j] & finite]
            if len(donors) == 0:
                # no donor shares a coordinate with this row: fall back to the column mean
                out[r, j] = np.nanmean(ref[:, j])
            else:
                out[r, j] = ref[donors[: state.k], j].mean()
    return Dataset(ds.schema, [out[:, j] for j in range(out.shape[1])], ds.labels, ds.metadata)


class Preprocessor:
    """Encode, scale and impute, each fitted on the training partition only.

    ``scale=False`` skips min-max scaling (e.g. raw API-call frequencies).
    """

    def __init__(self, k: int = 5, scale: bool = True):
        self.k = k
        self.scale = scale
        self.encoder: EncoderState | None = None
        self.scaler: ScalerState | None = None
        self.imputer: ImputerState | None = None

    def fit(self, train: Dataset) -> "Preprocessor":
        self.encoder = fit_onehot(train)
        enc = apply_onehot(self.encoder, train)
        if self.scale:
            self.scaler = fit_minmax(enc)
            enc = apply_minmax(self.scaler, enc)
        self.imputer = fit_imputer(enc, self.k)
        return self

    def transform(self, ds: Dataset) -> Dataset:
        if self.encoder is None:
            raise NotFitted("preprocessor has not been fitted")
        out = apply_onehot(self.encoder, ds)
        if self.scale:
            out = apply_minmax(self.scaler, out)
        return knn_impute(self.imputer, out)

    def fit_transform(self, train: Dataset) -> Dataset:
        return self.fit(train).transform(train)

    @property
    def output_names(self) -> list[str]:
        if self.encoder is None:
            raise NotFitted("preprocessor has not been fitted")
        return self.encoder.output_names()
