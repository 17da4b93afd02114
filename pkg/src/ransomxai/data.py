"""Datasets, feature schemas, CSV ingestion, stratified splitting and the
synthetic generator used throughout the test-suite.

Numeric columns are stored as ``float64`` arrays with ``nan`` marking a
missing cell; categorical columns are ``object`` arrays holding ``str`` or
``None``. Labels are integer family indices (``c3`` is stored as ``3``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._random import rng_for
from .errors import (
    ClassTooSmall,
    FoldTooSmall,
    InvalidSpec,
    MissingColumn,
    TypeMismatch,
    UnknownLabel,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class FamilyLabel:
    index: int
    code: str
    name: str


_FAMILY_NAMES = (
    "Cerber",
    "CryptoLocker",
    "CryptoWall",
    "Eris",
    "Hive",
    "Jigsaw",
    "Locky",
    "Maze",
    "Mole",
    "Sage",
    "Satan",
    "Shade",
    "TeslaCrypt",
    "Virlock",
    "WannaCry",
)

FAMILIES = tuple(FamilyLabel(i, f"c{i}", n) for i, n in enumerate(_FAMILY_NAMES))
_FAMILY_LOOKUP = {}
for _f in FAMILIES:
    _FAMILY_LOOKUP[_f.code] = _f
    _FAMILY_LOOKUP[_f.name.lower()] = _f


def family(value) -> FamilyLabel:
    """Resolve an index, code (``"c7"``) or name (``"Maze"``) to a label."""
    if isinstance(value, FamilyLabel):
        return value
    if isinstance(value, (int, np.integer)):
        if 0 <= value < len(FAMILIES):
            return FAMILIES[int(value)]
        raise UnknownLabel(f"no family with index {value}")
    key = str(value).strip()
    found = _FAMILY_LOOKUP.get(key) or _FAMILY_LOOKUP.get(key.lower())
    if found is None:
        raise UnknownLabel(f"unknown family {value!r}")
    return found


def label_code(index: int) -> str:
    return f"c{int(index)}"


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = NUMERIC


@dataclass(frozen=True)
class FeatureSchema:
    dataset_id: str | None
    features: tuple[Feature, ...]
    label_column: str = "family"

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise InvalidSpec(f"duplicate feature names: {dup}")
        for f in self.features:
            if f.kind not in (NUMERIC, CATEGORICAL):
                raise InvalidSpec(f"feature {f.name!r} has unknown kind {f.kind!r}")
        if self.label_column in names:
            raise InvalidSpec(f"label column {self.label_column!r} clashes with a feature")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def kinds(self) -> list[str]:
        return [f.kind for f in self.features]

    @property
    def categorical(self) -> list[str]:
        return [f.name for f in self.features if f.kind == CATEGORICAL]

    @property
    def numeric(self) -> list[str]:
        return [f.name for f in self.features if f.kind == NUMERIC]

    def __len__(self):
        return len(self.features)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise MissingColumn(f"no feature named {name!r}") from None

    @classmethod
    def numeric_only(cls, names: Iterable[str], dataset_id=None, label_column="family"):
        return cls(dataset_id, tuple(Feature(n, NUMERIC) for n in names), label_column)


DATA1_FEATURES = (
    "FindWindowExW", "LdrGetDllHandle", "NtAdjustPrivilegesToken", "NtAlertThread",
    "NtAllocateVirtualMemory", "NtAlpcSendWaitReceivePort", "NtConnectPort", "NtCreateEvent",
    "NtCreateFile", "NtCreateKey", "NtCreateKeyEx", "NtCreateMutant", "NtCreateSection",
    "NtCreateThreadEx", "NtCreateUserProcess", "NtDelayExecution", "NtDeleteValueKey",
    "NtDeviceIoControlFile", "NtEnumerateKey", "NtEnumerateValueKey", "NtFsControlFile",
    "NtGetContextThread", "NtMapViewOfSection", "NtNotifyChangeKey", "NtOpenDirectoryObject",
    "NtOpenEvent", "NtOpenFile", "NtOpenKey", "NtOpenKeyEx", "NtOpenMutant", "NtOpenProcess",
    "NtOpenProcessToken", "NtOpenSection", "NtOpenThreadToken", "NtProtectVirtualMemory",
    "NtQueryAttributesFile", "NtQueryDefaultLocale", "NtQueryDirectoryFile",
    "NtQueryInformationFile", "NtQueryInformationProcess", "NtQueryInformationToken",
    "NtQueryKey", "NtQueryObject", "NtQuerySystemInformation", "NtQueryValueKey",
    "NtQueryVirtualMemory", "NtQueryVolumeInformationFile", "NtReadFile", "NtReadVirtualMemory",
    "NtRequestWaitReplyPort", "NtResumeThread", "NtSetContextThread", "NtSetInformationFile",
    "NtSetInformationKey", "NtSetInformationProcess", "NtSetInformationThread",
    "NtSetSecurityObject", "NtSetValueKey", "NtTerminateProcess", "NtTerminateThread",
    "NtUnmapViewOfSection", "NtWaitForMultipleObjects", "NtWriteFile", "NtWriteVirtualMemory",
    "NtYieldExecution", "OpenSCManager", "OpenServiceW", "SetWindowsHookEx",
)

# (name, kind) in capture-table order; eleven categorical, seven numeric.
DATA2_FEATURES = (
    ("IP and port of the client", CATEGORICAL),
    ("IP and port of the server", CATEGORICAL),
    ("Bytes sent from the client to the server", CATEGORICAL),
    ("Bytes sent from the server to the client", CATEGORICAL),
    ("RSTs in the TCP connection from client to server", NUMERIC),
    ("RSTs in the TCP connection from server to client", NUMERIC),
    ("FINs in the TCP connection from client to server", NUMERIC),
    ("FINs in the TCP connection from server to client", NUMERIC),
    ("Number of HTTP requests present in the connection", NUMERIC),
    ("HTTP method (GET or POST) of the HTTP requests", CATEGORICAL),
    ("Response code to the HTTP requests", CATEGORICAL),
    ("URL requested in the HTTP request", CATEGORICAL),
    ("Timestamp of the DNS request", NUMERIC),
    ("IP and port of the client in the DNS request", CATEGORICAL),
    ("IP and port of the DNS server", CATEGORICAL),
    ("RCode of the DNS response", NUMERIC),
    ("DNS request", CATEGORICAL),
    ("DNS response", CATEGORICAL),
)

DATA1_SCHEMA = FeatureSchema("Data1", tuple(Feature(n, NUMERIC) for n in DATA1_FEATURES))
DATA2_SCHEMA = FeatureSchema("Data2", tuple(Feature(n, k) for n, k in DATA2_FEATURES))

SCHEMAS = {"Data1": DATA1_SCHEMA, "Data2": DATA2_SCHEMA}


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Dataset:
    """Column store of numeric/categorical cells plus one family label per row.

    Instances are treated as immutable: the arrays are flagged read-only and
    every transform returns a new ``Dataset``.
    """

    def __init__(self, schema: FeatureSchema, columns: Sequence, labels, metadata=None):
        if len(columns) != len(schema):
            raise TypeMismatch(
                f"schema has {len(schema)} features but {len(columns)} columns were given"
            )
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        cols = []
        for feat, col in zip(schema.features, columns):
            if feat.kind == NUMERIC:
                arr = np.array(col, dtype=np.float64).reshape(-1)
            else:
                arr = np.empty(len(col), dtype=object)
                for i, v in enumerate(col):
                    if v is None or (isinstance(v, float) and math.isnan(v)):
                        arr[i] = None
                    elif isinstance(v, str):
                        arr[i] = v
                    else:
                        raise TypeMismatch(
                            f"categorical column {feat.name!r} row {i}: non-string value {v!r}"
                        )
            if len(arr) != len(labels):
                raise TypeMismatch(
                    f"column {feat.name!r} has {len(arr)} rows, labels have {len(labels)}"
                )
            cols.append(_freeze(arr))
        self.schema = schema
        self.columns = tuple(cols)
        self.labels = _freeze(labels)
        self.metadata = dict(metadata or {})

    @classmethod
    def from_matrix(cls, X, labels, names=None, dataset_id=None, metadata=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise TypeMismatch("matrix must be two-dimensional")
        if names is None:
            names = [f"f{j}" for j in range(X.shape[1])]
        schema = FeatureSchema.numeric_only(names, dataset_id=dataset_id)
        return cls(schema, [X[:, j] for j in range(X.shape[1])], labels, metadata)

    # ---- shape ----
    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return len(self.schema)

    def __len__(self):
        return self.n_rows

    @property
    def feature_names(self) -> list[str]:
        return self.schema.names

    @property
    def label_codes(self) -> list[str]:
        return [label_code(i) for i in self.labels]

    @property
    def is_numeric(self) -> bool:
        return all(k == NUMERIC for k in self.schema.kinds)

    def column(self, name: str) -> np.ndarray:
        return self.columns[self.schema.index(name)]

    def missing_mask(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_features), dtype=bool)
        for j, (feat, col) in enumerate(zip(self.schema.features, self.columns)):
            if feat.kind == NUMERIC:
                out[:, j] = np.isnan(col)
            else:
                out[:, j] = np.array([v is None for v in col], dtype=bool)
        return out

    def has_missing(self) -> bool:
        return bool(self.missing_mask().any())

    def to_matrix(self) -> np.ndarray:
        """Dense float matrix (rows x features); requires an all-numeric schema."""
        if not self.is_numeric:
            raise TypeMismatch(f"categorical columns present: {self.schema.categorical}")
        if self.n_features == 0:
            return np.zeros((self.n_rows, 0))
        return np.column_stack(self.columns)

    # ---- derived datasets ----
    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.schema, [c[rows] for c in self.columns], self.labels[rows], self.metadata)

    def select(self, names: Sequence[str]) -> "Dataset":
        idx = [self.schema.index(n) for n in names]
        schema = FeatureSchema(None, tuple(self.schema.features[j] for j in idx), self.schema.label_column)
        return Dataset(schema, [self.columns[j] for j in idx], self.labels, self.metadata)

    def equals(self, other: "Dataset") -> bool:
        if self.schema != other.schema or not np.array_equal(self.labels, other.labels):
            return False
        for feat, a, b in zip(self.schema.features, self.columns, other.columns):
            if feat.kind == NUMERIC:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif list(a) != list(b):
                return False
        return True

    def __repr__(self):
        return (
            f"Dataset(id={self.schema.dataset_id!r}, rows={self.n_rows}, "
            f"features={self.n_features}, classes={len(np.unique(self.labels))})"
        )


def concat(datasets: Sequence["Dataset"]) -> "Dataset":
    """Stack datasets sharing one schema, rows in the given order."""
    if not datasets:
        raise InvalidSpec("nothing to concatenate")
    schema = datasets[0].schema
    if any(d.schema != schema for d in datasets[1:]):
        raise TypeMismatch("datasets have different schemas")
    cols = [np.concatenate([d.columns[j] for d in datasets]) for j in range(len(schema))]
    return Dataset(schema, cols, np.concatenate([d.labels for d in datasets]))


# ---------------------------------------------------------------- CSV


def load_csv(path, schema: FeatureSchema, label_column: str | None = None) -> Dataset:
    """Read a header-first CSV into a :class:`Dataset` validated against ``schema``.

    Empty fields and the literal ``NA`` are missing cells. Labels may be
    family codes (``c0``..``c14``) or family names.
    """
    label_column = label_column or schema.label_column
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: no header row") from None
        pos = {name: i for i, name in enumerate(header)}
        expected = schema.names + [label_column]
        for name in expected:
            if name not in pos:
                raise MissingColumn(f"{path}: column {name!r} not in header")
        extra = [h for h in header if h not in set(expected)]
        if extra:
            raise MissingColumn(f"{path}: unexpected columns {extra}")

        cols: list[list] = [[] for _ in schema.features]
        labels = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TypeMismatch(f"{path} line {lineno}: expected {len(header)} fields, got {len(row)}")
            for j, feat in enumerate(schema.features):
                tok = row[pos[feat.name]]
                if tok in MISSING_TOKENS:
                    cols[j].append(np.nan if feat.kind == NUMERIC else None)
                elif feat.kind == NUMERIC:
                    try:
                        cols[j].append(float(tok))
                    except ValueError:
                        raise TypeMismatch(
                            f"{path} line {lineno}, column {feat.name!r}: non-numeric token {tok!r}"
                        ) from None
                else:
                    cols[j].append(tok)
            raw = row[pos[label_column]]
            try:
                labels.append(family(raw).index)
            except UnknownLabel:
                raise UnknownLabel(f"{path} line {lineno}: unknown family {raw!r}") from None
    return Dataset(schema, cols, labels)


def _fmt_number(v: float) -> str:
    if math.isnan(v):
        return ""
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_csv(ds: Dataset, path) -> None:
    """Write ``ds`` so that :func:`load_csv` reads back an equal dataset."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.schema.names + [ds.schema.label_column])
        for r in range(ds.n_rows):
            row = []
            for feat, col in zip(ds.schema.features, ds.columns):
                v = col[r]
                if feat.kind == NUMERIC:
                    row.append(_fmt_number(float(v)))
                else:
                    row.append("" if v is None else v)
            row.append(label_code(ds.labels[r]))
            w.writerow(row)


# ---------------------------------------------------------------- splitting


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(ds_or_labels, test_fraction: float = 0.2, seed: int = 0) -> SplitIndices:
    """Per-class shuffled split with ``round(test_fraction * n_c)`` test rows per class."""
    if not 0.0 < test_fraction < 1.0:
        raise InvalidSpec("test_fraction must lie in (0, 1)")
    y = ds_or_labels.labels if isinstance(ds_or_labels, Dataset) else np.asarray(ds_or_labels)
    train, test = [], []
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        n = len(members)
        if n < 2:
            raise ClassTooSmall(f"class {label_code(c)} has {n} row(s); at least 2 are needed")
        n_test = min(max(_round_half_up(test_fraction * n), 1), n - 1)
        perm = rng_for(seed, "split", int(c)).permutation(members)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return SplitIndices(
        np.sort(np.concatenate(train)) if train else np.zeros(0, dtype=np.int64),
        np.sort(np.concatenate(test)) if test else np.zeros(0, dtype=np.int64),
        int(seed),
    )


def stratified_kfold(y, n_folds: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold partition as a list of ``(train_idx, val_idx)`` pairs."""
    y = np.asarray(y)
    if n_folds < 2:
        raise InvalidSpec("need at least 2 folds")
    fold_of = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if len(members) < n_folds:
            raise FoldTooSmall(
                f"class {label_code(c)} has {len(members)} rows, fewer than {n_folds} folds"
            )
        perm = rng_for(seed, "kfold", int(c)).permutation(members)
        fold_of[perm] = (offset + np.arange(len(perm))) % n_folds
        offset += len(perm)
    return [(np.flatnonzero(fold_of != k), np.flatnonzero(fold_of == k)) for k in range(n_folds)]


# ---------------------------------------------------------------- synthetic data


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int
    rows_per_class: int
    n_informative: int
    n_noise: int
    n_categorical: int = 0
    cardinalities: tuple = ()
    missing_rate: float | tuple = 0.0
    class_sep: float = 3.0
    feature_names: tuple | None = None
    dataset_id: str | None = None
    shuffle_columns: bool = True


def synth_generate(spec: SynthSpec, seed: int = 0) -> Dataset:
    """Gaussian class blobs on the informative columns, class-independent noise
    elsewhere, and class-dependent categorical columns.

    The positions of the informative numeric columns are stored in
    ``metadata["informative"]``.
    """
    if spec.n_classes < 1 or spec.rows_per_class < 1:
        raise InvalidSpec("need at least one class and one row per class")
    if min(spec.n_informative, spec.n_noise, spec.n_categorical) < 0:
        raise InvalidSpec("feature counts must be non-negative")
    cards = tuple(spec.cardinalities) or (3,) * spec.n_categorical
    if len(cards) != spec.n_categorical or any(c < 1 for c in cards):
        raise InvalidSpec("cardinalities must give one positive value per categorical feature")

    n_num = spec.n_informative + spec.n_noise
    n_feat = n_num + spec.n_categorical
    if isinstance(spec.missing_rate, (int, float)):
        rates = [float(spec.missing_rate)] * n_feat
    else:
        rates = [float(r) for r in spec.missing_rate]
        if len(rates) != n_feat:
            raise InvalidSpec(f"missing_rate needs {n_feat} entries")
    if any(not 0.0 <= r <= 1.0 for r in rates):
        raise InvalidSpec("missing rates must lie in [0, 1]")

    rng = rng_for(seed, "synth")
    n = spec.n_classes * spec.rows_per_class
    y = np.repeat(np.arange(spec.n_classes), spec.rows_per_class)

    centers = rng.normal(0.0, spec.class_sep, size=(spec.n_classes, spec.n_informative))
    informative = centers[y] + rng.normal(size=(n, spec.n_informative))
    noise = rng.normal(0.0, 1.0, size=(n, spec.n_noise))
    numeric = np.hstack([informative, noise])
    # output column j holds source column src_of[j]; sources below n_informative are informative
    src_of = rng.permutation(n_num) if spec.shuffle_columns else np.arange(n_num)
    numeric = numeric[:, src_of]
    informative_idx = [int(j) for j in np.flatnonzero(src_of < spec.n_informative)]

    columns: list = [numeric[:, j].copy() for j in range(n_num)]
    for card in cards:
        probs = rng.dirichlet(np.full(card, 0.5), size=spec.n_classes)
        u = rng.random(n)
        draws = (u[:, None] > np.cumsum(probs[y], axis=1)).sum(axis=1)
        draws = np.minimum(draws, card - 1)
        columns.append(np.array([f"v{d}" for d in draws], dtype=object))

    for j, rate in enumerate(rates):
        if rate <= 0.0:
            continue
        mask = rng.random(n) < rate
        if j < n_num:
            columns[j][mask] = np.nan
        else:
            columns[j][mask] = None

    if spec.feature_names is not None:
        names = list(spec.feature_names)
        if len(names) != n_feat:
            raise InvalidSpec(f"feature_names needs {n_feat} entries")
    else:
        names = [f"f{j}" for j in range(n_num)] + [f"cat{j}" for j in range(spec.n_categorical)]
    kinds = [NUMERIC] * n_num + [CATEGORICAL] * spec.n_categorical
    schema = FeatureSchema(spec.dataset_id, tuple(Feature(a, k) for a, k in zip(names, kinds)))
    return Dataset(schema, columns, y, metadata={"informative": informative_idx, "seed": int(seed)})


def synth_data1_like(seed: int = 0, rows_per_class: int = 100, n_informative: int = 10,
                     class_sep: float = 1.5) -> Dataset:
    """Fifteen-family, 68-column synthetic stand-in carrying the API-call names."""
    spec = SynthSpec(15, rows_per_class, n_informative, 68 - n_informative,
                     class_sep=class_sep, feature_names=DATA1_FEATURES, dataset_id="Data1")
    return synth_generate(spec, seed)


def synth_data2_like(seed: int = 0, rows_per_class: int = 40, missing_rate: float = 0.05,
                     class_sep: float = 1.5, cardinality: int = 4) -> Dataset:
    """Fifteen-family synthetic stand-in with the 18 network-traffic columns
    (11 categorical, 7 numeric) and random missing cells."""
    numeric_names = [n for n, k in DATA2_FEATURES if k == NUMERIC]
    cat_names = [n for n, k in DATA2_FEATURES if k == CATEGORICAL]
    spec = SynthSpec(15, rows_per_class, 4, 3, n_categorical=11,
                     cardinalities=(cardinality,) * 11, missing_rate=missing_rate,
                     class_sep=class_sep, feature_names=tuple(numeric_names + cat_names))
    raw = synth_generate(spec, seed)
    by_name = dict(zip(raw.schema.names, raw.columns))
    informative_names = {raw.schema.names[j] for j in raw.metadata["informative"]}
    cols = [by_name[n] for n, _ in DATA2_FEATURES]
    informative = [j for j, (n, _) in enumerate(DATA2_FEATURES) if n in informative_names]
    return Dataset(DATA2_SCHEMA, cols, raw.labels, metadata={"informative": informative, "seed": int(seed)})
