import numpy as np
import pytest
from hypothesis import given, strategies as st

from ransomxai.data import (DATA1_SCHEMA, DATA2_SCHEMA, FAMILIES, Dataset, FeatureSchema, SynthSpec,
                            concat, family, label_code, load_csv, stratified_kfold, stratified_split,
                            synth_data1_like, synth_data2_like, synth_generate, write_csv)
from ransomxai.errors import (ClassTooSmall, FoldTooSmall, InvalidSpec, MissingColumn, TypeMismatch,
                              UnknownLabel)


def test_family_table():
    assert len(FAMILIES) == 15
    assert [f.code for f in FAMILIES] == [f"c{i}" for i in range(15)]
    assert family("c0").name == "Cerber"
    assert family("WannaCry").index == 14
    assert family(7) == family("c7") == family("maze")
    assert len({f.name for f in FAMILIES}) == 15
    assert label_code(3) == "c3"
    with pytest.raises(UnknownLabel):
        family("notafamily")


def test_schemas():
    assert len(DATA1_SCHEMA) == 68
    assert set(DATA1_SCHEMA.kinds) == {"numeric"}
    assert len(set(DATA1_SCHEMA.names)) == 68
    assert len(DATA2_SCHEMA) == 18
    assert len(DATA2_SCHEMA.categorical) == 11
    assert len(DATA2_SCHEMA.numeric) == 7
    assert DATA2_SCHEMA.names[0] == "IP and port of the client"
    assert DATA2_SCHEMA.names[-1] == "DNS response"


def test_dataset_validation():
    schema = FeatureSchema(None, DATA2_SCHEMA.features[:1])
    with pytest.raises(TypeMismatch):
        Dataset(schema, [[1.5]], [0])
    with pytest.raises(TypeMismatch):
        Dataset.from_matrix(np.zeros((3, 2)), [0, 1])
    ds = Dataset.from_matrix(np.zeros((2, 2)), [0, 1])
    with pytest.raises(ValueError):
        ds.columns[0][0] = 1.0


def test_split_counts_exact():
    y = np.repeat(np.arange(15), 100)
    sp = stratified_split(y, 0.2, seed=4)
    assert all(np.sum(y[sp.test] == c) == 20 for c in range(15))
    assert len(sp.train) + len(sp.test) == 1500


def test_split_cerber_95():
    sp = stratified_split(np.zeros(95, dtype=int), 0.2, seed=0)
    assert (len(sp.test), len(sp.train)) == (19, 76)


def test_split_deterministic_and_seeded():
    y = np.repeat(np.arange(3), 17)
    a, b = stratified_split(y, 0.2, 9), stratified_split(y, 0.2, 9)
    assert np.array_equal(a.test, b.test)
    assert not np.array_equal(a.test, stratified_split(y, 0.2, 10).test)


def test_split_class_too_small():
    with pytest.raises(ClassTooSmall):
        stratified_split(np.array([0, 0, 1]), 0.2, 0)


@given(st.lists(st.integers(2, 30), min_size=1, max_size=6), st.floats(0.05, 0.95), st.integers(0, 2**32))
def test_split_invariants(sizes, frac, seed):
    y = np.repeat(np.arange(len(sizes)), sizes)
    sp = stratified_split(y, frac, seed)
    assert np.array_equal(np.sort(np.concatenate([sp.train, sp.test])), np.arange(len(y)))
    assert np.all(np.diff(sp.train) > 0) and np.all(np.diff(sp.test) > 0)
    for c, n in enumerate(sizes):
        assert abs(np.sum(y[sp.test] == c) - round(frac * n)) <= 1
    # re-splitting the train part never reaches a test row
    inner = stratified_kfold(y[sp.train], 2, seed) if min(np.bincount(y[sp.train])) >= 2 else []
    for tr, va in inner:
        assert not set(sp.train[va]) & set(sp.test)
        assert not set(sp.train[tr]) & set(sp.test)


def test_kfold_partitions():
    y = np.repeat(np.arange(4), [5, 6, 7, 10])
    folds = stratified_kfold(y, 5, seed=1)
    seen = np.concatenate([va for _, va in folds])
    assert np.array_equal(np.sort(seen), np.arange(len(y)))
    for tr, va in folds:
        assert not set(tr) & set(va)
    with pytest.raises(FoldTooSmall):
        stratified_kfold(y, 6, 0)


def test_synth_data1_shape():
    spec = SynthSpec(15, 100, 10, 58)
    ds = synth_generate(spec, 0)
    assert (ds.n_rows, ds.n_features) == (1500, 68)
    assert len(ds.metadata["informative"]) == 10
    assert not ds.has_missing()
    assert synth_generate(spec, 0).equals(ds)
    d1 = synth_data1_like(0, rows_per_class=10)
    assert d1.schema == DATA1_SCHEMA


def test_synth_missing_rates():
    spec = SynthSpec(2, 20, 1, 1, n_categorical=1, missing_rate=(0.0, 1.0, 1.0))
    ds = synth_generate(spec, 3)
    m = ds.missing_mask()
    assert not m[:, 0].any() and m[:, 1].all() and m[:, 2].all()
    with pytest.raises(InvalidSpec):
        synth_generate(SynthSpec(0, 10, 1, 1), 0)
    with pytest.raises(InvalidSpec):
        synth_generate(SynthSpec(2, 10, -1, 1), 0)


def test_synth_no_informative_is_class_independent():
    ds = synth_generate(SynthSpec(3, 400, 0, 4), 5)
    X = ds.to_matrix()
    means = np.array([X[ds.labels == c].mean(axis=0) for c in range(3)])
    assert np.abs(means).max() < 0.2


def test_synth_data2_like_schema():
    ds = synth_data2_like(2, rows_per_class=5)
    assert ds.schema == DATA2_SCHEMA
    assert ds.has_missing()


def test_csv_round_trip(tmp_path):
    ds = synth_data2_like(1, rows_per_class=4, missing_rate=0.2)
    p = tmp_path / "d2.csv"
    write_csv(ds, p)
    assert load_csv(p, DATA2_SCHEMA).equals(ds)
    ds1 = synth_data1_like(1, rows_per_class=3)
    write_csv(ds1, tmp_path / "d1.csv")
    assert load_csv(tmp_path / "d1.csv", DATA1_SCHEMA).equals(ds1)


@given(st.lists(st.lists(st.one_of(st.floats(allow_nan=False, allow_infinity=False, width=64),
                                   st.integers(-10**6, 10**6).map(float), st.just(float("nan"))),
                         min_size=2, max_size=2), max_size=12))
def test_numeric_csv_round_trip_property(rows):
    import tempfile, os
    X = np.array(rows, dtype=float).reshape(-1, 2)
    ds = Dataset.from_matrix(X, np.arange(len(X)) % 15, names=["a", "b"])
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "x.csv")
        write_csv(ds, p)
        assert load_csv(p, ds.schema).equals(ds)


def test_csv_header_any_order_and_names(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("family,b,a\nCerber,1,2\nc3,NA,\n")
    ds = load_csv(p, FeatureSchema.numeric_only(["a", "b"]))
    assert ds.labels.tolist() == [0, 3]
    assert ds.column("a")[0] == 2.0 and np.isnan(ds.column("a")[1])
    assert np.isnan(ds.column("b")[1])


def test_csv_empty_body(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text(",".join(DATA1_SCHEMA.names + ["family"]) + "\n")
    ds = load_csv(p, DATA1_SCHEMA)
    assert ds.n_rows == 0 and ds.schema == DATA1_SCHEMA


def test_csv_errors(tmp_path):
    schema = FeatureSchema.numeric_only(["a", "b"])
    p = tmp_path / "x.csv"
    p.write_text("a,family\n1,c0\n")
    with pytest.raises(MissingColumn, match="b"):
        load_csv(p, schema)
    p.write_text("a,b,family\n1,2,c0\n1,2,notafamily\n")
    with pytest.raises(UnknownLabel, match="3"):
        load_csv(p, schema)
    p.write_text("a,b,family\n1,x,c0\n")
    with pytest.raises(TypeMismatch, match="b"):
        load_csv(p, schema)


def test_take_select_concat():
    ds = synth_data2_like(0, rows_per_class=2)
    both = concat([ds.take([0, 1]), ds.take([2])])
    assert both.equals(ds.take([0, 1, 2]))
    sub = ds.select(["DNS request", "RCode of the DNS response"])
    assert sub.feature_names == ["DNS request", "RCode of the DNS response"]
