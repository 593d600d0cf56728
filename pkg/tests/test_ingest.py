import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfk import ingest
from qfk.errors import DataError


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_numeric(tmp_path):
    ds = ingest.load_csv(write(tmp_path, "time,P1_B2004,attack\n0,1.5,0\n1,1.7,0\n2,1.9,1\n"))
    assert ds.feature_names == ["P1_B2004"]
    assert ds.labels.tolist() == [0, 0, 1]
    assert ds.values["P1_B2004"].tolist() == [1.5, 1.7, 1.9]
    assert ds.kind("P1_B2004") == ingest.NUMERIC


def test_text_column_is_categorical(tmp_path):
    ds = ingest.load_csv(write(tmp_path, "time,pump,attack\n0,on,0\n1,off,0\n"))
    assert ds.kind("pump") == ingest.CATEGORICAL
    assert ds.values["pump"].tolist() == ["on", "off"]


def test_ragged_row(tmp_path):
    with pytest.raises(DataError, match="ragged"):
        ingest.load_csv(write(tmp_path, "time,a,attack\n0,1,0\n1,2\n"))


@pytest.mark.parametrize(
    "text",
    [
        "",
        "time,a,attack\n",
        "t,a,attack\n0,1,0\n",
        "time,a,attack\n0,,0\n",
        "time,a,attack\n0,1,2\n",
        "time,a,attack\n1,1,0\n0,1,0\n",
    ],
)
def test_malformed_inputs(tmp_path, text):
    with pytest.raises(DataError):
        ingest.load_csv(write(tmp_path, text))


def test_iso_timestamps_delimiter_and_drops(tmp_path):
    text = "time;a;attack_P1;attack\n2020-07-11 00:00:00;1;0;0\n2020-07-11 00:00:01;2;1;1\n"
    ds = ingest.load_csv(write(tmp_path, text), delimiter=";", drop_columns=["attack_P1"])
    assert ds.feature_names == ["a"]
    assert ds.timestamps[1] - ds.timestamps[0] == 1.0


def test_unlabelled_and_gzip(tmp_path):
    path = tmp_path / "d.csv.gz"
    with gzip.open(path, "wt") as fh:
        fh.write("time,a\n0,1\n1,2\n")
    ds = ingest.load_csv(path)
    assert ds.labels is None and ds.n_rows == 2


def test_write_load_round_trip(tmp_path):
    ds = ingest.generate_synthetic(50, 20, 3, 2.0, seed=1)
    ingest.write_csv(ds, tmp_path / "s.csv")
    back = ingest.load_csv(tmp_path / "s.csv")
    assert back.feature_names == ds.feature_names
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.timestamps, ds.timestamps)
    for name in ds.feature_names:
        assert np.array_equal(back.values[name], ds.values[name])


def test_synthetic_examples():
    ds = ingest.generate_synthetic(100, 0, 8, 2.0, seed=7)
    assert ds.n_rows == 100 and ds.labels.sum() == 0
    a = ingest.generate_synthetic(100, 50, 8, 2.0, seed=7)
    b = ingest.generate_synthetic(100, 50, 8, 2.0, seed=7)
    assert np.array_equal(a.numeric_matrix(), b.numeric_matrix())
    assert np.array_equal(a.labels, b.labels)
    assert a.labels.sum() == 50


def test_zero_shift_is_indistinguishable():
    base = ingest.generate_synthetic(100, 50, 8, 0.0, seed=7)
    clean = ingest.generate_synthetic(150, 0, 8, 0.0, seed=7)
    # With no shift the anomaly labels carry no signal: the features equal a
    # trace drawn with the same stream and no anomalies requested.
    assert base.labels.sum() == 50
    assert np.allclose(base.numeric_matrix(), clean.numeric_matrix())


def test_shift_moves_labelled_rows():
    ds = ingest.generate_synthetic(600, 300, 8, 3.0, seed=2)
    clean = ingest.generate_synthetic(900, 0, 8, 0.0, seed=2)
    delta = np.abs(ds.numeric_matrix() - clean.numeric_matrix())
    assert np.all(delta[ds.labels == 0] == 0)
    assert np.all(delta[ds.labels == 1].max(axis=1) > 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 400), st.integers(0, 400), st.integers(1, 6), st.integers(0, 2**32))
def test_synthetic_invariants(n_normal, n_anomaly, n_features, seed):
    if n_normal + n_anomaly == 0:
        return
    ds = ingest.generate_synthetic(n_normal, n_anomaly, n_features, 2.0, seed)
    assert ds.n_rows == n_normal + n_anomaly
    assert int(ds.labels.sum()) == n_anomaly
    assert len(ds.feature_names) == n_features
    assert np.all(np.isfinite(ds.numeric_matrix()))
    assert np.all(np.diff(ds.timestamps) > 0)


def labelled(labels):
    labels = np.asarray(labels)
    n = len(labels)
    cols = (ingest.Column("a"),)
    return ingest.RawDataset(np.arange(n, dtype=float), cols, {"a": np.arange(n, dtype=float)}, labels)


def test_split_capacity_error():
    ds = labelled(np.r_[np.zeros(2000, int), np.ones(100, int)])
    spec = ingest.SplitSpec(0.5, True, 1000, 500)
    with pytest.raises(DataError, match="500 anomalous eval rows, only 100"):
        ingest.split(ds, spec)


def test_eval_layout_normals_then_anomalies():
    ds = labelled([0, 0, 1, 0, 1, 0])
    eval_rows, rest = ingest.sample_eval(ds, 2, 1, seed=0)
    assert ds.labels[eval_rows].tolist() == [0, 0, 1]
    assert sorted(np.r_[eval_rows, rest].tolist()) == list(range(6))
    _, ev = ingest.split(labelled([0, 0, 0, 0, 1, 0, 1, 0, 0, 0]), ingest.SplitSpec(0.4, True, 2, 1))
    assert ev.labels.tolist() == [0, 0, 1]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=20, max_size=120), st.floats(0.1, 0.9), st.integers(0, 2**32))
def test_split_disjoint_and_chronological(labels, frac, seed):
    ds = labelled(labels)
    boundary = int(np.floor(frac * len(labels)))
    tail = np.asarray(labels[boundary:])
    spec = ingest.SplitSpec(frac, True, int((tail == 0).sum() // 2), int((tail == 1).sum() // 2), seed)
    train, ev, rest = ingest.split_indices(ds, spec)
    assert not set(train) & set(ev)
    assert not set(ev) & set(rest)
    assert np.all(train < boundary) and np.all(ev >= boundary)
    assert np.all(ds.labels[train] == 0)
    first_anomaly = np.argmax(ds.labels[ev] == 1) if ds.labels[ev].any() else len(ev)
    assert np.all(ds.labels[ev][:first_anomaly] == 0) and np.all(ds.labels[ev][first_anomaly:] == 1)


def test_dataset_validation():
    with pytest.raises(DataError):
        labelled([0, 2])
    with pytest.raises(DataError):
        ingest.RawDataset(np.array([1.0, 0.0]), (ingest.Column("a"),), {"a": np.zeros(2)})
    with pytest.raises(ValueError):
        ingest.SplitSpec(train_fraction=1.0)
