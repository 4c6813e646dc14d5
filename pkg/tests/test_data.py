from __future__ import annotations

import os
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hivqcnn import data
from hivqcnn.data import SequenceRecord


def rec(o, l, s=""):
    return SequenceRecord(o, l, s)


# -- parsing -----------------------------------------------------------------

def test_parse_example():
    (r,) = data.parse_lines(["AAAKFERQ,-1"])
    assert (r.octamer, r.label) == ("AAAKFERQ", -1)


def test_parse_reports_line_number():
    with pytest.raises(data.DataError, match=":2:"):
        data.parse_lines(["AAAKFERQ,1", "AAAKFERQL,-1"])


@pytest.mark.parametrize("line", ["AAAKFERB,1", "AAAKFERQ,0", "AAAKFERQ", "AAAKFERQ,1,2"])
def test_parse_rejects(line):
    with pytest.raises(data.DataError):
        data.parse_lines([line])


def test_parse_file_and_blank_lines(tmp_path):
    p = tmp_path / "746Data.txt"
    p.write_text("AAAKFERQ,1\n\nCDEFGHIK,-1\n")
    recs = data.parse_dataset_file(p)
    assert [r.label for r in recs] == [1, -1] and recs[0].source == "746"


def test_missing_directory_raises():
    with pytest.raises(data.DatasetMissing):
        data.data_dir("/nonexistent-dir")


# -- merge / balance ---------------------------------------------------------

def test_merge_disjoint_is_concatenation():
    a, b = [rec("AAAAAAAA", 1)], [rec("CCCCCCCC", -1)]
    assert data.merge_and_dedup([a, b]) == a + b


def test_merge_first_occurrence_wins_and_logs_conflict():
    a = [rec("AAAAAAAA", 1, "746")]
    b = [rec("AAAAAAAA", 1, "1625"), rec("AAAAAAAA", -1, "impens")]
    conflicts = []
    out = data.merge_and_dedup([a, b], conflicts)
    assert out == a and len(conflicts) == 1 and conflicts[0][1].source == "impens"


def test_balance_already_balanced_is_identity():
    recs = data.synthetic_records(20, seed=1)
    assert set(data.balance_undersample(recs, 3)) == set(recs)


def test_balance_deterministic_and_counts():
    recs = [rec(o, -1) for o in ("AAAAAAAA", "CCCCCCCC", "DDDDDDDD", "EEEEEEEE")] + [rec("FFFFFFFF", 1)]
    a = data.balance_undersample(recs, 5)
    assert a == data.balance_undersample(recs, 5)
    assert data.class_counts(a) == {-1: 1, 1: 1}
    with pytest.raises(data.DataError):
        data.balance_undersample(recs[:4], 0)


# -- one-hot ------------------------------------------------------------------

def test_one_hot_all_alanine():
    assert np.flatnonzero(data.one_hot("AAAAAAAA")).tolist() == list(range(0, 160, 20))


def test_one_hot_round_trip_thousand():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        s = "".join(data.ALPHABET[i] for i in rng.integers(0, 20, 8))
        v = data.one_hot(s)
        assert v.shape == (160,) and v.sum() == 8
        assert data.decode(v) == s


def test_one_hot_invalid_letter():
    with pytest.raises(data.DataError):
        data.one_hot("AAAAAAAB")


# -- PCA ------------------------------------------------------------------------

def test_pca_exact_subspace_reconstruction():
    rng = np.random.default_rng(1)
    basis = np.linalg.qr(rng.normal(size=(160, 4)))[0]
    x = rng.normal(size=(50, 4)) @ basis.T + rng.normal(size=160)
    m = data.pca_fit(x, 4)
    recon = data.pca_transform(m, x) @ m.components.T + m.mean
    assert np.max(np.abs(recon - x)) < 1e-8


def test_pca_variance_matches_independent_eigensolver():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(80, 12)) * np.linspace(3, 0.5, 12)
    m = data.pca_fit(x, 5)
    proj_var = data.pca_transform(m, x).var(axis=0, ddof=1)
    # oracle: singular values of the centred matrix
    s = np.linalg.svd(x - x.mean(axis=0), compute_uv=False)
    oracle = s[:5] ** 2 / (len(x) - 1)
    assert np.max(np.abs(proj_var - oracle) / oracle) < 1e-8
    assert np.allclose(m.eigenvalues, oracle, rtol=1e-8)


def test_pca_mean_maps_to_zero_and_orthonormal():
    x, _ = data.synthetic_snapshot(40).arrays()
    m = data.pca_fit(x, 8)
    assert np.max(np.abs(data.pca_transform(m, m.mean))) < 1e-12
    assert np.max(np.abs(m.components.T @ m.components - np.eye(8))) < 1e-8
    piv = np.argmax(np.abs(m.components), axis=0)
    assert np.all(m.components[piv, np.arange(8)] > 0)


def test_pca_rank_deficient_warns():
    x = np.tile(np.eye(3)[:2], (5, 1))
    with pytest.warns(RuntimeWarning):
        m = data.pca_fit(x, 3)
    assert m.k == 3


def test_pca_no_test_leakage():
    rng = np.random.default_rng(3)
    train, test = rng.normal(size=(40, 10)), rng.normal(size=(40, 10)) + 2
    m = data.pca_fit(train, 3)
    before = data.pca_transform(m, test)
    test[:] = 99.0                     # mutating the test rows cannot touch the fitted model
    assert np.array_equal(m.mean, train.mean(axis=0))
    assert not np.allclose(data.pca_fit(rng.normal(size=(40, 10)) + 2, 3).components, m.components)
    assert before.shape == (40, 3)


# -- rescale ------------------------------------------------------------------------

def test_rescale_endpoints_constant_and_clamp():
    train = np.array([[0.0, 5.0, 2.0], [4.0, 5.0, -2.0]])
    r = data.FeatureRange.fit(train)
    out = data.rescale_for_embedding(train, "angle", r)
    assert np.allclose(out[:, 0], [0, np.pi]) and np.allclose(out[:, 2], [np.pi, 0])
    assert np.allclose(out[:, 1], np.pi / 2)
    test = data.rescale_for_embedding(np.array([[-10.0, 7.0, 9.0]]), "zz", r)
    assert test[0, 0] == 0 and test[0, 1] == np.pi / 2 and test[0, 2] == np.pi
    assert np.array_equal(data.rescale_for_embedding(train, "amplitude", r), train)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_rescale_range_property(seed):
    rng = np.random.default_rng(seed)
    train = rng.normal(size=(10, 4))
    out = data.rescale_for_embedding(rng.normal(size=(20, 4)) * 3, "angle", data.FeatureRange.fit(train))
    assert np.all((out >= 0) & (out <= np.pi))


# -- splits --------------------------------------------------------------------------

def test_split_sizes_for_published_count():
    y = np.array([1] * 993 + [-1] * 993)
    tr, va, te = data.split_indices(y, 0.2, 0.0, seed=0)
    assert abs(len(tr) - 1588) <= 1 and abs(len(te) - 398) <= 1 and len(va) == 0
    tr, va, te = data.split_indices(y, 0.2, 0.1, seed=0)
    assert len(tr) + len(va) + len(te) == 1986
    assert len(set(tr) | set(va) | set(te)) == 1986


@settings(max_examples=30, deadline=None)
@given(npos=st.integers(10, 200), nneg=st.integers(10, 200), seed=st.integers(0, 100))
def test_split_stratified(npos, nneg, seed):
    y = np.array([1] * npos + [-1] * nneg)
    parts = data.split_indices(y, 0.2, 0.1, seed)
    frac = npos / len(y)
    for idx in parts:
        assert abs(np.sum(y[idx] == 1) - frac * len(idx)) <= 1 + 1e-9


def test_split_deterministic_and_too_small():
    x, y = data.synthetic_snapshot(30).arrays()
    a, b = data.split(x, y, seed=4), data.split(x, y, seed=4)
    assert np.array_equal(a.x_train, b.x_train) and np.array_equal(a.y_test, b.y_test)
    with pytest.raises(data.DataError):
        data.split_indices([1, 1, -1, -1], 0.2, 0.1)


# -- snapshot / export ------------------------------------------------------------------

def test_snapshot_round_trip(tmp_path):
    s = data.synthetic_snapshot(25, seed=2)
    again = data.DatasetSnapshot.load(s.save(tmp_path / "s.json"))
    assert again.records == s.records and again.counts == s.counts and again.origin == "synthetic"


def test_synthetic_deterministic_balanced():
    a, b = data.synthetic_records(50, 9), data.synthetic_records(50, 9)
    assert a == b and data.class_counts(a) == {-1: 50, 1: 50}


def test_export_csv(tmp_path):
    x, y = data.synthetic_snapshot(5).arrays()
    lines = data.export_csv(x, y, tmp_path / "e.csv").read_text().splitlines()
    assert lines[0].startswith("label,f0") and len(lines) == 11
    assert sum(int(v) for v in lines[1].split(",")[1:]) == 8


def test_full_pipeline_on_tiny_files(tmp_path):
    rows = {"746Data.txt": ["AAAAAAAA,1", "CCCCCCCC,-1"],
            "1625Data.txt": ["AAAAAAAA,-1", "DDDDDDDD,-1"],
            "schillingData.txt": ["EEEEEEEE,-1"],
            "impensData.txt": ["FFFFFFFF,1", "GGGGGGGG,-1"]}
    for name, lines in rows.items():
        (tmp_path / name).write_text("\n".join(lines) + "\n")
    s = data.build_snapshot(tmp_path, seed=0)
    assert s.counts == {"parsed": 7, "unique": 6, "negative": 4, "positive": 2, "balanced": 4}
    assert s.conflicts == 1


# -- real data: explicit failure when the files are absent -------------------------------

def test_real_pipeline_counts():
    if not os.environ.get(data.DATA_ENV):
        pytest.fail(f"dataset missing: set {data.DATA_ENV} to the UCI folder")
    t = time.perf_counter()
    lists = data.load_sources()
    assert [len(l) for l in lists] == [746, 1625, 3272, 947]
    s = data.build_snapshot()
    assert s.counts == {"parsed": 6590, "unique": 5840, "negative": 4847, "positive": 993, "balanced": 1986}
    assert time.perf_counter() - t < 5
