from __future__ import annotations

import csv
import io
import math

import numpy as np
import pytest

from hivqcnn import data, harness, presets
from hivqcnn.harness import HarnessConfig, HarnessError


@pytest.fixture(scope="module")
def snap():
    return data.synthetic_snapshot(30, seed=0)


def quick(**extra) -> HarnessConfig:
    cfg = HarnessConfig()
    for k, v in {"run.seeds": 2, "qcnn.iteration_cap": 4, "nqe.iteration_cap": 10, **extra}.items():
        cfg.set(k, v)
    return cfg


# -- conditions ---------------------------------------------------------------

@pytest.mark.parametrize("arm", harness.NOISE_ARMS)
def test_full_matrix_counts(arm):
    cs = harness.enumerate_conditions(noise_arm=arm)
    assert len(cs) == 55
    assert sum(c.arm == "NQE" for c in cs) == 30 and sum(c.arm == "PCA" for c in cs) == 25
    assert len({c.id for c in cs}) == 55


def test_filters():
    nqe4 = harness.enumerate_conditions(filters=harness.parse_filters(["arm=NQE", "qubits=4"]))
    assert [c.id for c in nqe4] == [f"NQE-{i}" for i in range(1, 16)]
    amp = harness.enumerate_conditions(filters=harness.parse_filters(["embedding=amp", "arm=PCA"]))
    assert amp and all(c.embedding == "amplitude" for c in amp)
    with pytest.raises(HarnessError):
        harness.parse_filters(["colour=red"])
    with pytest.raises(HarnessError):
        harness.enumerate_conditions(filters={"colour": "red"})


def test_condition_params_match_qcnn_totals():
    from hivqcnn import qcnn
    for c in harness.enumerate_conditions():
        assert c.params_total == qcnn.build_qcnn(c.n_qubits, c.ansatz)[1].n_params


def test_noisy_arm_uses_short_budgets():
    assert all(300 <= c.iterations <= 500 for c in harness.enumerate_conditions(noise_arm="noisy") if c.arm == "NQE")


# -- config ---------------------------------------------------------------------

def test_config_round_trip_and_rejection():
    cfg = quick(**{"qcnn.NQE-11.noiseless.learning_rate": 0.01})
    again = harness.parse_config(harness.format_config(cfg))
    assert again.values == cfg.values
    assert harness.parse_config(harness.format_config(cfg, only_overrides=True)).values == cfg.values
    with pytest.raises(HarnessError):
        harness.parse_config("qcnn.bogus=1\n")
    with pytest.raises(HarnessError):
        harness.parse_config("run.seeds=2\nrun.seeds=3\n")
    with pytest.raises(HarnessError):
        harness.parse_config("run.seeds=two\n")


def test_every_published_hyperparameter_addressable():
    cfg = HarnessConfig()
    for c in presets.CONDITIONS:
        assert cfg[f"qcnn.{c.label}.noiseless.iterations"] == c.hyper("noiseless").iterations
    assert cfg["nqe.4q-zz.noiseless.batch_size"] == presets.nqe_preset(4, "zz").batch_size


# -- aggregation / reports -------------------------------------------------------------

def fake_row(accs, cid="NQE-11"):
    cond = harness.enumerate_conditions(filters={"id": cid})[0]
    seeds = [harness.SeedResult(cid, i, "noiseless", 4, "angle", "SU4", 30, a, 0.3, 0.1, 0.9, 0.1, 0.7, 1.5,
                                0.05, True, None) for i, a in enumerate(accs)]
    return harness.aggregate(cond, seeds)


def test_mean_std_recomputable():
    accs = [0.91, 0.93, 0.9, 0.95, 0.92]
    row = fake_row(accs)
    assert abs(row.mean - sum(accs) / 5) < 1e-12
    assert abs(row.std - math.sqrt(sum((a - row.mean) ** 2 for a in accs) / 5)) < 1e-12


def test_reports_consistent(tmp_path):
    rows = [fake_row([0.8, 0.9]), fake_row([0.5, 0.6], "PCA-1")]
    paths = harness.write_reports(rows, tmp_path)
    assert set(paths) == {"csv", "json", "md"} and all(p.is_file() for p in paths.values())
    recs = list(csv.DictReader(io.StringIO(paths["csv"].read_text())))
    assert list(recs[0]) == list(harness.CSV_FIELDS)
    nqe = [r for r in recs if r["condition_id"] == "NQE-11"]
    seed_accs = [float(r["accuracy"]) for r in nqe if r["seed"] != "mean"]
    agg = [r for r in nqe if r["seed"] == "mean"]
    assert len(agg) == 1 and float(agg[0]["accuracy"]) == pytest.approx(np.mean(seed_accs), abs=1e-12)
    assert harness.rows_from_json(paths["json"].read_text()) == rows
    assert "NQE-11" in paths["md"].read_text()


def test_json_round_trip_with_nan():
    row = fake_row([0.7])
    row.seeds[0].td_train_before = math.nan
    again = harness.rows_from_json(harness.rows_to_json([row]))[0]
    assert math.isnan(again.seeds[0].td_train_before)
    assert again.seeds[0].accuracy == 0.7


def test_report_errors(tmp_path):
    with pytest.raises(HarnessError):
        harness.write_reports([], tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises((HarnessError, OSError)):
        harness.write_reports([fake_row([0.5])], blocker / "sub")


# -- execution --------------------------------------------------------------------------

def test_pca_condition_runs_and_checks(snap):
    cond = harness.enumerate_conditions(quick(), filters={"id": "PCA-11"})[0]
    row = harness.run_condition(cond, snap, quick())
    assert len(row.seeds) == 2 and not row.partial
    for s in row.seeds:
        assert 0 <= s.accuracy <= 1
        assert s.td_train_before == s.td_train_after
        assert s.helstrom_ok and s.linear_loss_final >= s.helstrom_bound - harness.HELSTROM_SLACK


def test_condition_deterministic(snap):
    cfg = quick()
    cond = harness.enumerate_conditions(cfg, filters={"id": "NQE-13"})[0]
    harness._NQE_MEMO.clear()
    a = harness.run_condition(cond, snap, cfg)
    harness._NQE_MEMO.clear()
    b = harness.run_condition(cond, snap, cfg)
    for x, y in zip(a.seeds, b.seeds):
        x.wallclock_s = y.wallclock_s = 0.0
    assert a == b


def test_cached_front_end_gives_identical_features(snap, tmp_path):
    cfg = quick()
    harness._NQE_MEMO.clear()
    fresh = harness.train_front_end(snap, cfg, 4, "angle", "noiseless", 0, tmp_path)
    harness._NQE_MEMO.clear()
    cached = harness.train_front_end(snap, cfg, 4, "angle", "noiseless", 0, tmp_path)
    harness._NQE_MEMO.clear()
    retrained = harness.train_front_end(snap, cfg, 4, "angle", "noiseless", 0, None)
    x = harness.snapshot_splits(snap, cfg).x_test
    f = fresh.net.forward(x).tobytes()
    assert cached.net.forward(x).tobytes() == f == retrained.net.forward(x).tobytes()
    assert cached.trace_distance == fresh.trace_distance
    assert len(list(tmp_path.glob("nqe-*.json"))) == 1


def test_noisy_run_checks_contractivity(snap):
    cfg = quick()
    cond = harness.enumerate_conditions(cfg, "noisy", {"id": "PCA-13"})[0]
    row = harness.run_condition(cond, snap, cfg)
    assert all(s.contractive_ok is True for s in row.seeds)


def test_errors_recorded_per_seed(snap, monkeypatch):
    real = harness.qcnn.train_qcnn

    def flaky(*args, **kw):
        if args[4].seed == 1:
            raise ValueError("boom")
        return real(*args, **kw)

    monkeypatch.setattr(harness.qcnn, "train_qcnn", flaky)
    cond = harness.enumerate_conditions(quick(), filters={"id": "PCA-11"})[0]
    row = harness.run_condition(cond, snap, quick())
    assert row.partial and "boom" in row.seeds[1].error and not row.seeds[0].error
    assert row.mean == row.seeds[0].accuracy


def test_run_matrix_matches_run_condition(snap):
    cfg = quick(**{"run.seeds": 1})
    conds = harness.enumerate_conditions(cfg, filters={"id": "PCA-11,PCA-12"})
    rows = harness.run_matrix(conds, snap, cfg, jobs=1)
    assert [r.condition_id for r in rows] == ["PCA-11", "PCA-12"]
    single = harness.run_condition(conds[1], snap, cfg)
    assert rows[1].seeds[0].accuracy == single.seeds[0].accuracy


def test_baseline_runs(snap):
    rows = harness.run_baselines([presets.baseline("C.5", 11), presets.baseline("C.5", 5)], snap,
                                 quick(**{"baseline.C.5.11.iterations": 5}))
    assert [(r.table, r.row) for r in rows] == [("C.5", 11)]   # blank published cells are skipped
    assert len(rows[0].accuracies) == 2
    text = harness.baselines_to_csv(rows)
    assert "C.5" in text
