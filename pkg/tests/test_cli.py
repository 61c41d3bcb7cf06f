import json

import numpy as np
import pytest

from conftest import make_spd
from spdot import datasets
from spdot.cli import main


def write_spd(path, matrices, labels=None):
    datasets.save_spd_dataset(path, matrices, labels)
    return str(path)


def read_csv_matrix(path):
    with open(path) as fh:
        return np.array(
            [[float(v) for v in line.split(",")] for line in fh.read().splitlines()]
        )


def read_report(path):
    with open(path) as fh:
        return json.load(fh)


class TestAdaptCommand:
    def test_self_adaptation_identity_plan(self, tmp_path):
        src = write_spd(tmp_path / "s.json", make_spd(3, 6, seed=1))
        out = tmp_path / "out"
        assert main(["adapt", src, src, "--solver", "exact", "--out", str(out)]) == 0
        plan = read_csv_matrix(out / "plan.csv")
        np.testing.assert_array_equal(plan, np.eye(6) / 6)
        adapted = datasets.load_dataset(out / "adapted.json")
        assert adapted.matrices.shape == (6, 3, 3)

    def test_lambda_auto_echoed(self, tmp_path):
        # dim-5 sets keep the data-driven lambda in the smooth regime
        src = write_spd(tmp_path / "s.json", make_spd(5, 5, seed=2))
        tgt = write_spd(tmp_path / "t.json", make_spd(5, 5, seed=3))
        out = tmp_path / "out"
        assert main(["adapt", src, tgt, "--solver", "sinkhorn", "--lambda", "auto",
                     "--out", str(out)]) == 0
        report = read_report(out / "report.json")
        from spdot import adaptation as ad
        cost = ad.build_cost(make_spd(5, 5, seed=2), make_spd(5, 5, seed=3),
                             "riemannian").values
        m = 0.05 * np.median(cost)
        assert report["lambda_used"] == pytest.approx(1.0 / (2.0 * m * m))
        assert report["plan"]["marginal_residuals"]["source"] <= 1e-6

    def test_labels_missing_exits_2(self, tmp_path):
        src = write_spd(tmp_path / "s.json", make_spd(2, 4, seed=4))
        assert main(["adapt", src, src, "--solver", "sinkhorn-labels",
                     "--out", str(tmp_path / "o")]) == 2

    def test_labels_solver_works_with_labels(self, tmp_path):
        src = write_spd(tmp_path / "s.json", make_spd(2, 4, seed=5), labels=[0, 0, 1, 1])
        tgt = write_spd(tmp_path / "t.json", make_spd(2, 4, seed=6))
        out = tmp_path / "out"
        code = main(["adapt", src, tgt, "--solver", "sinkhorn-labels",
                     "--lambda", "0.5", "--eta", "0.05", "--out", str(out)])
        assert code == 0
        report = read_report(out / "report.json")
        assert report["eta_used"] == pytest.approx(0.05)
        adapted = datasets.load_dataset(out / "adapted.json")
        assert list(adapted.labels) == [0, 0, 1, 1]

    def test_malformed_json_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        src = write_spd(tmp_path / "s.json", make_spd(2, 2, seed=7))
        assert main(["adapt", str(bad), src, "--out", str(tmp_path / "o")]) == 2

    def test_non_spd_record_exits_2(self, tmp_path, capsys):
        payload = {
            "kind": "spd",
            "dim": 2,
            "matrices": [[1.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, -1.0]],
            "labels": None,
        }
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(payload))
        src = write_spd(tmp_path / "s.json", make_spd(2, 2, seed=8))
        assert main(["adapt", str(bad), src, "--out", str(tmp_path / "o")]) == 2
        assert "matrix 1" in capsys.readouterr().err

    def test_dim_mismatch_exits_2(self, tmp_path):
        a = write_spd(tmp_path / "a.json", make_spd(2, 3, seed=9))
        b = write_spd(tmp_path / "b.json", make_spd(3, 3, seed=10))
        assert main(["adapt", a, b, "--out", str(tmp_path / "o")]) == 2

    def test_solver_failure_exits_3_with_step(self, tmp_path, capsys):
        # single identical pair + euclidean metric: zero cost, auto lambda
        # has no scale
        P = make_spd(3, 1, seed=11)
        src = write_spd(tmp_path / "s.json", P)
        code = main(["adapt", src, src, "--solver", "sinkhorn",
                     "--metric", "euclidean", "--out", str(tmp_path / "o")])
        assert code == 3
        assert "plan" in capsys.readouterr().err

    def test_top_k_flag(self, tmp_path):
        src = write_spd(tmp_path / "s.json", make_spd(5, 5, seed=12))
        tgt = write_spd(tmp_path / "t.json", make_spd(5, 5, seed=13))
        out = tmp_path / "out"
        assert main(["adapt", src, tgt, "--solver", "sinkhorn", "--top-k", "2",
                     "--out", str(out)]) == 0
        assert main(["adapt", src, tgt, "--solver", "sinkhorn", "--top-k", "9",
                     "--out", str(out)]) == 2

    def test_report_carries_rerun_information(self, tmp_path):
        src = write_spd(tmp_path / "s.json", make_spd(5, 4, seed=14))
        tgt = write_spd(tmp_path / "t.json", make_spd(5, 4, seed=15))
        out = tmp_path / "out"
        assert main(["adapt", src, tgt, "--solver", "sinkhorn", "--seed", "9",
                     "--out", str(out)]) == 0
        report = read_report(out / "report.json")
        assert report["artifact"]["name"] == "spdot"
        assert report["config"]["seed"] == 9
        assert report["config"]["solver"] == "sinkhorn"
        for path, meta in report["inputs"].items():
            assert len(meta["sha256"]) == 64
        assert set(report["inputs"]) == {src, tgt}

    def test_unknown_flag_exits_2(self, tmp_path):
        assert main(["adapt", "a", "b", "--frobnicate"]) == 2


class TestToyCommands:
    def test_toy_a_csv(self, tmp_path):
        out = tmp_path / "a"
        assert main(["toy-a", "--n", "8", "--grid", "5", "--seed", "7",
                     "--out", str(out)]) == 0
        lines = (out / "toy_a.csv").read_text().splitlines()
        assert lines[0] == "theta,recovery_error,diagonal_mass,objective"
        assert len(lines) == 6
        first = lines[1].split(",")
        assert float(first[0]) == 0.0
        assert float(first[1]) <= 1e-6

    def test_toy_a_deterministic(self, tmp_path):
        for d in ("r1", "r2"):
            assert main(["toy-a", "--n", "6", "--grid", "4", "--seed", "3",
                         "--out", str(tmp_path / d)]) == 0
        assert (tmp_path / "r1" / "toy_a.csv").read_bytes() == (
            tmp_path / "r2" / "toy_a.csv"
        ).read_bytes()

    def test_toy_b_report(self, tmp_path):
        out = tmp_path / "b"
        assert main(["toy-b", "--n", "10", "--grid", "64", "--seed", "1",
                     "--out", str(out)]) == 0
        lines = (out / "toy_b.csv").read_text().splitlines()
        assert lines[0] == "theta,recovery_error,diagonal_mass,objective"
        assert len(lines) == 65
        assert all(row.split(",")[1] == "nan" for row in lines[1:])
        report = read_report(out / "report.json")
        assert 0.0 <= report["best_theta"] < 2 * np.pi
        assert report["best_objective"] <= report["objective_at_zero"]


class TestCosineAndCovariance:
    def test_cosine_outputs(self, tmp_path):
        out = tmp_path / "cos"
        assert main(["cosine", "--n", "6", "--seed", "2", "--out", str(out)]) == 0
        lines = (out / "cosine.csv").read_text().splitlines()
        assert lines[0] == "config,diagonal_mass,objective"
        assert len(lines) == 4
        assert [row.split(",")[0] for row in lines[1:]] == [
            "raw-euclidean",
            "cov-euclidean",
            "cov-riemannian",
        ]
        ts = datasets.load_dataset(out / "source_timeseries.json")
        assert ts.trials.shape == (6, 5, 101)

    def test_covariance_roundtrip(self, tmp_path):
        out = tmp_path / "cos"
        main(["cosine", "--n", "5", "--seed", "4", "--out", str(out)])
        cov_out = tmp_path / "cov"
        assert main(["covariance", str(out / "source_timeseries.json"),
                     "--out", str(cov_out)]) == 0
        ds = datasets.load_dataset(cov_out / "covariances.json")
        assert ds.matrices.shape == (5, 5, 5)

    def test_covariance_rank_deficient_exits_3(self, tmp_path, capsys):
        trials = np.zeros((2, 3, 20))
        trials[0] = np.random.default_rng(5).standard_normal((3, 20))
        path = tmp_path / "ts.json"
        datasets.save_timeseries_dataset(path, trials)
        assert main(["covariance", str(path), "--out", str(tmp_path / "o")]) == 3
        assert "trial 1" in capsys.readouterr().err

    def test_covariance_wrong_kind_exits_2(self, tmp_path):
        src = write_spd(tmp_path / "s.json", make_spd(2, 2, seed=6))
        assert main(["covariance", src, "--out", str(tmp_path / "o")]) == 2

    def test_empty_trials_exit_2(self, tmp_path):
        path = tmp_path / "ts.json"
        path.write_text(json.dumps({
            "kind": "timeseries", "channels": 2, "samples": 5,
            "trials": [], "labels": None,
        }))
        assert main(["covariance", str(path), "--out", str(tmp_path / "o")]) == 2


class TestFullRoundTrip:
    def test_cosine_covariance_adapt(self, tmp_path):
        cos = tmp_path / "cos"
        assert main(["cosine", "--n", "8", "--seed", "11", "--out", str(cos)]) == 0
        cov_s = tmp_path / "cov_s"
        cov_t = tmp_path / "cov_t"
        assert main(["covariance", str(cos / "source_timeseries.json"),
                     "--out", str(cov_s)]) == 0
        assert main(["covariance", str(cos / "target_timeseries.json"),
                     "--out", str(cov_t)]) == 0
        out = tmp_path / "adapted"
        assert main(["adapt", str(cov_s / "covariances.json"),
                     str(cov_t / "covariances.json"),
                     "--solver", "sinkhorn", "--lambda", "auto",
                     "--out", str(out)]) == 0
        adapted = datasets.load_dataset(out / "adapted.json")
        assert adapted.matrices.shape == (8, 5, 5)
        plan = read_csv_matrix(out / "plan.csv")
        assert plan.shape == (8, 8)
        np.testing.assert_allclose(plan.sum(axis=1), 1 / 8, atol=1e-6)

    def test_all_files_reparse(self, tmp_path):
        cos = tmp_path / "cos"
        main(["cosine", "--n", "4", "--seed", "12", "--out", str(cos)])
        datasets.load_dataset(cos / "source_timeseries.json")
        datasets.load_dataset(cos / "target_timeseries.json")
        read_report(cos / "report.json")

    def test_dataset_save_load_bit_exact(self, tmp_path):
        pts = make_spd(3, 4, seed=13)
        path = tmp_path / "d.json"
        datasets.save_spd_dataset(path, pts, labels=[1, 2, 3, 4])
        ds = datasets.load_dataset(path)
        assert np.array_equal(ds.matrices, pts)
        assert list(ds.labels) == [1, 2, 3, 4]
