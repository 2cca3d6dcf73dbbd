import numpy as np
import pytest

from dispinn import linalg
from dispinn.errors import ConfigError
from dispinn.experiments import config_path, load_experiment
from dispinn.experiments.cli import main
from dispinn.experiments.runner import (
    ResultTable,
    load_checkpoint,
    prepare,
    run_experiment,
    _train_config,
)
from dispinn.pinn import LossReport
from dispinn.pinn.training import build_network


def fast_spec(experiment="burgers_full", **overrides):
    spec = load_experiment(config_path(experiment))
    return spec.with_overrides(epochs=20, **overrides)


class TestSpecs:
    def test_shipped_configs_load(self):
        for exp_id in (
            "mass_spring_reconstruction",
            "mass_spring_prediction",
            "burgers_full",
            "burgers_reduced",
            "burgers_detached",
        ):
            spec = load_experiment(config_path(exp_id))
            assert spec.experiment_id == exp_id

    def test_defaults_match_published_protocol(self):
        spec = load_experiment(config_path("burgers_full"))
        assert spec.ann.hidden_layers == (124, 64, 24, 8)
        assert spec.ann_learning_rate == 0.006
        assert spec.lstm_learning_rate == 0.1
        assert spec.lstm.hidden_size == 10
        assert spec.lstm.sequence_length == 10
        assert spec.train.epochs == 6000
        assert spec.problem.n_x == 20 and spec.problem.n_t == 100

    def test_mass_spring_defaults(self):
        spec = load_experiment(config_path("mass_spring_reconstruction"))
        assert spec.problem.params.n_steps == 1000
        assert spec.problem.params.dtau == pytest.approx(np.pi / 18)
        assert spec.problem.params.force_coeff == pytest.approx(1.0)

    def test_bad_config(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[experiment]\nid = burgers_full\n[burgers]\nn_x = frog\n")
        with pytest.raises(ConfigError, match="n_x"):
            load_experiment(path)

    def test_unknown_id(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[experiment]\nid = nope\n[burgers]\n")
        with pytest.raises(ConfigError):
            load_experiment(path)


class TestRunner:
    def test_coverage_ann_vs_lstm(self):
        spec = fast_spec()
        prep_ann = prepare(spec.with_overrides(network_kind="ann"))
        assert prep_ann.problem.n_rows == 100
        assert prep_ann.problem.row_offset == 0
        prep_lstm = prepare(spec.with_overrides(network_kind="lstm"))
        assert prep_lstm.problem.n_rows == 90
        assert prep_lstm.problem.row_offset == 9
        assert prep_lstm.problem.anchors == (9,)

    def test_prediction_prefix_pairs(self):
        spec = fast_spec("mass_spring_prediction", eqn_points=50)
        prep = prepare(spec)
        newest = prep.problem.provider.newest
        assert newest.min() == 4 and newest.max() == 49
        spec_lstm = spec.with_overrides(network_kind="lstm")
        newest = prepare(spec_lstm).problem.provider.newest
        assert newest.min() == 13 and newest.max() == 49

    def test_reduced_experiment_targets_are_projected(self):
        spec = fast_spec("burgers_reduced")
        prep = prepare(spec)
        assert prep.basis is not None
        assert prep.problem.targets.shape == (100, 10)
        assert prep.problem.provider.out_dim == 10
        lifted = prep.lift(prep.problem.targets)
        assert np.abs(lifted - prep.reference).max() <= 1e-5

    def test_run_experiment_writes_artifacts(self, tmp_path):
        spec = fast_spec()
        net, report, table, pred = run_experiment(spec, tmp_path / "run")
        for name in ("loss.csv", "predictions.csv", "reference.csv",
                     "metrics.csv", "run.ini"):
            assert (tmp_path / "run" / name).exists()
        loaded = ResultTable.from_csv(tmp_path / "run" / "metrics.csv")
        assert loaded.lookup(metric="max_abs_error")

    def test_checkpoint_roundtrip(self, tmp_path):
        spec = fast_spec()
        net, _, _, _ = run_experiment(spec, tmp_path / "run")
        prep = prepare(spec)
        cfg = _train_config(spec, prep)
        rng = np.random.default_rng(99)
        fresh = build_network(cfg.network, 1, prep.problem.out_dim, rng)
        load_checkpoint(tmp_path / "run" / "checkpoint", fresh)
        for key, val in net.params.tree().items():
            np.testing.assert_array_equal(val, fresh.params.tree()[key])

    def test_idempotent_given_seed(self, tmp_path):
        spec = fast_spec()
        run_experiment(spec, tmp_path / "a")
        run_experiment(spec, tmp_path / "b")
        pred_a = (tmp_path / "a" / "predictions.csv").read_bytes()
        pred_b = (tmp_path / "b" / "predictions.csv").read_bytes()
        assert pred_a == pred_b
        # loss traces match except the wall-time column
        rep_a = LossReport.from_csv(tmp_path / "a" / "loss.csv")
        rep_b = LossReport.from_csv(tmp_path / "b" / "loss.csv")
        np.testing.assert_array_equal(rep_a.mse_data, rep_b.mse_data)
        np.testing.assert_array_equal(rep_a.mse_physics, rep_b.mse_physics)


class TestCli:
    def test_snapshots_shapes(self, tmp_path, capsys):
        assert main(["snapshots", "--config", "burgers_full",
                     "--out", str(tmp_path / "s")]) == 0
        data = linalg.load_matrix_csv(tmp_path / "s" / "snapshots.csv")
        assert data.shape == (20, 100)

    def test_snapshots_mass_spring(self, tmp_path, capsys):
        assert main(["snapshots", "--config", "mass_spring_reconstruction",
                     "--out", str(tmp_path / "s")]) == 0
        data = linalg.load_matrix_csv(tmp_path / "s" / "snapshots.csv")
        assert data.shape == (4, 1000)

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[experiment]\nid = burgers_full\n[burgers]\ndt = -1\n")
        code = main(["snapshots", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "dt" in capsys.readouterr().err

    def test_rom_monotone_report(self, tmp_path, capsys):
        assert main(["rom", "--config", "burgers_full", "--out", str(tmp_path / "r"),
                     "--n-modes", "2,5,10", "--deim-points", "10"]) == 0
        lines = (tmp_path / "r" / "reconstruction_report.csv").read_text().splitlines()
        errors = [float(line.split(",")[1]) for line in lines[1:]]
        assert errors[0] > errors[1] > errors[2]

    def test_rom_rank_error_exits_3(self, tmp_path, capsys):
        code = main(["rom", "--config", "burgers_full", "--out", str(tmp_path / "r"),
                     "--n-modes", "10", "--deim-points", "19"])
        assert code == 2  # reported as a configuration problem
        assert "rank" in capsys.readouterr().err

    def test_train_zero_epochs(self, tmp_path, capsys):
        code = main(["train", "--config", "burgers_full", "--out", str(tmp_path / "t"),
                     "--epochs", "0"])
        assert code == 0
        assert (tmp_path / "t" / "checkpoint" / "manifest.ini").exists()
        table = ResultTable.from_csv(tmp_path / "t" / "metrics.csv")
        assert table.lookup(metric="max_abs_error")

    def test_train_and_export_plots(self, tmp_path, capsys):
        out = tmp_path / "t"
        assert main(["train", "--config", "burgers_full", "--out", str(out),
                     "--epochs", "15"]) == 0
        assert main(["export-plots", str(out)]) == 0
        header = (out / "plotdata" / "error_field.csv").read_text().splitlines()[0]
        assert header == "step,component,predicted,reference,abs_error"
        assert (out / "plotdata" / "loss_curves.csv").exists()

    def test_export_plots_missing_dir(self, tmp_path, capsys):
        assert main(["export-plots", str(tmp_path / "missing")]) == 2

    def test_reproduce_unknown_table(self, tmp_path, capsys):
        with pytest.raises(SystemExit):
            main(["reproduce", "table9", "--out", str(tmp_path)])

    def test_reproduce_table2_quick(self, tmp_path, capsys):
        assert main(["reproduce", "table2", "--out", str(tmp_path), "--epochs", "10"]) == 0
        table = ResultTable.from_csv(tmp_path / "table2" / "result_table.csv")
        dis = table.lookup(network="ann", metric="max_abs_error", data_points=1)
        assert len(dis) == 2  # physics and data-only variants
        summary = (tmp_path / "table2" / "summary.md").read_text()
        assert "published" in summary

    def test_reproduce_versions_output(self, tmp_path, capsys):
        main(["reproduce", "table2", "--out", str(tmp_path), "--epochs", "5"])
        main(["reproduce", "table2", "--out", str(tmp_path), "--epochs", "5"])
        assert (tmp_path / "table2").exists()
        assert (tmp_path / "table2_v2").exists()

    def test_train_detached_flag(self, tmp_path, capsys):
        assert main(["train", "--config", "burgers_detached", "--out",
                     str(tmp_path / "d"), "--epochs", "12",
                     "--jacobian-interval", "4"]) == 0
        report = LossReport.from_csv(tmp_path / "d" / "loss.csv")
        assert np.all(np.isfinite(report.l_dis))
