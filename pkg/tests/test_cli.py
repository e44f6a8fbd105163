import dataclasses
import json

import numpy as np
import pytest

from aquaspec import (
    WavelengthGrid,
    default_config,
    generate_dataset,
    load_pipeline,
    parse_dataset_csv,
    save_dataset,
)
from aquaspec.cli import main
from aquaspec.spectra import Dataset, Sample
from aquaspec.synthgen import config_to_dict

TRAIN_CONFIG = {
    "use_pca": True,
    "k_components": 10,
    "hidden_layers": 1,
    "hidden_units": 64,
    "learning_rate": 5e-3,
    "weight_decay": 1e-6,
    "max_epochs": 1200,
    "patience": 200,
}


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    ds = generate_dataset(default_config(n_samples=80, noise_sigma_au=0.001, seed=17))
    data = root / "data.csv"
    save_dataset(ds, data)
    return root, data, ds


@pytest.fixture(scope="module")
def trained_model(work):
    root, data, _ = work
    cfg_path = root / "train_config.json"
    cfg_path.write_text(json.dumps(TRAIN_CONFIG))
    model = root / "model.json"
    code = main(
        ["train", "--data", str(data), "--config", str(cfg_path),
         "--out", str(model), "--seed", "3"]
    )
    assert code == 0
    return model


class TestGenerate:
    def test_default_config_shape_and_determinism(self, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert main(["generate", "--out", str(out1), "--seed", "4"]) == 0
        assert main(["generate", "--out", str(out2), "--seed", "4"]) == 0
        assert out1.read_bytes() == out2.read_bytes()

        ds = parse_dataset_csv(out1.read_text())
        assert len(ds) == 500
        assert ds.grid.n_channels == 205
        assert len(ds.target_names) == 6

        manifest = json.loads((tmp_path / "a.manifest.json").read_text())
        assert manifest["command"] == "generate"
        assert manifest["seed"] == 4
        assert str(out1) in manifest["outputs"]

    def test_different_seed_changes_output(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["generate", "--out", str(out1), "--seed", "1"])
        main(["generate", "--out", str(out2), "--seed", "2"])
        assert out1.read_bytes() != out2.read_bytes()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = config_to_dict(default_config(n_samples=5))
        cfg["noise_sigma_au"] = -0.5
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(cfg))
        code = main(["generate", "--config", str(bad), "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_io_failure_exits_3(self, tmp_path):
        out = tmp_path / "no" / "such" / "dir" / "x.csv"
        assert main(["generate", "--out", str(out), "--seed", "1"]) == 3


@pytest.fixture(scope="module")
def evaluated(tmp_path_factory):
    root = tmp_path_factory.mktemp("eval")
    ds = generate_dataset(default_config(n_samples=30, noise_sigma_au=0.001, seed=23))
    data = root / "tiny.csv"
    save_dataset(ds, data)
    out_dir = root / "run1"
    code = main(
        ["evaluate", "--data", str(data), "--pca", "on", "--components", "6",
         "--trials", "2", "--seed", "7", "--out-dir", str(out_dir),
         "--max-epochs", "60", "--patience", "30"]
    )
    assert code == 0
    return data, out_dir


class TestEvaluate:
    def test_summary_table_shape(self, evaluated):
        _, out_dir = evaluated
        lines = (out_dir / "summary.csv").read_text().strip().split("\n")
        assert lines[0] == "target,metric,mean,std"
        assert len(lines) == 1 + 6 * 3

    def test_scatter_files_cover_every_sample(self, evaluated):
        _, out_dir = evaluated
        lines = (out_dir / "pred_vs_actual_TOC.csv").read_text().strip().split("\n")
        assert lines[0] == "true,predicted"
        assert len(lines) == 1 + 30

    def test_report_records_protocol(self, evaluated):
        _, out_dir = evaluated
        report = json.loads((out_dir / "report.json").read_text())
        assert report["outer_k"] == 5
        assert report["inner_k"] == 4
        assert report["n_trials"] == 2
        assert len(report["folds"]) == 5
        predicted = [i for fold in report["folds"] for i in fold["test_ids"]]
        assert len(predicted) == 30
        assert len(set(predicted)) == 30

    def test_manifest_written(self, evaluated):
        data, out_dir = evaluated
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["command"] == "evaluate"
        assert str(data) in manifest["input_digests"]

    def test_unlabeled_data_exits_2(self, tmp_path, work):
        _, _, ds = work
        bare = Dataset(
            grid=ds.grid,
            target_names=(),
            samples=tuple(Sample(s.id, s.spectrum) for s in ds.samples),
        )
        data = tmp_path / "unlabeled.csv"
        save_dataset(bare, data)
        code = main(
            ["evaluate", "--data", str(data), "--out-dir", str(tmp_path / "out"),
             "--trials", "2", "--max-epochs", "10"]
        )
        assert code == 2

    def test_corrupt_data_exits_2_listing_issues(self, tmp_path, capsys):
        from aquaspec import serialize_dataset_csv

        ds = generate_dataset(default_config(n_samples=8, seed=2))
        lines = serialize_dataset_csv(ds).split("\n")
        cells = lines[1].split(",")
        cells[1] = "nan"  # poison one absorbance cell
        lines[1] = ",".join(cells)
        data = tmp_path / "poisoned.csv"
        data.write_text("\n".join(lines))
        code = main(
            ["evaluate", "--data", str(data), "--out-dir", str(tmp_path / "out"),
             "--trials", "2", "--max-epochs", "10"]
        )
        assert code == 2
        assert "non-finite" in capsys.readouterr().err


class TestTrain:
    def test_model_loads_and_predicts(self, work, trained_model):
        _, data, ds = work
        model = load_pipeline(trained_model)
        assert model.pca_ is not None
        assert len(model.pca_.explained_variance_) == TRAIN_CONFIG["k_components"]
        X = np.stack([s.spectrum.absorbance for s in ds.samples])
        preds = model.predict(X)
        assert preds.shape == (80, 6)

    def test_provenance_records_trial_config(self, trained_model):
        model = load_pipeline(trained_model)
        assert model.provenance_["trial_config"] == TRAIN_CONFIG

    def test_rerun_is_byte_identical(self, work, tmp_path):
        root, data, _ = work
        cfg_path = root / "train_config.json"
        m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
        for out in (m1, m2):
            code = main(
                ["train", "--data", str(data), "--config", str(cfg_path),
                 "--out", str(out), "--seed", "3"]
            )
            assert code == 0
        assert m1.read_bytes() == m2.read_bytes()

    def test_pca_off_override(self, work, tmp_path):
        root, data, _ = work
        cfg_path = root / "train_config.json"
        out = tmp_path / "nopca.json"
        fast_cfg = dict(TRAIN_CONFIG, max_epochs=60)
        cfg2 = tmp_path / "cfg.json"
        cfg2.write_text(json.dumps(fast_cfg))
        code = main(
            ["train", "--data", str(data), "--config", str(cfg2),
             "--out", str(out), "--seed", "1", "--pca", "off"]
        )
        assert code == 0
        assert json.loads(out.read_text())["pca"] is None

    def test_missing_targets_exits_2(self, work, tmp_path):
        _, _, ds = work
        bare = Dataset(
            grid=ds.grid,
            target_names=(),
            samples=tuple(Sample(s.id, s.spectrum) for s in ds.samples),
        )
        data = tmp_path / "unlabeled.csv"
        save_dataset(bare, data)
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(TRAIN_CONFIG))
        code = main(
            ["train", "--data", str(data), "--config", str(cfg),
             "--out", str(tmp_path / "m.json")]
        )
        assert code == 2

    def test_unknown_config_field_exits_2(self, work, tmp_path):
        _, data, _ = work
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"hidden_units": 10, "bogus": 1}))
        code = main(
            ["train", "--data", str(data), "--config", str(cfg),
             "--out", str(tmp_path / "m.json")]
        )
        assert code == 2


class TestPredict:
    def test_predictions_and_metrics_on_training_data(self, work, trained_model, tmp_path):
        _, data, ds = work
        out = tmp_path / "preds.csv"
        code = main(
            ["predict", "--model", str(trained_model), "--data", str(data),
             "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("id,pred:TOC,pred:calcium")
        assert len(lines) == 1 + 80

        manifest = json.loads((tmp_path / "preds.manifest.json").read_text())
        for target, entry in manifest["metrics"].items():
            assert entry["r2"] > 0.9, f"{target} fit too poor: {entry}"

    def test_unlabeled_input_gives_predictions_only(self, work, trained_model, tmp_path):
        _, _, ds = work
        bare = Dataset(
            grid=ds.grid,
            target_names=(),
            samples=tuple(Sample(s.id, s.spectrum) for s in ds.samples[:6]),
        )
        data = tmp_path / "unlabeled.csv"
        save_dataset(bare, data)
        out = tmp_path / "preds.csv"
        code = main(
            ["predict", "--model", str(trained_model), "--data", str(data),
             "--out", str(out)]
        )
        assert code == 0
        manifest = json.loads((tmp_path / "preds.manifest.json").read_text())
        assert "metrics" not in manifest

    def test_grid_mismatch_exits_2_naming_both(self, trained_model, tmp_path, capsys):
        cfg = dataclasses.replace(
            default_config(n_samples=4, seed=1),
            grid=WavelengthGrid(210.0, 2.0, 204),
        )
        ds = generate_dataset(cfg)
        data = tmp_path / "short.csv"
        save_dataset(ds, data)
        code = main(
            ["predict", "--model", str(trained_model), "--data", str(data),
             "--out", str(tmp_path / "p.csv")]
        )
        assert code == 2
        err = capsys.readouterr().err
        assert "204" in err and "205" in err


@pytest.fixture(scope="module")
def explained(work, trained_model, tmp_path_factory):
    _, data, _ = work
    out_dir = tmp_path_factory.mktemp("shap")
    code = main(
        ["explain", "--model", str(trained_model), "--data", str(data),
         "--instances", "s0001,s0002", "--samples", "256", "--seed", "5",
         "--out-dir", str(out_dir)]
    )
    assert code == 0
    return out_dir


class TestExplain:
    def test_summary_covers_every_wavelength_per_target(self, explained):
        lines = (explained / "summary_shap.csv").read_text().strip().split("\n")
        assert lines[0] == "wavelength_nm,target,mean_abs_phi"
        assert len(lines) == 1 + 205 * 6

    def test_per_instance_outputs_and_local_accuracy(self, explained):
        lines = (explained / "shap_s0001.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 205 * 6
        sidecar = json.loads((explained / "shap_s0001.json").read_text())
        for target, err in sidecar["local_accuracy_error"].items():
            bound = 1e-4 * max(1.0, abs(sidecar["prediction"][target]))
            assert err <= bound

    def test_rerun_is_byte_identical(self, work, trained_model, explained, tmp_path):
        _, data, _ = work
        again = tmp_path / "again"
        code = main(
            ["explain", "--model", str(trained_model), "--data", str(data),
             "--instances", "s0001,s0002", "--samples", "256", "--seed", "5",
             "--out-dir", str(again)]
        )
        assert code == 0
        assert (again / "summary_shap.csv").read_bytes() == (
            explained / "summary_shap.csv"
        ).read_bytes()

    def test_unknown_instance_exits_2(self, work, trained_model, tmp_path):
        _, data, _ = work
        code = main(
            ["explain", "--model", str(trained_model), "--data", str(data),
             "--instances", "nope", "--samples", "256",
             "--out-dir", str(tmp_path / "x")]
        )
        assert code == 2


class TestUsageErrors:
    def test_missing_required_flag(self):
        assert main(["evaluate"]) == 2

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 2
