import json

import numpy as np
import pytest

from aquaspec import (
    SoftSensorPipeline,
    default_config,
    generate_dataset,
    load_pipeline,
    r2,
    split_features_targets,
)
from aquaspec.exceptions import CompatibilityError, ParseError, ShapeError


def fast_pipeline(**overrides):
    params = dict(
        use_pca=True,
        n_components=8,
        hidden_layers=1,
        hidden_units=24,
        learning_rate=5e-3,
        weight_decay=1e-5,
        max_epochs=300,
        patience=80,
        seed=11,
    )
    params.update(overrides)
    return SoftSensorPipeline(**params)


@pytest.fixture(scope="module")
def fitted(small_dataset_module):
    ds = small_dataset_module
    X, Y = split_features_targets(ds)
    pipe = fast_pipeline()
    pipe.fit(X, Y, grid=ds.grid, target_names=ds.target_names)
    return ds, X, Y, pipe


@pytest.fixture(scope="module")
def small_dataset_module():
    return generate_dataset(default_config(n_samples=60, noise_sigma_au=0.001, seed=5))


class TestFit:
    def test_pca_sets_mlp_input_width(self, fitted):
        _, _, _, pipe = fitted
        assert pipe.mlp_.layer_sizes[0] == 8
        assert pipe.pca_ is not None

    def test_without_pca_full_width_and_no_stage(self, small_dataset_module):
        ds = small_dataset_module
        X, Y = split_features_targets(ds)
        pipe = fast_pipeline(use_pca=False, max_epochs=60)
        pipe.fit(X, Y, grid=ds.grid, target_names=ds.target_names)
        assert pipe.pca_ is None
        assert pipe.score_standardizer_ is None
        assert pipe.mlp_.layer_sizes[0] == X.shape[1]

    def test_input_standardizer_uses_training_rows_only(self, rng):
        X = rng.normal(0, 1, (40, 10))
        Y = rng.normal(0, 1, (40, 2))
        Xv = rng.normal(0, 1, (10, 10))
        Yv = rng.normal(0, 1, (10, 2))
        pipe = fast_pipeline(use_pca=True, n_components=4, max_epochs=30)
        pipe.fit(X, Y, X_val=Xv, Y_val=Yv)
        assert np.array_equal(pipe.input_standardizer_.mean_, X.mean(axis=0))

        # Perturbing only validation rows leaves every fitted statistic alone.
        pipe2 = fast_pipeline(use_pca=True, n_components=4, max_epochs=30)
        pipe2.fit(X, Y, X_val=Xv * 1000.0, Y_val=Yv)
        assert np.array_equal(pipe2.input_standardizer_.mean_, pipe.input_standardizer_.mean_)
        assert np.array_equal(pipe2.input_standardizer_.scale_, pipe.input_standardizer_.scale_)
        assert np.array_equal(pipe2.pca_.components_, pipe.pca_.components_)
        assert np.array_equal(
            pipe2.target_standardizer_.mean_, pipe.target_standardizer_.mean_
        )

    def test_target_round_trip_identity(self, fitted):
        _, _, Y, pipe = fitted
        std = pipe.target_standardizer_
        back = std.inverse_transform(std.transform(Y))
        assert np.max(np.abs(back - Y)) <= 1e-10 * max(1.0, np.max(np.abs(Y)))

    def test_validation_args_must_pair(self, rng):
        X = rng.normal(0, 1, (20, 5))
        Y = rng.normal(0, 1, (20, 2))
        with pytest.raises(ValueError, match="together"):
            fast_pipeline().fit(X, Y, X_val=X)

    def test_bad_n_components(self, rng):
        X = rng.normal(0, 1, (20, 5))
        Y = rng.normal(0, 1, (20, 2))
        with pytest.raises(ValueError, match="n_components"):
            fast_pipeline(n_components=0).fit(X, Y)


class TestPredict:
    def test_linear_task_fits_training_data(self, rng):
        W = rng.normal(0, 1, (3, 12))
        X = rng.normal(0, 1, (300, 12))
        Y = X @ W.T
        # Least-squares oracle: exactly solvable.
        coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
        assert np.max(np.abs(X @ coef - Y)) < 1e-9
        pipe = fast_pipeline(use_pca=False, hidden_units=48, max_epochs=2500,
                             patience=300, learning_rate=8e-3, weight_decay=1e-6)
        pipe.fit(X, Y)
        pred = pipe.predict(X)
        for j in range(3):
            assert r2(Y[:, j], pred[:, j]) > 0.99

    def test_single_row_equals_batch_bitwise(self, fitted):
        _, X, _, pipe = fitted
        batch = pipe.predict(X)
        for i in (0, 7, len(X) - 1):
            single = pipe.predict(X[i : i + 1])
            assert np.array_equal(single[0], batch[i])

    def test_wrong_width_rejected(self, fitted):
        *_, pipe = fitted
        with pytest.raises(ShapeError):
            pipe.predict(np.zeros((2, 3)))


class TestSaveLoad:
    def test_round_trip_bitwise(self, fitted, tmp_path):
        _, X, _, pipe = fitted
        path = tmp_path / "model.json"
        pipe.save(path)
        loaded = load_pipeline(path)
        assert np.array_equal(loaded.predict(X), pipe.predict(X))
        assert loaded.target_names_ == pipe.target_names_
        assert loaded.grid_ == pipe.grid_

    def test_unknown_format_version(self, fitted, tmp_path):
        _, _, _, pipe = fitted
        path = tmp_path / "model.json"
        pipe.save(path)
        doc = json.loads(path.read_text())
        doc["format_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(CompatibilityError, match="99"):
            load_pipeline(path)

    def test_corrupted_file(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text("{not json")
        with pytest.raises(ParseError, match="corrupted"):
            load_pipeline(path)

    def test_provenance_preserves_trial_config(self, fitted, tmp_path):
        _, _, _, pipe = fitted
        trial = {
            "hidden_layers": 1,
            "hidden_units": 24,
            "learning_rate": 5e-3,
            "weight_decay": 1e-5,
        }
        pipe.provenance_["trial_config"] = trial
        path = tmp_path / "model.json"
        pipe.save(path)
        loaded = load_pipeline(path)
        assert loaded.provenance_["trial_config"] == trial

    def test_save_requires_grid(self, rng, tmp_path):
        X = rng.normal(0, 1, (30, 6))
        Y = rng.normal(0, 1, (30, 2))
        pipe = fast_pipeline(use_pca=False, max_epochs=20)
        pipe.fit(X, Y)
        with pytest.raises(ValueError, match="grid"):
            pipe.save(tmp_path / "model.json")

    def test_serialized_floats_survive_exactly(self, fitted, tmp_path):
        _, _, _, pipe = fitted
        path = tmp_path / "model.json"
        pipe.save(path)
        loaded = load_pipeline(path)
        assert np.array_equal(loaded.mlp_.weights[0], pipe.mlp_.weights[0])
        assert np.array_equal(loaded.pca_.components_, pipe.pca_.components_)


class TestSklearnCompat:
    def test_get_params_round_trip(self):
        pipe = fast_pipeline()
        clone = SoftSensorPipeline(**pipe.get_params())
        assert clone.get_params() == pipe.get_params()
