"""The soft sensor: standardize -> optional PCA -> score-standardize -> MLP.

All preprocessing statistics come from the training split only; validation
data is transformed with training statistics. Targets are standardized
per-target before the loss so the multitarget MSE is not dominated by
large-scale targets (conductivity), and predictions are de-standardized on
the way out.

Fitted pipelines serialize to a versioned JSON file. Floats are written as
shortest round-tripping decimals (repr), so a loaded model predicts bitwise
identically to the one saved.
"""

from __future__ import annotations

import json
from typing import Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, check_n_features, check_same_rows
from .exceptions import CompatibilityError, ParseError, ShapeError
from .mlp import MlpConfig, MlpModel, forward_batch_invariant, train
from .pca import PCA
from .preprocessing import Standardizer
from .seeding import derive_seed
from .spectra import WavelengthGrid

FORMAT_VERSION = 1


class SoftSensorPipeline(BaseEstimator):
    """Trainable, serializable spectra-to-targets regressor.

    Parameters mirror one hyperparameter draw of the search space plus the
    two protocol switches (``use_pca``, ``n_components``). ``fit`` takes an
    explicit early-stopping validation set; without one it holds out a seeded
    ``val_fraction`` of the training rows.
    """

    def __init__(
        self,
        use_pca: bool = True,
        n_components: int = 15,
        hidden_layers: int = 1,
        hidden_units: int = 512,
        learning_rate: float = 5e-4,
        weight_decay: float = 1e-3,
        max_epochs: int = 8000,
        patience: int = 200,
        val_fraction: float = 0.25,
        seed: int = 0,
    ):
        self.use_pca = use_pca
        self.n_components = n_components
        self.hidden_layers = hidden_layers
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.patience = patience
        self.val_fraction = val_fraction
        self.seed = seed

    # -- fitting ------------------------------------------------------------

    def fit(
        self,
        X,
        Y,
        X_val=None,
        Y_val=None,
        grid: WavelengthGrid | None = None,
        target_names=None,
    ):
        X = as_matrix(X)
        Y = as_matrix(Y, "Y")
        check_same_rows(X, Y, "X", "Y")
        if self.use_pca and self.n_components < 1:
            raise ValueError("n_components must be >= 1 when use_pca is set")
        if (X_val is None) != (Y_val is None):
            raise ValueError("pass X_val and Y_val together or neither")

        if X_val is None:
            if not 0.0 < self.val_fraction < 1.0:
                raise ValueError("val_fraction must be in (0, 1)")
            rng = np.random.default_rng(derive_seed(self.seed, "early-stop-split"))
            n = X.shape[0]
            n_val = max(1, int(round(self.val_fraction * n)))
            if n_val >= n:
                raise ValueError(f"too few rows ({n}) to hold out a validation set")
            perm = rng.permutation(n)
            val_idx, train_idx = perm[:n_val], perm[n_val:]
            X, X_val, Y, Y_val = X[train_idx], X[val_idx], Y[train_idx], Y[val_idx]
        else:
            X_val = as_matrix(X_val, "X_val")
            Y_val = as_matrix(Y_val, "Y_val")
            check_same_rows(X_val, Y_val, "X_val", "Y_val")
            check_n_features(X_val, X.shape[1], "X_val")
            check_n_features(Y_val, Y.shape[1], "Y_val")

        if grid is not None and grid.n_channels != X.shape[1]:
            raise ShapeError(
                f"grid declares {grid.n_channels} channels but X has {X.shape[1]}"
            )

        self.input_standardizer_ = Standardizer().fit(X)
        Zt = self.input_standardizer_.transform(X)
        Zv = self.input_standardizer_.transform(X_val)

        if self.use_pca:
            self.pca_ = PCA(n_components=self.n_components).fit(Zt)
            St = self.pca_.transform(Zt)
            Sv = self.pca_.transform(Zv)
            self.score_standardizer_ = Standardizer().fit(St)
            Zt = self.score_standardizer_.transform(St)
            Zv = self.score_standardizer_.transform(Sv)
        else:
            self.pca_ = None
            self.score_standardizer_ = None

        self.target_standardizer_ = Standardizer().fit(Y)
        Yt = self.target_standardizer_.transform(Y)
        Yv = self.target_standardizer_.transform(Y_val)

        config = MlpConfig(
            n_inputs=Zt.shape[1],
            hidden_layers=self.hidden_layers,
            hidden_units=self.hidden_units,
            n_outputs=Y.shape[1],
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=derive_seed(self.seed, "mlp-init"),
        )
        self.mlp_, self.history_ = train(config, Zt, Yt, Zv, Yv)

        self.grid_ = grid
        if target_names is not None:
            names = tuple(target_names)
            if len(names) != Y.shape[1]:
                raise ShapeError(
                    f"{len(names)} target names for {Y.shape[1]} target columns"
                )
        else:
            names = tuple(f"y{j}" for j in range(Y.shape[1]))
        self.target_names_ = names
        self.n_features_in_ = X.shape[1]
        self.provenance_: dict = {
            "seed": self.seed,
            "trial_config": None,
            "fitted_at": None,
            "estimator_params": self.get_params(),
        }
        return self

    # -- inference ----------------------------------------------------------

    def predict(self, X) -> np.ndarray:
        """Predictions in original target units; bitwise batch-size invariant."""
        check_is_fitted(self, "mlp_")
        X = as_matrix(X)
        check_n_features(X, self.n_features_in_)
        Z = self.input_standardizer_.transform(X)
        if self.pca_ is not None:
            Z = self.score_standardizer_.transform(self.pca_.transform(Z))
        out = forward_batch_invariant(self.mlp_, Z)
        return self.target_standardizer_.inverse_transform(out)

    # -- serialization ------------------------------------------------------

    def save(self, path, fitted_at: str | None = None) -> None:
        """Write the versioned JSON model file.

        ``fitted_at`` is optional provenance; it defaults to None so that
        identical fits produce byte-identical files.
        """
        check_is_fitted(self, "mlp_")
        if self.grid_ is None:
            raise ValueError(
                "pipeline was fitted without a wavelength grid; pass grid= to fit "
                "before saving"
            )
        doc = {
            "format_version": FORMAT_VERSION,
            "grid": {
                "start_nm": self.grid_.start_nm,
                "step_nm": self.grid_.step_nm,
                "n_channels": self.grid_.n_channels,
            },
            "target_names": list(self.target_names_),
            "input_standardizer": _standardizer_to_dict(self.input_standardizer_),
            "pca": None
            if self.pca_ is None
            else {
                "mean": self.pca_.mean_.tolist(),
                "components": self.pca_.components_.ravel(order="C").tolist(),
                "explained_variance": self.pca_.explained_variance_.tolist(),
            },
            "score_standardizer": None
            if self.score_standardizer_ is None
            else _standardizer_to_dict(self.score_standardizer_),
            "mlp": {
                "layers": [
                    {
                        "rows": W.shape[0],
                        "cols": W.shape[1],
                        "weights": W.ravel(order="C").tolist(),
                        "bias": b.tolist(),
                    }
                    for W, b in zip(self.mlp_.weights, self.mlp_.biases)
                ]
            },
            "target_standardizer": _standardizer_to_dict(self.target_standardizer_),
            "provenance": {**self.provenance_, "fitted_at": fitted_at},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "SoftSensorPipeline":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"corrupted model file: {exc}") from None
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise CompatibilityError(
                f"model file format_version {version!r} is not supported "
                f"(expected {FORMAT_VERSION})"
            )
        try:
            provenance = doc["provenance"]
            params = dict(provenance.get("estimator_params", {}))
            pipe = cls(**params) if params else cls()
            pipe.grid_ = WavelengthGrid(
                start_nm=float(doc["grid"]["start_nm"]),
                step_nm=float(doc["grid"]["step_nm"]),
                n_channels=int(doc["grid"]["n_channels"]),
            )
            pipe.target_names_ = tuple(doc["target_names"])
            pipe.input_standardizer_ = _standardizer_from_dict(
                doc["input_standardizer"]
            )
            if doc["pca"] is None:
                pipe.pca_ = None
                pipe.score_standardizer_ = None
            else:
                pca = PCA(n_components=len(doc["pca"]["explained_variance"]))
                pca.mean_ = np.array(doc["pca"]["mean"], dtype=np.float64)
                k = len(doc["pca"]["explained_variance"])
                p = pca.mean_.shape[0]
                pca.components_ = np.array(
                    doc["pca"]["components"], dtype=np.float64
                ).reshape(k, p)
                pca.explained_variance_ = np.array(
                    doc["pca"]["explained_variance"], dtype=np.float64
                )
                pca.n_features_in_ = p
                pipe.pca_ = pca
                pipe.score_standardizer_ = _standardizer_from_dict(
                    doc["score_standardizer"]
                )
            weights, biases = [], []
            for layer in doc["mlp"]["layers"]:
                rows, cols = int(layer["rows"]), int(layer["cols"])
                weights.append(
                    np.array(layer["weights"], dtype=np.float64).reshape(rows, cols)
                )
                biases.append(np.array(layer["bias"], dtype=np.float64))
            pipe.mlp_ = MlpModel(weights, biases)
            pipe.target_standardizer_ = _standardizer_from_dict(
                doc["target_standardizer"]
            )
            pipe.n_features_in_ = pipe.grid_.n_channels
            pipe.provenance_ = dict(provenance)
        except (KeyError, TypeError) as exc:
            raise ParseError(f"model file is missing or malforms field: {exc}") from None
        return pipe


def _standardizer_to_dict(standardizer: Standardizer) -> dict:
    return {"mean": standardizer.mean_.tolist(), "std": standardizer.scale_.tolist()}


def _standardizer_from_dict(doc: Mapping) -> Standardizer:
    standardizer = Standardizer()
    standardizer.mean_ = np.array(doc["mean"], dtype=np.float64)
    standardizer.scale_ = np.array(doc["std"], dtype=np.float64)
    standardizer.n_features_in_ = standardizer.mean_.shape[0]
    return standardizer


def save_pipeline(model: SoftSensorPipeline, path, fitted_at: str | None = None) -> None:
    model.save(path, fitted_at=fitted_at)


def load_pipeline(path) -> SoftSensorPipeline:
    return SoftSensorPipeline.load(path)
