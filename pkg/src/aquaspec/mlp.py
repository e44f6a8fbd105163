"""Multilayer perceptron for multitarget regression.

One or two ReLU hidden layers, a linear output head, full-batch Adam, and
early stopping on validation MSE. Everything is plain numpy with analytic
gradients; the loss is

    mean over samples and targets of squared error
    + weight_decay * sum of squared weights   (biases excluded)

Training uses BLAS matmuls for speed. Inference (:func:`forward`) uses
einsum, whose per-row accumulation does not depend on the batch size, so
single-row and batched predictions agree bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import as_matrix, check_n_features, check_same_rows
from .exceptions import ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class MlpConfig:
    n_inputs: int
    hidden_layers: int
    hidden_units: int
    n_outputs: int
    learning_rate: float
    weight_decay: float = 0.0
    max_epochs: int = 8000
    patience: int = 200
    min_delta: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.hidden_layers not in (1, 2):
            raise ValueError(f"hidden_layers must be 1 or 2, got {self.hidden_layers}")
        for name in ("n_inputs", "hidden_units", "n_outputs", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        hidden = (self.hidden_units,) * self.hidden_layers
        return (self.n_inputs, *hidden, self.n_outputs)


class MlpModel:
    """Layer parameters; ``weights[l]`` has shape [fan_out, fan_in]."""

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]):
        if len(weights) != len(biases):
            raise ShapeError("weights and biases must pair up layer by layer")
        for W, b in zip(weights, biases):
            if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
                raise ShapeError(f"inconsistent layer shapes {W.shape} / {b.shape}")
        for prev, nxt in zip(weights, weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise ShapeError(
                    f"layer widths do not chain: {prev.shape} then {nxt.shape}"
                )
        self.weights = [np.array(W, dtype=np.float64) for W in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1], *(W.shape[0] for W in self.weights))

    @property
    def n_parameters(self) -> int:
        return sum(W.size for W in self.weights) + sum(b.size for b in self.biases)

    def copy(self) -> "MlpModel":
        return MlpModel(
            [W.copy() for W in self.weights], [b.copy() for b in self.biases]
        )


def init_model(config: MlpConfig) -> MlpModel:
    """He-normal weights (std sqrt(2/fan_in)), zero biases, seeded."""
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases)


def forward(model: MlpModel, X) -> np.ndarray:
    """Network output; ReLU on hidden layers, linear output head.

    Shares the BLAS path with training, so targets built from forward()
    reproduce a zero loss exactly.
    """
    A = as_matrix(X)
    check_n_features(A, model.layer_sizes[0])
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        Z = A @ W.T + b
        A = np.maximum(Z, 0.0) if l < last else Z
    return A


def forward_batch_invariant(model: MlpModel, X) -> np.ndarray:
    """forward() with batch-size-independent accumulation.

    einsum computes each output element in a fixed order regardless of how
    many rows are in the batch, unlike BLAS gemm, so single-row and batched
    evaluations agree bitwise. Prediction paths use this; training sticks
    with the faster BLAS kernels.
    """
    A = as_matrix(X)
    check_n_features(A, model.layer_sizes[0])
    last = len(model.weights) - 1
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        Z = np.einsum("ni,oi->no", A, W) + b
        A = np.maximum(Z, 0.0) if l < last else Z
    return A


def _forward_train(model: MlpModel, X: np.ndarray):
    """BLAS forward pass keeping pre-activations and activations for backprop."""
    pre = []
    acts = [X]
    last = len(model.weights) - 1
    A = X
    for l, (W, b) in enumerate(zip(model.weights, model.biases)):
        Z = A @ W.T + b
        pre.append(Z)
        A = np.maximum(Z, 0.0) if l < last else Z
        acts.append(A)
    return pre, acts


def loss_and_gradients(
    model: MlpModel, X, Y_true, weight_decay: float
) -> tuple[float, tuple[list[np.ndarray], list[np.ndarray]]]:
    """Objective value and its gradients by backpropagation."""
    X = as_matrix(X)
    Y = as_matrix(Y_true, "Y_true")
    check_n_features(X, model.layer_sizes[0])
    check_n_features(Y, model.layer_sizes[-1], "Y_true")
    check_same_rows(X, Y, "X", "Y_true")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("inputs to loss_and_gradients contain non-finite values")

    n, m = Y.shape
    pre, acts = _forward_train(model, X)
    residual = acts[-1] - Y
    data_loss = float(np.mean(residual**2))
    reg = weight_decay * sum(float(np.sum(W**2)) for W in model.weights)
    loss = data_loss + reg

    g_weights: list[np.ndarray] = [None] * len(model.weights)  # type: ignore
    g_biases: list[np.ndarray] = [None] * len(model.biases)  # type: ignore
    G = (2.0 / (n * m)) * residual
    for l in range(len(model.weights) - 1, -1, -1):
        g_weights[l] = G.T @ acts[l] + 2.0 * weight_decay * model.weights[l]
        g_biases[l] = G.sum(axis=0)
        if l > 0:
            G = (G @ model.weights[l]) * (pre[l - 1] > 0.0)
    return loss, (g_weights, g_biases)


@dataclass
class TrainHistory:
    """Per-epoch losses; index 0 is the initialized model before any update."""

    train_loss: list[float]
    val_loss: list[float]
    best_epoch: int
    stopped_epoch: int


def _val_mse(model: MlpModel, X: np.ndarray, Y: np.ndarray) -> float:
    _, acts = _forward_train(model, X)
    return float(np.mean((acts[-1] - Y) ** 2))


def train(
    config: MlpConfig, X_train, Y_train, X_val, Y_val
) -> tuple[MlpModel, TrainHistory]:
    """Full-batch Adam with early stopping on validation MSE.

    Stops once `patience` consecutive epochs bring no improvement larger than
    `min_delta`; the returned model carries the parameters of the best
    validation epoch. Inputs are expected already standardized by the caller.
    """
    X_train = as_matrix(X_train, "X_train")
    Y_train = as_matrix(Y_train, "Y_train")
    X_val = as_matrix(X_val, "X_val")
    Y_val = as_matrix(Y_val, "Y_val")
    if X_val.shape[0] == 0:
        raise ValueError("validation set must be non-empty")
    check_same_rows(X_train, Y_train, "X_train", "Y_train")
    check_same_rows(X_val, Y_val, "X_val", "Y_val")
    check_n_features(X_train, config.n_inputs, "X_train")
    check_n_features(X_val, config.n_inputs, "X_val")
    check_n_features(Y_train, config.n_outputs, "Y_train")
    check_n_features(Y_val, config.n_outputs, "Y_val")

    model = init_model(config)
    m_w = [np.zeros_like(W) for W in model.weights]
    v_w = [np.zeros_like(W) for W in model.weights]
    m_b = [np.zeros_like(b) for b in model.biases]
    v_b = [np.zeros_like(b) for b in model.biases]

    train_losses: list[float] = []
    val_losses: list[float] = []
    best_val = np.inf
    best_epoch = 0
    best_params = model.copy()
    bad_epochs = 0
    stopped_epoch = config.max_epochs
    lr = config.learning_rate
    t = 0

    with np.errstate(all="ignore"):  # divergence shows up as non-finite loss
        for epoch in range(config.max_epochs + 1):
            loss, (g_w, g_b) = loss_and_gradients(
                model, X_train, Y_train, config.weight_decay
            )
            val = _val_mse(model, X_val, Y_val)
            if not (np.isfinite(loss) and np.isfinite(val)):
                raise ArithmeticError(f"non-finite loss at epoch {epoch}")
            train_losses.append(loss)
            val_losses.append(val)

            if val < best_val - config.min_delta:
                best_val = val
                best_epoch = epoch
                best_params = model.copy()
                bad_epochs = 0
            elif epoch > 0:
                bad_epochs += 1

            if epoch == config.max_epochs or bad_epochs >= config.patience:
                stopped_epoch = epoch
                break

            t += 1
            bc1 = 1.0 - ADAM_BETA1**t
            bc2 = 1.0 - ADAM_BETA2**t
            for l in range(len(model.weights)):
                m_w[l] = ADAM_BETA1 * m_w[l] + (1 - ADAM_BETA1) * g_w[l]
                v_w[l] = ADAM_BETA2 * v_w[l] + (1 - ADAM_BETA2) * g_w[l] ** 2
                model.weights[l] -= lr * (m_w[l] / bc1) / (np.sqrt(v_w[l] / bc2) + ADAM_EPS)
                m_b[l] = ADAM_BETA1 * m_b[l] + (1 - ADAM_BETA1) * g_b[l]
                v_b[l] = ADAM_BETA2 * v_b[l] + (1 - ADAM_BETA2) * g_b[l] ** 2
                model.biases[l] -= lr * (m_b[l] / bc1) / (np.sqrt(v_b[l] / bc2) + ADAM_EPS)

    history = TrainHistory(
        train_loss=train_losses,
        val_loss=val_losses,
        best_epoch=best_epoch,
        stopped_epoch=stopped_epoch,
    )
    return best_params, history
