"""KernelSHAP: per-wavelength attribution of pipeline predictions.

The estimator follows the weighted-least-squares formulation of Shapley
values. A coalition is a subset of features kept at the explained instance's
values; the remaining features are replaced by background rows and the model
evaluations are averaged over the background, so each explanation costs
(m background rows) x (n coalition samples) predictions.

When the coalition budget covers every subset (2^p - 2 <= n_samples - 2) the
solver enumerates all of them with exact Shapley-kernel weights, which
reproduces exact Shapley values. Otherwise coalition sizes are drawn with
probability proportional to the kernel weight and subsets uniformly within a
size, leaving a uniformly weighted least squares. Either way the solve is
constrained so attributions sum exactly to prediction minus base value
(local accuracy), with a tiny ridge term guarding conditioning.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Callable

import numpy as np

from ._validation import as_matrix, as_vector
from .exceptions import ConditioningError, ShapeError
from .pipeline import SoftSensorPipeline
from .spectra import Spectrum

WLS_RIDGE = 1e-10
_PREDICT_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class ShapExplanation:
    """Additive attributions for one instance, one row of phi per target."""

    instance_id: str
    target_names: tuple[str, ...]
    base_values: np.ndarray  # [n_targets]
    phi: np.ndarray  # [n_targets x n_features]
    prediction: np.ndarray  # [n_targets]
    n_coalitions: int
    n_samples: int
    seed: int
    exhaustive: bool

    def local_accuracy_error(self) -> np.ndarray:
        """|base + sum(phi) - prediction| per target."""
        return np.abs(self.base_values + self.phi.sum(axis=1) - self.prediction)


def sample_background(X, m: int = 10, seed: int = 0) -> np.ndarray:
    """Uniformly subsample m reference rows (without replacement, seeded)."""
    X = as_matrix(X)
    if X.shape[0] == 0:
        raise ValueError("cannot sample a background from an empty matrix")
    m = min(m, X.shape[0])
    rng = np.random.default_rng(seed)
    idx = rng.choice(X.shape[0], size=m, replace=False)
    return X[np.sort(idx)]


def _kernel_weight(p: int, s: int) -> float:
    return (p - 1) / (comb(p, s) * s * (p - s))


def _enumerate_coalitions(p: int) -> tuple[np.ndarray, np.ndarray]:
    masks, weights = [], []
    for s in range(1, p):
        w = _kernel_weight(p, s)
        for subset in itertools.combinations(range(p), s):
            mask = np.zeros(p, dtype=bool)
            mask[list(subset)] = True
            masks.append(mask)
            weights.append(w)
    return np.array(masks), np.array(weights)


def _sample_coalitions(p: int, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    sizes = np.arange(1, p)
    probs = (p - 1) / (sizes * (p - sizes))
    probs = probs / probs.sum()
    drawn = rng.choice(sizes, size=n, p=probs)
    masks = np.zeros((n, p), dtype=bool)
    for i, s in enumerate(drawn):
        masks[i, rng.permutation(p)[:s]] = True
    # Sampling density is proportional to the kernel weight, so the least
    # squares stays uniformly weighted.
    return masks, np.ones(n)


def _batched_predict(predict: Callable, rows: np.ndarray) -> np.ndarray:
    outputs = [
        np.asarray(predict(rows[i : i + _PREDICT_CHUNK]), dtype=np.float64)
        for i in range(0, rows.shape[0], _PREDICT_CHUNK)
    ]
    return np.concatenate(outputs, axis=0)


def kernel_shap(
    predict: Callable[[np.ndarray], np.ndarray],
    background,
    x,
    n_samples: int = 2048,
    seed: int = 0,
    instance_id: str = "",
    target_names: tuple[str, ...] | None = None,
) -> ShapExplanation:
    """Explain predict(x) against a background distribution.

    ``predict`` must map a [q x p] matrix to a [q x t] matrix. The empty and
    full coalitions are always honored: the intercept is pinned to the mean
    background prediction and the attribution sum to prediction minus base.
    """
    background = as_matrix(background, "background")
    x = as_vector(x, "x")
    p = x.shape[0]
    if background.shape[1] != p:
        raise ShapeError(
            f"background has {background.shape[1]} features, instance has {p}"
        )
    if n_samples < p + 2:
        raise ValueError(
            f"n_samples={n_samples} too small; need at least n_features + 2 = {p + 2}"
        )

    bg_preds = np.asarray(predict(background), dtype=np.float64)
    if bg_preds.ndim != 2 or bg_preds.shape[0] != background.shape[0]:
        raise ShapeError(
            "predict must return one output row per input row "
            f"(got {bg_preds.shape} for {background.shape[0]} rows)"
        )
    base = bg_preds.mean(axis=0)
    pred_x = np.asarray(predict(x[None, :]), dtype=np.float64)[0]
    n_targets = base.shape[0]

    exhaustive = p >= 2 and (2**p - 2) <= (n_samples - 2)
    if exhaustive:
        masks, weights = _enumerate_coalitions(p)
    else:
        rng = np.random.default_rng(seed)
        masks, weights = _sample_coalitions(p, n_samples - 2, rng)

    # Evaluate v(S): keep coalition features at x, draw the rest from each
    # background row, average predictions over the background.
    m = background.shape[0]
    rows = np.where(masks[:, None, :], x[None, None, :], background[None, :, :])
    preds = _batched_predict(predict, rows.reshape(-1, p))
    v = preds.reshape(masks.shape[0], m, n_targets).mean(axis=1)

    # Constrained WLS: intercept fixed at base, attributions summing to
    # pred_x - base. The last feature is eliminated by the constraint.
    total = pred_x - base  # [t]
    Z = masks.astype(np.float64)
    A = Z[:, :-1] - Z[:, -1:]
    rhs = (v - base) - Z[:, -1:] * total
    sw = np.sqrt(weights)[:, None]
    Aw = A * sw
    Rw = rhs * sw
    gram = Aw.T @ Aw + WLS_RIDGE * np.eye(p - 1)
    try:
        phi_head = np.linalg.solve(gram, Aw.T @ Rw)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(
            f"coalition system is singular ({exc}); increase n_samples"
        ) from None
    if not np.all(np.isfinite(phi_head)):
        raise ConditioningError(
            "coalition solve produced non-finite attributions; increase n_samples"
        )
    phi_last = total - phi_head.sum(axis=0)
    phi = np.vstack([phi_head, phi_last[None, :]]).T  # [t x p]

    if target_names is None:
        target_names = tuple(f"y{j}" for j in range(n_targets))
    return ShapExplanation(
        instance_id=instance_id,
        target_names=tuple(target_names),
        base_values=base,
        phi=phi,
        prediction=pred_x,
        n_coalitions=masks.shape[0] + 2,
        n_samples=n_samples,
        seed=seed,
        exhaustive=exhaustive,
    )


def explain_pipeline(
    model: SoftSensorPipeline,
    x,
    background,
    n_samples: int = 2048,
    seed: int = 0,
    instance_id: str = "",
) -> ShapExplanation:
    """Attribute a pipeline prediction to the original wavelengths.

    The explained function is the full composition (standardize, PCA, MLP,
    de-standardize), so phi lands on spectral channels even though the
    regressor consumes PCA scores.
    """
    if isinstance(x, Spectrum):
        if model.grid_ is not None and x.grid != model.grid_:
            raise ShapeError(
                f"instance grid {x.grid} does not match model grid {model.grid_}"
            )
        vector = x.absorbance
    else:
        vector = as_vector(x, "x")
    if vector.shape[0] != model.n_features_in_:
        raise ShapeError(
            f"instance has {vector.shape[0]} channels, model expects "
            f"{model.n_features_in_}"
        )
    return kernel_shap(
        model.predict,
        background,
        vector,
        n_samples=n_samples,
        seed=seed,
        instance_id=instance_id,
        target_names=model.target_names_,
    )


def shap_summary(explanations) -> np.ndarray:
    """Mean absolute attribution per feature per target, [t x p]."""
    explanations = list(explanations)
    if not explanations:
        raise ValueError("need at least one explanation to summarize")
    shape = explanations[0].phi.shape
    targets = explanations[0].target_names
    for e in explanations[1:]:
        if e.phi.shape != shape or e.target_names != targets:
            raise ShapeError("explanations have inconsistent shapes or targets")
    return np.mean([np.abs(e.phi) for e in explanations], axis=0)
