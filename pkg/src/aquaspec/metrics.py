"""Regression metrics: RMSE, coefficient of determination, MAPE."""

from __future__ import annotations

import numpy as np

#: True values at or below this magnitude would blow up MAPE.
ZERO_TRUTH_EPS = 1e-12


def _paired(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y_true, dtype=np.float64).ravel()
    b = np.asarray(y_pred, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} true vs {b.shape[0]} predicted")
    if a.size == 0:
        raise ValueError("metrics need at least one value pair")
    return a, b


def rmse(y_true, y_pred) -> float:
    """Root mean squared error, sqrt(mean (y - yhat)^2)."""
    a, b = _paired(y_true, y_pred)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def r2(y_true, y_pred) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot."""
    a, b = _paired(y_true, y_pred)
    if a.size < 2:
        raise ValueError("r2 needs at least two value pairs")
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("r2 is undefined for constant true values (zero variance)")
    ss_res = float(np.sum((a - b) ** 2))
    return 1.0 - ss_res / ss_tot


def mape(y_true, y_pred, exclude_zero_truth: bool = False) -> float:
    """Mean absolute percentage error as a fraction (0.10 means 10%).

    True values with magnitude <= 1e-12 are an error unless
    ``exclude_zero_truth`` drops them from the mean.
    """
    a, b = _paired(y_true, y_pred)
    zero = np.abs(a) <= ZERO_TRUTH_EPS
    if zero.any():
        if not exclude_zero_truth:
            raise ValueError(
                "mape undefined for zero-valued truth at indices "
                f"{np.flatnonzero(zero).tolist()}; pass exclude_zero_truth=True "
                "to skip them"
            )
        a, b = a[~zero], b[~zero]
        if a.size == 0:
            raise ValueError("mape has no non-zero truth values left")
    return float(np.mean(np.abs(a - b) / np.abs(a)))
