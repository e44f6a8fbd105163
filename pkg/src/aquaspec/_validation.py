"""Input validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import ShapeError


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array; reject other dimensionalities."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    return arr


def as_vector(y, name: str = "y") -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


def check_n_features(X: np.ndarray, expected: int, name: str = "X") -> None:
    if X.shape[1] != expected:
        raise ShapeError(
            f"{name} has {X.shape[1]} columns, expected {expected}"
        )


def check_same_rows(A: np.ndarray, B: np.ndarray, a_name: str, b_name: str) -> None:
    if A.shape[0] != B.shape[0]:
        raise ShapeError(
            f"{a_name} has {A.shape[0]} rows but {b_name} has {B.shape[0]}"
        )
