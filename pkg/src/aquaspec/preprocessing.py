"""Column-wise standardization with population statistics."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, check_n_features

#: Below this the column counts as constant and is left unscaled.
DEGENERATE_STD = 1e-12


class Standardizer(BaseEstimator, TransformerMixin):
    """Center columns and scale them to unit standard deviation.

    Statistics are population moments (ddof=0) of the fit data. Columns whose
    std falls below 1e-12 keep their mean but divide by 1, so constant
    features pass through centered instead of exploding.
    """

    def fit(self, X, y=None):
        X = as_matrix(X)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std < DEGENERATE_STD, 1.0, std)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "mean_")
        X = as_matrix(X)
        check_n_features(X, self.n_features_in_)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, Z) -> np.ndarray:
        check_is_fitted(self, "mean_")
        Z = as_matrix(Z, "Z")
        check_n_features(Z, self.n_features_in_, "Z")
        return Z * self.scale_ + self.mean_
