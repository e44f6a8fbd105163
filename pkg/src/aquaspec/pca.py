"""Principal component analysis via SVD of the centered data matrix.

SVD is used instead of an explicit covariance eigendecomposition because it
is numerically stabler when features outnumber samples (205 channels vs.
around 113 spectra). A deterministic sign convention (the largest-magnitude
loading of each component is positive) keeps fits reproducible across runs
and platforms.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, check_n_features

#: Orthonormality is verified after every fit to this tolerance.
ORTHONORMALITY_TOL = 1e-10


class PCA(BaseEstimator, TransformerMixin):
    """Project data onto the top principal directions of the fit set.

    Parameters
    ----------
    n_components : int
        Number of components to keep; must satisfy
        ``1 <= n_components <= min(n_samples - 1, n_features)`` at fit time.
    """

    def __init__(self, n_components: int = 15):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = as_matrix(X)
        n, p = X.shape
        k = self.n_components
        if n < 2:
            raise ValueError(f"PCA needs at least 2 samples, got {n}")
        if not 1 <= k <= min(n - 1, p):
            raise ValueError(
                f"n_components={k} outside 1..min(n-1, p)={min(n - 1, p)} "
                f"for data of shape {X.shape}"
            )

        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, s, vt = np.linalg.svd(centered, full_matrices=False)

        tol = s[0] * max(n, p) * np.finfo(np.float64).eps if s.size else 0.0
        rank = int(np.sum(s > tol))
        variances = s**2 / (n - 1)

        components = vt[:k].copy()
        explained = variances[:k].copy()
        self.rank_deficient_ = rank < k
        if self.rank_deficient_:
            explained[rank:] = 0.0
            warnings.warn(
                f"data rank {rank} is below n_components={k}; trailing "
                "components have zero explained variance",
                RuntimeWarning,
                stacklevel=2,
            )

        # Sign convention: largest-magnitude loading of each component positive.
        for row in components:
            j = int(np.argmax(np.abs(row)))
            if row[j] < 0:
                row *= -1.0

        gram = components @ components.T
        if np.max(np.abs(gram - np.eye(k))) > ORTHONORMALITY_TOL:
            raise ArithmeticError("PCA components lost orthonormality")

        self.components_ = components
        self.explained_variance_ = explained
        self.total_variance_ = float(variances.sum())
        if self.total_variance_ > 0:
            self.explained_variance_ratio_ = explained / self.total_variance_
        else:
            self.explained_variance_ratio_ = np.zeros(k)
        self.n_samples_ = n
        self.n_features_in_ = p
        return self

    def transform(self, X) -> np.ndarray:
        """Scores ``(X - mean) @ components.T``, batch-size invariant bitwise."""
        check_is_fitted(self, "components_")
        X = as_matrix(X)
        check_n_features(X, self.n_features_in_)
        # einsum keeps per-row accumulation independent of the batch size,
        # unlike BLAS gemm, so single-row and batched transforms agree bitwise.
        return np.einsum("np,kp->nk", X - self.mean_, self.components_)

    def inverse_transform(self, scores) -> np.ndarray:
        check_is_fitted(self, "components_")
        S = as_matrix(scores, "scores")
        check_n_features(S, self.components_.shape[0], "scores")
        return np.einsum("nk,kp->np", S, self.components_) + self.mean_
