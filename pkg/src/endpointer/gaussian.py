"""Gaussian and Gaussian-mixture containers used across the package."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


def _as_cov(cov, dim: int) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (dim, dim):
        raise ValueError(f"covariance shape {cov.shape} does not match dim {dim}")
    if not np.allclose(cov, cov.T, atol=1e-10 * (1.0 + np.abs(cov).max())):
        raise ValueError("covariance must be symmetric")
    return 0.5 * (cov + cov.T)


def gaussian_logpdf(x, mean, cov) -> float:
    """Log density of N(mean, cov) at x, via a Cholesky solve.

    Raises np.linalg.LinAlgError if cov is not positive definite.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    k = x.shape[0]
    chol = np.linalg.cholesky(cov)
    w = np.linalg.solve(chol, x - mean)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return float(-0.5 * (k * LOG_2PI + logdet + w @ w))


@dataclass
class Gaussian:
    """A multivariate normal with dense mean and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = _as_cov(np.atleast_2d(self.cov), self.dim)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def logpdf(self, x) -> float:
        return gaussian_logpdf(x, self.mean, self.cov)

    def marginal(self, idx) -> "Gaussian":
        """Marginal over the listed coordinate indices."""
        idx = np.asarray(idx, dtype=int)
        return Gaussian(self.mean[idx], self.cov[np.ix_(idx, idx)])


@dataclass
class GaussianMixture:
    """Weighted mixture of Gaussians with equal dimension.

    ``tags`` optionally carries one hashable label per component (the intent
    engine stores (destination index, arrival time) there).
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    tags: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.covs = np.asarray(self.covs, dtype=float)
        m = self.weights.shape[0]
        if self.means.shape[0] != m or self.covs.shape[0] != m:
            raise ValueError("component count mismatch")
        if np.any(self.weights < -1e-12):
            raise ValueError("negative mixture weight")
        s = float(self.weights.sum())
        if not np.isfinite(s) or abs(s - 1.0) > 1e-9:
            raise ValueError(f"mixture weights sum to {s}, expected 1")
        if self.tags and len(self.tags) != m:
            raise ValueError("tags length mismatch")

    @property
    def n_components(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    def mean(self) -> np.ndarray:
        """Overall mixture mean."""
        return self.weights @ self.means

    def cov(self) -> np.ndarray:
        """Overall mixture covariance (law of total covariance)."""
        mu = self.mean()
        out = np.einsum("i,ijk->jk", self.weights, self.covs)
        d = self.means - mu
        out = out + np.einsum("i,ij,ik->jk", self.weights, d, d)
        return 0.5 * (out + out.T)

    def logpdf(self, x) -> float:
        """Mixture log density at a single point."""
        x = np.asarray(x, dtype=float)
        logs = np.full(self.n_components, -np.inf)
        for i in range(self.n_components):
            if self.weights[i] > 0.0:
                logs[i] = np.log(self.weights[i]) + gaussian_logpdf(
                    x, self.means[i], self.covs[i]
                )
        m = logs.max()
        if not np.isfinite(m):
            return -np.inf
        return float(m + np.log(np.exp(logs - m).sum()))

    def marginal(self, idx) -> "GaussianMixture":
        """Component-wise marginal over the listed coordinates."""
        idx = np.asarray(idx, dtype=int)
        return GaussianMixture(
            self.weights.copy(),
            self.means[:, idx],
            self.covs[:, idx][:, :, idx],
            list(self.tags),
        )
