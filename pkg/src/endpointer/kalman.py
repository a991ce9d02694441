"""Kalman prediction/correction with per-step predictive likelihoods.

This is the plain numpy reference path. It works for any linear-Gaussian
system: the bridged augmented systems built in bridge.py, and ordinary
unconditioned filters (pass the model triple directly to kf_iterate).
The filter bank uses the batched kernel in _backend instead, which must
agree with this module to floating-point accuracy.

Numerics: every observation update computes the log predictive density
N(y; G z_pred, G P_pred G' + V) in log space via a Cholesky factor of the
innovation covariance, and the covariance update uses the Joseph form so
the result stays symmetric PSD even with rank-deficient process noise.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bridge import AugmentedPrior, AugmentedTransition

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class FilterState:
    """Posterior state of one filter after n_obs observations.

    log_lik accumulates the log predictive density of every observation
    consumed so far (the log evidence of this filter's hypothesis).
    """

    mean: np.ndarray
    cov: np.ndarray
    log_lik: float = 0.0
    n_obs: int = 0
    t: float | None = None
    active: bool = True

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def kf_predict(mean: np.ndarray, cov: np.ndarray, R: np.ndarray,
               m: np.ndarray, U: np.ndarray):
    """Time update: push N(mean, cov) through z' = R z + m + noise(U)."""
    mean_p = R @ mean + m
    cov_p = R @ cov @ R.T + U
    return mean_p, 0.5 * (cov_p + cov_p.T)


def kf_correct(mean: np.ndarray, cov: np.ndarray, y: np.ndarray,
               G: np.ndarray, V: np.ndarray):
    """Measurement update returning (log predictive density, mean, cov).

    Raises np.linalg.LinAlgError when the innovation covariance is not
    positive definite.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    k = y.shape[0]
    innov = y - G @ mean
    S = G @ cov @ G.T + V
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "innovation covariance not positive definite") from exc
    w = np.linalg.solve(L, innov)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    log_pred = -0.5 * (k * LOG_2PI + logdet + float(w @ w))

    gain = np.linalg.solve(L.T, np.linalg.solve(L, G @ cov)).T
    mean_new = mean + gain @ innov
    a = np.eye(cov.shape[0]) - gain @ G
    cov_new = a @ cov @ a.T + gain @ V @ gain.T
    return log_pred, mean_new, 0.5 * (cov_new + cov_new.T)


def kf_iterate(state: FilterState, y, R, m, U, G, V, h: float = 0.0):
    """One predict+correct cycle of a generic linear-Gaussian filter."""
    mean_p, cov_p = kf_predict(state.mean, state.cov, R, m, U)
    log_pred, mean_n, cov_n = kf_correct(mean_p, cov_p, y, G, V)
    t_new = None if state.t is None else state.t + h
    new = FilterState(mean_n, cov_n, state.log_lik + log_pred,
                      state.n_obs + 1, t_new, state.active)
    return log_pred, new


def kf_step(state: FilterState, y, trans: AugmentedTransition, G, V):
    """Bridged filter step: predict through trans, then absorb y.

    Returns (log predictive density of y, new state). The state is not
    mutated; a fresh FilterState is returned.
    """
    if not state.active:
        raise ValueError("cannot step an inactive filter")
    return kf_iterate(state, y, trans.R, trans.m, trans.U, G, V, h=trans.h)


def kf_first(prior: AugmentedPrior, y, G, V, t: float | None = None):
    """Absorb the first observation directly into the prior.

    Equivalent to kf_step with an identity, zero-noise transition.
    """
    log_pred, mean_n, cov_n = kf_correct(prior.mean, prior.cov, y, G, V)
    return log_pred, FilterState(mean_n, cov_n, log_pred, 1, t, True)
