"""Endpoint-conditioned (bridged) transitions on an augmented state.

Conditioning a linear-Gaussian motion model on where it ends up turns the
trajectory into another linear-Gaussian system over the augmented state
z = [X_t, X_T]: the current state stacked with the (latent) arrival state.
One step of that system is

    z_{t+h} | z_t ~ N(R z_t + m, U)

where the top block of R blends the unconditioned step toward the pinned
endpoint and the bottom block is the identity (the arrival state never
moves). U has the step covariance C in its top-left corner and is zero
elsewhere, so it is deliberately rank-deficient.

The blend is computed in information form with Cholesky solves:

    C  = (Q_h^{-1} + F_tau' Q_tau^{-1} F_tau)^{-1}
    H  = [C Q_h^{-1} F_h,  C F_tau' Q_tau^{-1}]
    m  =  C Q_h^{-1} M_h − C F_tau' Q_tau^{-1} M_tau

with (F_h, M_h, Q_h) the model step over h and (F_tau, M_tau, Q_tau) the
model step over the remaining time tau = T − t − h.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .models import Destination, ModelParams, TransitionTriple, transition, transition_parts

#: Default floor on the remaining time to arrival. Steps that would land
#: closer to the arrival time than this are refused (the caller should
#: treat the filter as arrived instead).
EPS_MIN_DEFAULT = 1e-6

_COND_LIMIT = 1e12
_JITTER_SCALE = 1e-10


class BridgeNumericalError(np.linalg.LinAlgError):
    """A bridge covariance could not be factorized even after jitter."""


def _regularized_cholesky(mat: np.ndarray, what: str):
    """Cholesky factor of a symmetric PD matrix, with a jitter fallback.

    If the matrix is ill-conditioned (condition number above 1e12) or not
    numerically PD, a floor of 1e-10 * mean diagonal mass is added once.
    """
    mat = 0.5 * (mat + mat.T)
    r = mat.shape[0]
    if not np.all(np.isfinite(mat)):
        raise BridgeNumericalError(f"{what}: non-finite entries")
    w = np.linalg.eigvalsh(mat)
    needs_jitter = w[0] <= 0.0 or (w[-1] / w[0]) > _COND_LIMIT
    if needs_jitter:
        tr = float(np.trace(mat))
        if tr <= 0.0:
            raise BridgeNumericalError(f"{what}: matrix has no positive mass")
        mat = mat + (_JITTER_SCALE * tr / r) * np.eye(r)
    try:
        return cho_factor(mat, lower=True)
    except np.linalg.LinAlgError as exc:
        raise BridgeNumericalError(f"{what}: not positive definite") from exc


@dataclass(frozen=True)
class AugmentedTransition:
    """One bridged step of the augmented state z = [X_t, X_T].

    R, m, U define z' | z ~ N(R z + m, U). h is the step length and
    remaining the time still to run after the step (tau above).
    """

    R: np.ndarray
    m: np.ndarray
    U: np.ndarray
    h: float
    remaining: float

    @property
    def dim(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True)
class AugmentedPrior:
    """Initial Gaussian over [X_{t_1}, X_T]: independent blocks."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def bridge_blocks(tri_h: TransitionTriple, tri_tau: TransitionTriple):
    """Core information-form fusion for one bridged step.

    Returns (C, S1, S2) with C the bridged step covariance, S1 = C Q_h^{-1}
    and S2 = C F_tau' Q_tau^{-1}. The caller assembles H = [S1 F_h, S2] and
    m = S1 M_h − S2 M_tau.
    """
    r = tri_h.Q.shape[0]
    eye = np.eye(r)
    ch = _regularized_cholesky(tri_h.Q, "step covariance")
    cx = _regularized_cholesky(tri_tau.Q, "remaining-gap covariance")
    qh_inv = cho_solve(ch, eye)
    qx_inv_fx = cho_solve(cx, tri_tau.F)
    prec = qh_inv + tri_tau.F.T @ qx_inv_fx
    cp = _regularized_cholesky(prec, "bridged step precision")
    C = cho_solve(cp, eye)
    C = 0.5 * (C + C.T)
    S1 = C @ qh_inv
    S2 = C @ qx_inv_fx.T
    return C, S1, S2


def conditioned_transition(params: ModelParams, dest: Destination, t: float,
                           h: float, T: float,
                           eps_min: float = EPS_MIN_DEFAULT) -> AugmentedTransition:
    """Bridged augmented-state transition from time t to t + h toward (T, dest).

    Refuses steps whose remaining time tau = T − t − h falls below eps_min;
    at that point the column should be treated as arrived, not stepped.
    h = 0 returns an exact no-op step.
    """
    if h < 0:
        raise ValueError("step length must be nonnegative")
    r = params.state_dim
    if dest.dim != r:
        raise ValueError(f"destination dim {dest.dim} != state dim {r}")
    n = 2 * r
    if h == 0.0:
        return AugmentedTransition(np.eye(n), np.zeros(n), np.zeros((n, n)),
                                   0.0, T - t)
    tau = T - t - h
    if tau < eps_min:
        raise ValueError(
            f"step lands {tau} before arrival, below the floor {eps_min}")
    tri_h = transition(params, h, dest)
    tri_tau = transition(params, tau, dest)
    C, S1, S2 = bridge_blocks(tri_h, tri_tau)
    H = np.hstack([S1 @ tri_h.F, S2])
    m_top = S1 @ tri_h.M - S2 @ tri_tau.M

    R = np.zeros((n, n))
    R[:r, :] = H
    R[r:, r:] = np.eye(r)
    m = np.concatenate([m_top, np.zeros(r)])
    U = np.zeros((n, n))
    U[:r, :r] = C
    return AugmentedTransition(R, m, U, h, tau)


def bank_step_blocks(params: ModelParams, h: float, taus: np.ndarray,
                     dest_means: np.ndarray):
    """Per-quadrature-point bridge blocks shared by a whole filter bank.

    The step blend (H, C) does not depend on the destination; only the
    offset does, through m = W a_d. Returns (H, C, m) with shapes
    H (q, r, 2r), C (q, r, r), m (n_dest, q, r), where q = len(taus) and
    the caller guarantees every tau is positive.

    dest_means is the (n_dest, r) stack of destination means.
    """
    taus = np.asarray(taus, dtype=float)
    dest_means = np.atleast_2d(np.asarray(dest_means, dtype=float))
    q = taus.shape[0]
    r = params.state_dim
    n_dest = dest_means.shape[0]
    eye = np.eye(r)

    Fh, Qh, Mfh = (a[0] for a in transition_parts(params, [h]))
    Fx, Qx, Mfx = transition_parts(params, taus)

    ch = _regularized_cholesky(Qh, "step covariance")
    qh_inv = cho_solve(ch, eye)

    H = np.empty((q, r, 2 * r))
    C = np.empty((q, r, r))
    W = np.empty((q, r, r)) if params.kind.destination_driven else None
    for i in range(q):
        cx = _regularized_cholesky(Qx[i], "remaining-gap covariance")
        qx_inv_fx = cho_solve(cx, Fx[i])
        prec = qh_inv + Fx[i].T @ qx_inv_fx
        cp = _regularized_cholesky(prec, "bridged step precision")
        Ci = cho_solve(cp, eye)
        Ci = 0.5 * (Ci + Ci.T)
        S1 = Ci @ qh_inv
        S2 = Ci @ qx_inv_fx.T
        H[i, :, :r] = S1 @ Fh
        H[i, :, r:] = S2
        C[i] = Ci
        if W is not None:
            W[i] = S1 @ Mfh - S2 @ Mfx[i]

    if W is None:
        m = np.zeros((n_dest, q, r))
    else:
        m = np.einsum("qij,dj->dqi", W, dest_means)
    return H, C, m


def augmented_observation(G: np.ndarray) -> np.ndarray:
    """Lift an observation matrix to the augmented state: [G, 0]."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    k, r = G.shape
    return np.hstack([G, np.zeros((k, r))])


def augmented_prior(init_mean, init_cov, dest: Destination) -> AugmentedPrior:
    """Independent prior over [X_{t_1}, X_T] from the track prior and a destination."""
    init_mean = np.atleast_1d(np.asarray(init_mean, dtype=float))
    init_cov = np.atleast_2d(np.asarray(init_cov, dtype=float))
    r = init_mean.shape[0]
    if dest.dim != r:
        raise ValueError(f"destination dim {dest.dim} != state dim {r}")
    if init_cov.shape != (r, r):
        raise ValueError("init covariance shape mismatch")
    w = np.linalg.eigvalsh(0.5 * (init_cov + init_cov.T))
    if w.min() < -1e-10 * max(1.0, abs(w.max())):
        raise ValueError("init covariance must be positive semidefinite")
    mean = np.concatenate([init_mean, dest.mean])
    cov = np.zeros((2 * r, 2 * r))
    cov[:r, :r] = 0.5 * (init_cov + init_cov.T)
    cov[r:, r:] = dest.cov
    return AugmentedPrior(mean, cov)
