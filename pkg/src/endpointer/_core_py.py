"""Batched numpy implementation of the filter-bank observation update.

This is the fallback for the compiled kernel in _core.pyx; the two must
agree to floating-point accuracy (see tests/test_backends.py). The update
runs every active (destination, arrival-time) filter cell through one
predict+correct cycle against the same observation.

Array contract (n = augmented state dim = 2r, k = observation dim):

    means    (N, q, n)      in/out  cell posterior means
    covs     (N, q, n, n)   in/out  cell posterior covariances
    logliks  (N, q)         in/out  accumulated log predictive densities
    active   (q,) uint8     in      column mask; inactive cells untouched
    Hq       (q, r, n)      in      bridged blend rows for the step
    Cq       (q, r, r)      in      bridged step covariance
    moff     (N, q, r)      in      per-destination step offsets
    y        (k,)           in      observation
    G        (k, r)         in      observation matrix on the X block
    V        (k, k)         in      observation noise covariance
    pedls    (N, q)         out     this step's log predictive densities

The predict stage exploits the augmented structure: only the top r rows
of the transition vary (the endpoint block is carried unchanged), and the
process noise lives entirely in the top-left r-by-r corner.
"""

from __future__ import annotations

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))


def bank_kf_step(means, covs, logliks, active, Hq, Cq, moff, y, G, V, pedls):
    q = means.shape[1]
    n = means.shape[2]
    r = n // 2
    k = y.shape[0]
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return

    mu = means[:, idx]          # (N, qa, n)
    P = covs[:, idx]            # (N, qa, n, n)
    H = Hq[idx]                 # (qa, r, n)
    C = Cq[idx]                 # (qa, r, r)
    off = moff[:, idx]          # (N, qa, r)

    # predict: top block blends toward the endpoint, bottom block holds
    zp = np.concatenate(
        [np.einsum("qan,dqn->dqa", H, mu) + off, mu[..., r:]], axis=-1)
    W = np.einsum("qan,dqnm->dqam", H, P)             # (N, qa, r, n)
    Pp = np.empty_like(P)
    Pp[..., :r, :r] = np.einsum("dqam,qbm->dqab", W, H) + C
    Pp[..., :r, r:] = W[..., r:]
    Pp[..., r:, :r] = np.swapaxes(W[..., r:], -1, -2)
    Pp[..., r:, r:] = P[..., r:, r:]
    Pp = 0.5 * (Pp + np.swapaxes(Pp, -1, -2))

    # correct against y through [G, 0]
    innov = y - np.einsum("ka,dqa->dqk", G, zp[..., :r])
    S = np.einsum("ka,dqab,lb->dqkl", G, Pp[..., :r, :r], G) + V
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    L = np.linalg.cholesky(S)   # raises LinAlgError if any cell is not PD
    logdet = 2.0 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum(axis=-1)
    sol = np.linalg.solve(S, innov[..., None])[..., 0]
    quad = np.einsum("dqk,dqk->dq", innov, sol)
    step_logl = -0.5 * (k * LOG_2PI + logdet + quad)

    B = np.einsum("dqnr,kr->dqnk", Pp[..., :, :r], G)
    K = np.swapaxes(np.linalg.solve(S, np.swapaxes(B, -1, -2)), -1, -2)
    mu_new = zp + np.einsum("dqnk,dqk->dqn", K, innov)

    A = np.broadcast_to(np.eye(n), (means.shape[0], idx.size, n, n)).copy()
    A[..., :, :r] -= np.einsum("dqnk,kr->dqnr", K, G)
    P_new = A @ Pp @ np.swapaxes(A, -1, -2) \
        + np.einsum("dqnk,kl,dqml->dqnm", K, V, K)
    P_new = 0.5 * (P_new + np.swapaxes(P_new, -1, -2))

    means[:, idx] = mu_new
    covs[:, idx] = P_new
    logliks[:, idx] += step_logl
    pedls[:, idx] = step_logl
