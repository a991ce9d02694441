"""Continuous-time linear-Gaussian motion models and their exact discretizations.

Each model is a linear SDE whose transition over a step of length h is
Gaussian: X_{t+h} | X_t ~ N(F X_t + M, Q). F, M, Q are computed in closed
form where one exists (bm, mrd, cv) and by matrix exponentials otherwise
(erv, with the process-noise integral done by matrix fraction
decomposition). The discretizations are exact, so they satisfy the
semigroup property: stepping h1 then h2 equals stepping h1 + h2.

Model kinds
-----------
bm   position-only random walk, state dim s
mrd  mean-reverting diffusion pulled toward a destination point, dim s
cv   position + velocity with white-noise acceleration, dim 2s
erv  position + velocity reverting toward a destination with drag, dim 2s
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm


class ModelKind(str, enum.Enum):
    BM = "bm"
    MRD = "mrd"
    CV = "cv"
    ERV = "erv"

    @property
    def has_velocity(self) -> bool:
        return self in (ModelKind.CV, ModelKind.ERV)

    @property
    def destination_driven(self) -> bool:
        """Whether the transition mean depends on the destination."""
        return self in (ModelKind.MRD, ModelKind.ERV)


def _coerce_matrix(value, s: int, name: str) -> np.ndarray:
    """Accept a scalar, a length-s diagonal, or a full s-by-s matrix."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(s)
    if arr.ndim == 1:
        if arr.shape[0] != s:
            raise ValueError(f"{name}: expected {s} diagonal entries, got {arr.shape[0]}")
        return np.diag(arr)
    if arr.shape != (s, s):
        raise ValueError(f"{name}: expected shape ({s}, {s}), got {arr.shape}")
    return arr.copy()


@dataclass
class ModelParams:
    """Parameters of one motion model.

    sigma is the s-by-s diffusion matrix (noise enters as sigma dW on the
    position block for bm/mrd and on the velocity block for cv/erv). lam,
    eta and rho are the mean-reversion rate, restoring strength and drag;
    each is stored as an s-by-s matrix (diagonal in the common case).
    """

    kind: ModelKind
    dims: int
    sigma: np.ndarray
    lam: np.ndarray | None = None
    eta: np.ndarray | None = None
    rho: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.kind = ModelKind(self.kind)
        s = int(self.dims)
        if s < 1:
            raise ValueError("dims must be positive")
        self.dims = s
        self.sigma = _coerce_matrix(self.sigma, s, "sigma")
        for name in ("lam", "eta", "rho"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, _coerce_matrix(v, s, name))
        if self.kind is ModelKind.MRD:
            if self.lam is None:
                raise ValueError("mrd requires lam")
            if not np.allclose(self.lam, np.diag(np.diag(self.lam))):
                raise ValueError("mrd lam must be diagonal")
            if np.any(np.diag(self.lam) < 0):
                raise ValueError("mrd lam must be nonnegative")
        if self.kind is ModelKind.ERV:
            if self.eta is None or self.rho is None:
                raise ValueError("erv requires eta and rho")

    # -- constructors ---------------------------------------------------

    @classmethod
    def bm(cls, sigma, dims: int = 2) -> "ModelParams":
        return cls(ModelKind.BM, dims, _coerce_matrix(sigma, dims, "sigma"))

    @classmethod
    def mrd(cls, lam, sigma, dims: int = 2) -> "ModelParams":
        return cls(ModelKind.MRD, dims, _coerce_matrix(sigma, dims, "sigma"),
                   lam=_coerce_matrix(lam, dims, "lam"))

    @classmethod
    def cv(cls, sigma, dims: int = 2) -> "ModelParams":
        return cls(ModelKind.CV, dims, _coerce_matrix(sigma, dims, "sigma"))

    @classmethod
    def erv(cls, eta, rho, sigma, dims: int = 2) -> "ModelParams":
        return cls(ModelKind.ERV, dims, _coerce_matrix(sigma, dims, "sigma"),
                   eta=_coerce_matrix(eta, dims, "eta"),
                   rho=_coerce_matrix(rho, dims, "rho"))

    # -- derived shapes -------------------------------------------------

    @property
    def state_dim(self) -> int:
        return 2 * self.dims if self.kind.has_velocity else self.dims

    @property
    def obs_dim(self) -> int:
        return self.dims

    def drift_matrix(self) -> np.ndarray:
        """The matrix A in dX = -A (X - mu) dt + B dW for erv.

        State ordering is [position, velocity], so
        A = [[0, -I], [eta, rho]].
        """
        if self.kind is not ModelKind.ERV:
            raise ValueError("drift_matrix is defined for erv only")
        s = self.dims
        a = np.zeros((2 * s, 2 * s))
        a[:s, s:] = -np.eye(s)
        a[s:, :s] = self.eta
        a[s:, s:] = self.rho
        return a

    def diffusion_outer(self) -> np.ndarray:
        """sigma @ sigma.T, the instantaneous noise covariance rate."""
        return self.sigma @ self.sigma.T


@dataclass
class Destination:
    """One candidate endpoint: a Gaussian over the model's full state.

    mean has the model's state dimension (position, then velocity for
    cv/erv). cov may be singular, including exactly zero for a point
    destination. prior is the prior probability mass of this destination.
    """

    mean: np.ndarray
    cov: np.ndarray
    prior: float = 1.0
    name: str = ""

    def __post_init__(self) -> None:
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        r = self.mean.shape[0]
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.cov.shape != (r, r):
            raise ValueError(f"destination cov shape {self.cov.shape} != ({r}, {r})")
        self.cov = 0.5 * (self.cov + self.cov.T)
        w = np.linalg.eigvalsh(self.cov)
        if w.size and w.min() < -1e-10 * max(1.0, abs(w.max())):
            raise ValueError("destination cov must be positive semidefinite")
        if not (self.prior >= 0.0):
            raise ValueError("destination prior must be nonnegative")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def position(self, dims: int) -> np.ndarray:
        """Position block of the destination mean."""
        return self.mean[:dims]


@dataclass(frozen=True)
class TransitionTriple:
    """Exact discrete transition over a step: X' | X ~ N(F X + M, Q)."""

    F: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    h: float


def observation_matrix(params: ModelParams) -> np.ndarray:
    """Linear map from model state to the observed position."""
    s = params.dims
    if params.kind.has_velocity:
        return np.hstack([np.eye(s), np.zeros((s, s))])
    return np.eye(s)


def mfd_covariance(A: np.ndarray, sigma: np.ndarray, h: float) -> np.ndarray:
    """Process-noise covariance of dX = -A X dt + B dW over a step h.

    B injects sigma-noise into the velocity block (the lower half of the
    state). Computed by matrix fraction decomposition: exponentiate the
    doubled block matrix [[-A, BB'], [0, A']], read off J = Phi_12 and
    K = Phi_22, and return J K^{-1}.

    Raises np.linalg.LinAlgError when K is numerically singular, which
    signals an ill-conditioned parameter/step combination.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    if h < 0:
        raise ValueError("h must be nonnegative")
    if h == 0.0:
        return np.zeros((n, n))
    s = sigma.shape[0]
    bbt = np.zeros((n, n))
    bbt[n - s:, n - s:] = sigma @ sigma.T
    blk = np.zeros((2 * n, 2 * n))
    blk[:n, :n] = -A
    blk[:n, n:] = bbt
    blk[n:, n:] = A.T
    phi = expm(blk * h)
    J = phi[:n, n:]
    K = phi[n:, n:]
    try:
        Q = np.linalg.solve(K.T, J.T).T
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"matrix fraction denominator singular at h={h}"
        ) from exc
    return 0.5 * (Q + Q.T)


def _mrd_noise_scale(lam_diag: np.ndarray, h: float) -> np.ndarray:
    """Elementwise (1 - exp(-(li+lj) h)) / (li+lj), with the li+lj -> 0 limit h."""
    a = lam_diag[:, None] + lam_diag[None, :]
    out = np.full_like(a, h, dtype=float)
    nz = a > 0.0
    out[nz] = -np.expm1(-a[nz] * h) / a[nz]
    return out


def transition(params: ModelParams, h: float,
               dest: Destination | None = None) -> TransitionTriple:
    """Exact transition triple (F, M, Q) for one step of length h.

    dest supplies the attractor for destination-driven kinds (mrd, erv)
    and is ignored otherwise. h = 0 returns the identity triple.
    """
    if h < 0:
        raise ValueError("h must be nonnegative")
    r = params.state_dim
    if params.kind.destination_driven:
        if dest is None:
            raise ValueError(f"{params.kind.value} transition requires a destination")
        if dest.dim != r:
            raise ValueError(f"destination dim {dest.dim} != state dim {r}")
    if h == 0.0:
        return TransitionTriple(np.eye(r), np.zeros(r), np.zeros((r, r)), 0.0)

    s = params.dims
    ssT = params.diffusion_outer()

    if params.kind is ModelKind.BM:
        return TransitionTriple(np.eye(s), np.zeros(s), h * ssT, h)

    if params.kind is ModelKind.MRD:
        lam_diag = np.diag(params.lam)
        F = np.diag(np.exp(-lam_diag * h))
        M = (np.eye(s) - F) @ dest.mean
        Q = ssT * _mrd_noise_scale(lam_diag, h)
        return TransitionTriple(F, M, 0.5 * (Q + Q.T), h)

    if params.kind is ModelKind.CV:
        F = np.eye(2 * s)
        F[:s, s:] = h * np.eye(s)
        Q = np.zeros((2 * s, 2 * s))
        Q[:s, :s] = ssT * (h ** 3 / 3.0)
        Q[:s, s:] = ssT * (h ** 2 / 2.0)
        Q[s:, :s] = ssT * (h ** 2 / 2.0)
        Q[s:, s:] = ssT * h
        return TransitionTriple(F, np.zeros(2 * s), Q, h)

    # erv
    A = params.drift_matrix()
    F = expm(-A * h)
    M = (np.eye(2 * s) - F) @ dest.mean
    Q = mfd_covariance(A, params.sigma, h)
    return TransitionTriple(F, M, Q, h)


def transition_parts(params: ModelParams, hs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched (F, Q, Mf) over an array of step lengths.

    Mf is the destination-mean factor: the transition offset for
    destination d is Mf @ d.mean (identically zero for bm/cv, where Mf is
    returned as zeros). Shapes: hs (m,) -> F (m,r,r), Q (m,r,r), Mf (m,r,r).
    """
    hs = np.atleast_1d(np.asarray(hs, dtype=float))
    if np.any(hs < 0):
        raise ValueError("step lengths must be nonnegative")
    m = hs.shape[0]
    r = params.state_dim
    s = params.dims
    ssT = params.diffusion_outer()
    F = np.empty((m, r, r))
    Q = np.empty((m, r, r))
    Mf = np.zeros((m, r, r))

    if params.kind is ModelKind.BM:
        F[:] = np.eye(s)
        Q[:] = hs[:, None, None] * ssT
        return F, Q, Mf

    if params.kind is ModelKind.MRD:
        lam_diag = np.diag(params.lam)
        decay = np.exp(-np.outer(hs, lam_diag))
        F[:] = 0.0
        F[:, np.arange(s), np.arange(s)] = decay
        a = lam_diag[:, None] + lam_diag[None, :]
        scale = np.where(a > 0.0,
                         -np.expm1(-a[None, :, :] * hs[:, None, None])
                         / np.where(a > 0.0, a, 1.0)[None, :, :],
                         hs[:, None, None])
        Q[:] = ssT[None, :, :] * scale
        Mf[:] = np.eye(s)[None] - F
        return F, Q, Mf

    if params.kind is ModelKind.CV:
        F[:] = np.eye(r)
        F[:, :s, s:] = hs[:, None, None] * np.eye(s)
        Q[:, :s, :s] = ssT * (hs ** 3 / 3.0)[:, None, None]
        Q[:, :s, s:] = ssT * (hs ** 2 / 2.0)[:, None, None]
        Q[:, s:, :s] = Q[:, :s, s:]
        Q[:, s:, s:] = ssT * hs[:, None, None]
        return F, Q, Mf

    A = params.drift_matrix()
    eye = np.eye(r)
    for i, h in enumerate(hs):
        if h == 0.0:
            F[i] = eye
            Q[i] = 0.0
        else:
            F[i] = expm(-A * h)
            Q[i] = mfd_covariance(A, params.sigma, float(h))
        Mf[i] = eye - F[i]
    return F, Q, Mf
