"""Destination, arrival-time and state inference from a stream of observations.

A FilterBank maintains one endpoint-conditioned Kalman filter per
(destination, candidate arrival time) pair. Each observation updates every
active cell and yields:

  * a posterior over destinations (arrival time integrated out by Simpson
    quadrature over the candidate grid),
  * a posterior over arrival times (per destination and overall),
  * a Gaussian-mixture posterior over the current state,
  * Gaussian-mixture predictions of the future state.

Candidate arrival times form a fixed odd-length grid spanning the arrival
prior's support. A column whose arrival time has effectively passed
(remaining time below eps_min) is deactivated: it keeps its last state and
contributes nothing from then on. When every column has lapsed the bank
raises ArrivalWindowExceeded.

Quadrature coefficients enter only the per-destination evidence integral.
The arrival-time weights, the overall arrival posterior, and the mixture
weights over cells are plain normalized products of each cell's likelihood
chain with the arrival-prior density and the destination prior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .bridge import EPS_MIN_DEFAULT, bank_step_blocks
from .gaussian import GaussianMixture
from .models import Destination, ModelParams, observation_matrix, transition_parts


class ArrivalWindowExceeded(RuntimeError):
    """Every candidate arrival time lies in the past: the bank is exhausted."""

    def __init__(self, t: float):
        super().__init__(
            f"observation at t={t} is past every candidate arrival time")
        self.t = t


class TimeRegression(ValueError):
    """Observation times must be strictly increasing."""


# ---------------------------------------------------------------------------
# arrival priors


@dataclass(frozen=True)
class UniformArrival:
    """Uniform arrival-time prior on [lower, upper]."""

    lower: float
    upper: float

    def __post_init__(self):
        if not (self.upper > self.lower):
            raise ValueError("need upper > lower")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    def log_density(self, T) -> np.ndarray:
        T = np.asarray(T, dtype=float)
        inside = (T >= self.lower) & (T <= self.upper)
        return np.where(inside, -np.log(self.upper - self.lower), -np.inf)

    def sample(self, rng) -> float:
        return float(rng.uniform(self.lower, self.upper))


@dataclass(frozen=True)
class TabulatedArrival:
    """Piecewise-linear arrival-time density through (t, density) points.

    The table is renormalized at construction so that the trapezoid
    integral over its support is one.
    """

    t_points: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_points, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if t.ndim != 1 or t.shape != d.shape or t.shape[0] < 2:
            raise ValueError("need matching 1-d tables with >= 2 points")
        if np.any(np.diff(t) <= 0):
            raise ValueError("t_points must be strictly increasing")
        if np.any(d < 0) or not np.any(d > 0):
            raise ValueError("density must be nonnegative and not all zero")
        mass = np.trapezoid(d, t)
        object.__setattr__(self, "t_points", t)
        object.__setattr__(self, "density", d / mass)

    @classmethod
    def from_histogram(cls, edges, masses) -> "TabulatedArrival":
        """Bin-mass histogram to a density table over the same support."""
        edges = np.asarray(edges, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if edges.shape[0] != masses.shape[0] + 1:
            raise ValueError("need len(edges) == len(masses) + 1")
        widths = np.diff(edges)
        dens = masses / widths
        centers = 0.5 * (edges[:-1] + edges[1:])
        t = np.concatenate([[edges[0]], centers, [edges[-1]]])
        d = np.concatenate([[dens[0]], dens, [dens[-1]]])
        return cls(t, d)

    @property
    def support(self) -> tuple[float, float]:
        return (float(self.t_points[0]), float(self.t_points[-1]))

    def log_density(self, T) -> np.ndarray:
        T = np.asarray(T, dtype=float)
        dens = np.interp(T, self.t_points, self.density, left=0.0, right=0.0)
        with np.errstate(divide="ignore"):
            return np.where(dens > 0.0, np.log(np.maximum(dens, 1e-300)), -np.inf)

    def sample(self, rng) -> float:
        grid = np.linspace(self.t_points[0], self.t_points[-1], 1025)
        pdf = np.interp(grid, self.t_points, self.density)
        cdf = np.concatenate([[0.0], np.cumsum(
            0.5 * (pdf[1:] + pdf[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]
        return float(np.interp(rng.uniform(), cdf, grid))


# ---------------------------------------------------------------------------
# scenario


@dataclass
class Scenario:
    """Everything a filter bank needs: model, endpoints, priors, noise.

    arrival may be a single prior shared by every destination or a list
    with one prior per destination; all priors must share one support so
    the candidate grid is common.
    """

    model: ModelParams
    destinations: list[Destination]
    arrival: object
    obs_noise: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray
    name: str = ""

    def __post_init__(self):
        if not self.destinations:
            raise ValueError("need at least one destination")
        r = self.model.state_dim
        for d in self.destinations:
            if d.dim != r:
                raise ValueError(
                    f"destination '{d.name}' dim {d.dim} != state dim {r}")
        total = sum(d.prior for d in self.destinations)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"destination priors sum to {total}, expected 1")
        for d in self.destinations:
            d.prior = d.prior / total
        k = self.model.obs_dim
        self.obs_noise = np.atleast_2d(np.asarray(self.obs_noise, dtype=float))
        if self.obs_noise.shape != (k, k):
            raise ValueError("obs_noise shape mismatch")
        self.init_mean = np.atleast_1d(np.asarray(self.init_mean, dtype=float))
        self.init_cov = np.atleast_2d(np.asarray(self.init_cov, dtype=float))
        if self.init_mean.shape[0] != r or self.init_cov.shape != (r, r):
            raise ValueError("initial state prior shape mismatch")
        supports = {p.support for p in self.arrival_list()}
        if len(supports) != 1:
            raise ValueError("all arrival priors must share one support")

    def arrival_list(self) -> list:
        if isinstance(self.arrival, (list, tuple)):
            if len(self.arrival) != len(self.destinations):
                raise ValueError("need one arrival prior per destination")
            return list(self.arrival)
        return [self.arrival] * len(self.destinations)

    @property
    def n_dest(self) -> int:
        return len(self.destinations)

    @property
    def arrival_support(self) -> tuple[float, float]:
        return self.arrival_list()[0].support

    def dest_means(self) -> np.ndarray:
        return np.stack([d.mean for d in self.destinations])

    def dest_log_priors(self) -> np.ndarray:
        return np.log(np.array([d.prior for d in self.destinations]))


# ---------------------------------------------------------------------------
# quadrature


def simpson_coefficients(T_grid) -> np.ndarray:
    """Composite-Simpson weights for a uniform odd-length grid.

    A single-point grid gets weight 1 (degenerate fixed-arrival mode).
    """
    T_grid = np.asarray(T_grid, dtype=float)
    q = T_grid.shape[0]
    if q == 1:
        return np.ones(1)
    if q % 2 == 0 or q < 3:
        raise ValueError("Simpson quadrature needs an odd number of points >= 3")
    gaps = np.diff(T_grid)
    if np.any(gaps <= 0) or not np.allclose(gaps, gaps[0], rtol=1e-9):
        raise ValueError("T grid must be uniformly spaced and increasing")
    c = np.ones(q)
    c[1:-1:2] = 4.0
    c[2:-1:2] = 2.0
    return c * (gaps[0] / 3.0)


def logsumexp(logs, axis=None):
    logs = np.asarray(logs, dtype=float)
    m = np.max(logs, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(logs - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.ravel()[0])
    return np.squeeze(out, axis=axis)


def simpson_log_marginal(log_values, T_grid, log_prior=None) -> float:
    """log of the Simpson integral of exp(log_values) [times a prior] over T_grid.

    log_prior, when given, holds the log prior density at the grid points.
    Deactivated columns should carry -inf in log_values; they contribute
    zero to the integral.
    """
    log_values = np.asarray(log_values, dtype=float)
    c = simpson_coefficients(T_grid)
    total = log_values + np.log(c)
    if log_prior is not None:
        total = total + np.asarray(log_prior, dtype=float)
    return float(logsumexp(total))


def normalize_log_weights(logw) -> np.ndarray:
    """Softmax of a log-weight array; raises if everything is -inf."""
    logw = np.asarray(logw, dtype=float)
    m = logw.max()
    if not np.isfinite(m):
        raise ValueError("cannot normalize: all log weights are -inf")
    p = np.exp(logw - m)
    return p / p.sum()


# ---------------------------------------------------------------------------
# posteriors snapshot


@dataclass(frozen=True)
class Posteriors:
    """Everything inferred after one observation.

    dest_probs sums to one; arrival_overall and each active row of
    arrival_by_dest sum to one over active columns; mixture_weights is the
    joint cell posterior (sums to one over active cells) and doubles as
    the component weights of the state mixture.
    """

    t: float
    n_obs: int
    T_grid: np.ndarray
    active: np.ndarray
    dest_probs: np.ndarray
    map_index: int
    arrival_by_dest: np.ndarray
    arrival_overall: np.ndarray
    mixture_weights: np.ndarray
    log_dest_marginals: np.ndarray


# ---------------------------------------------------------------------------
# the bank


class FilterBank:
    """Bank of endpoint-conditioned filters over destinations x arrival times.

    Build with init_bank(); feed observations through update(). All
    per-cell state lives in dense arrays so the whole bank updates in one
    kernel call.
    """

    def __init__(self, scenario: Scenario, q: int,
                 eps_min: float = EPS_MIN_DEFAULT,
                 fixed_T: float | None = None):
        if q < 1:
            raise ValueError("q must be >= 1")
        if q > 1 and q % 2 == 0:
            raise ValueError("q must be odd (Simpson quadrature) or exactly 1")
        if fixed_T is not None and q != 1:
            raise ValueError("fixed_T requires q == 1")
        self.scenario = scenario
        self.q = int(q)
        self.eps_min = float(eps_min)

        lo, hi = scenario.arrival_support
        if fixed_T is not None:
            self.T_grid = np.array([float(fixed_T)])
        elif q == 1:
            self.T_grid = np.array([hi])
        else:
            self.T_grid = np.linspace(lo, hi, q)

        self.params: ModelParams = scenario.model
        r = self.params.state_dim
        n = 2 * r
        N = scenario.n_dest
        self.r = r
        self.n_dest = N

        self.G = observation_matrix(self.params)
        self.V = scenario.obs_noise
        self.k = self.G.shape[0]

        self.means = np.empty((N, q, n))
        self.covs = np.empty((N, q, n, n))
        for d, dest in enumerate(scenario.destinations):
            self.means[d, :, :r] = scenario.init_mean
            self.means[d, :, r:] = dest.mean
            self.covs[d] = 0.0
            self.covs[d, :, :r, :r] = scenario.init_cov
            self.covs[d, :, r:, r:] = dest.cov
        self.logliks = np.zeros((N, q))
        self.active = np.ones(q, dtype=bool)
        self.t_now: float | None = None
        self.n_obs = 0

        self._dest_means = scenario.dest_means()
        self._log_prior_dest = scenario.dest_log_priors()
        if self.q == 1:
            self._log_prior_T = np.zeros((N, 1))
        else:
            self._log_prior_T = np.stack(
                [p.log_density(self.T_grid) for p in scenario.arrival_list()])
        self._simpson = simpson_coefficients(self.T_grid)
        # first-observation blend: identity on the current block
        self._H_first = np.zeros((q, r, n))
        self._H_first[:, :, :r] = np.eye(r)
        self._C_first = np.zeros((q, r, r))
        self._m_first = np.zeros((N, q, r))

    # -- core update ----------------------------------------------------

    def update(self, y, t: float) -> Posteriors:
        """Absorb one observation at time t and return fresh posteriors."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (self.k,):
            raise ValueError(f"observation shape {y.shape} != ({self.k},)")
        if not np.all(np.isfinite(y)):
            raise ValueError("observation has non-finite entries")
        t = float(t)
        if self.t_now is not None and t <= self.t_now:
            raise TimeRegression(
                f"observation time {t} does not advance past {self.t_now}")

        usable = self.active & ((self.T_grid - t) >= self.eps_min)
        if not usable.any():
            raise ArrivalWindowExceeded(t)
        self.active = usable

        if self.t_now is None:
            Hq, Cq, moff = self._H_first, self._C_first, self._m_first
        else:
            h = t - self.t_now
            taus = self.T_grid[usable] - t
            Ha, Ca, ma = bank_step_blocks(self.params, h, taus,
                                          self._dest_means)
            Hq = np.zeros((self.q, self.r, 2 * self.r))
            Cq = np.zeros((self.q, self.r, self.r))
            moff = np.zeros((self.n_dest, self.q, self.r))
            Hq[usable] = Ha
            Cq[usable] = Ca
            moff[:, usable] = ma

        pedls = np.full((self.n_dest, self.q), np.nan)
        _backend.bank_kf_step(self.means, self.covs, self.logliks,
                              usable.astype(np.uint8), Hq, Cq, moff, y,
                              self.G, self.V, pedls)
        self.t_now = t
        self.n_obs += 1
        return self.posteriors()

    # -- posteriors -----------------------------------------------------

    def _masked_logliks(self) -> np.ndarray:
        out = np.where(self.active[None, :], self.logliks, -np.inf)
        return out

    def posteriors(self) -> Posteriors:
        """Posteriors from the current bank state (after >= 1 observation)."""
        if self.n_obs == 0:
            raise ValueError("no observations absorbed yet")
        ll = self._masked_logliks()

        if self.q == 1:
            log_marg = ll[:, 0]
        else:
            with np.errstate(invalid="ignore"):
                body = ll + self._log_prior_T + np.log(self._simpson)[None, :]
            log_marg = logsumexp(body, axis=1)

        dest_probs = normalize_log_weights(log_marg + self._log_prior_dest)
        map_index = int(np.argmax(dest_probs))

        # arrival posteriors and mixture weights: plain products, no
        # quadrature coefficients
        cell = ll + self._log_prior_T
        w = np.empty_like(cell)
        for d in range(self.n_dest):
            w[d] = normalize_log_weights(cell[d])
        joint = cell + self._log_prior_dest[:, None]
        mix = normalize_log_weights(joint.reshape(-1)).reshape(joint.shape)
        v = mix.sum(axis=0)

        return Posteriors(
            t=float(self.t_now), n_obs=self.n_obs, T_grid=self.T_grid.copy(),
            active=self.active.copy(), dest_probs=dest_probs,
            map_index=map_index, arrival_by_dest=w, arrival_overall=v,
            mixture_weights=mix, log_dest_marginals=log_marg)

    # -- state and prediction -------------------------------------------

    def state_estimate(self) -> GaussianMixture:
        """Mixture posterior over the current state X_t."""
        post = self.posteriors()
        return self._mixture_from_cells(
            post.mixture_weights,
            lambda d, i: (self.means[d, i, :self.r],
                          self.covs[d, i, :self.r, :self.r]))

    def predict_future(self, t_star: float) -> GaussianMixture:
        """Mixture forecast of the state at a later time t_star.

        Cells whose arrival time is at or before t_star contribute their
        arrival-state posterior (the object has landed and holds);
        the rest are pushed forward with a predict-only bridged step.
        """
        if self.n_obs == 0:
            raise ValueError("no observations absorbed yet")
        t_star = float(t_star)
        if t_star < self.t_now:
            raise ValueError(f"t_star {t_star} precedes current time {self.t_now}")
        post = self.posteriors()
        r = self.r
        h = t_star - self.t_now

        arrive = (self.T_grid - t_star) < self.eps_min
        fly_cols = np.flatnonzero(self.active & ~arrive)
        blocks = {}
        if h > 0 and fly_cols.size:
            taus = self.T_grid[fly_cols] - t_star
            Ha, Ca, ma = bank_step_blocks(self.params, h, taus,
                                          self._dest_means)
            blocks = {int(c): j for j, c in enumerate(fly_cols)}

        def component(d, i):
            if i in blocks:
                j = blocks[i]
                z = self.means[d, i]
                P = self.covs[d, i]
                mean = Ha[j] @ z + ma[d, j]
                cov = Ha[j] @ P @ Ha[j].T + Ca[j]
                return mean, 0.5 * (cov + cov.T)
            if self.active[i] and not arrive[i] and h == 0.0:
                return self.means[d, i, :r], self.covs[d, i, :r, :r]
            # arrived: the state is the endpoint block
            return self.means[d, i, r:], self.covs[d, i, r:, r:]

        return self._mixture_from_cells(post.mixture_weights, component)

    def _mixture_from_cells(self, weights, component) -> GaussianMixture:
        r = self.r
        ws, mus, Ps, tags = [], [], [], []
        for d in range(self.n_dest):
            for i in range(self.q):
                if not self.active[i]:
                    continue
                mean, cov = component(d, i)
                ws.append(weights[d, i])
                mus.append(mean)
                Ps.append(cov)
                tags.append((d, float(self.T_grid[i])))
        ws = np.asarray(ws)
        ws = ws / ws.sum()
        return GaussianMixture(ws, np.stack(mus), np.stack(Ps), tags)


def init_bank(scenario: Scenario, q: int, eps_min: float = EPS_MIN_DEFAULT,
              fixed_T: float | None = None) -> FilterBank:
    """Fresh filter bank over the scenario's destinations and arrival grid."""
    return FilterBank(scenario, q, eps_min=eps_min, fixed_T=fixed_T)


def update(bank: FilterBank, y, t: float) -> Posteriors:
    """Functional alias for bank.update()."""
    return bank.update(y, t)


def destination_posterior(bank: FilterBank) -> np.ndarray:
    return bank.posteriors().dest_probs


def map_destination(bank: FilterBank) -> int:
    """Index of the maximum-probability destination (ties: lowest index)."""
    return bank.posteriors().map_index


def arrival_posterior(bank: FilterBank, dest: int | None = None) -> np.ndarray:
    """Arrival-time posterior over the grid: overall, or for one destination."""
    post = bank.posteriors()
    if dest is None:
        return post.arrival_overall
    return post.arrival_by_dest[dest]


def state_estimate(bank: FilterBank) -> GaussianMixture:
    return bank.state_estimate()


def predict_future(bank: FilterBank, t_star: float) -> GaussianMixture:
    return bank.predict_future(t_star)
