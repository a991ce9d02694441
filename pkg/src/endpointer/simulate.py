"""Sampling endpoint-conditioned tracks and noisy observations of them.

A simulated track draws its endpoint first (from the destination's
Gaussian), then walks the bridged dynamics step by step so the path is an
exact draw from the conditioned process: the final state equals the drawn
endpoint exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bridge import EPS_MIN_DEFAULT, conditioned_transition
from .intent import Scenario
from .models import observation_matrix


@dataclass
class Track:
    """One simulated trajectory with its generating labels."""

    times: np.ndarray
    states: np.ndarray
    dest_index: int
    T: float

    @property
    def n_points(self) -> int:
        return self.times.shape[0]


@dataclass
class ObservationSet:
    """Noisy linear observations of a track at a subset of its times."""

    times: np.ndarray
    ys: np.ndarray


def psd_draw(rng, mean, cov) -> np.ndarray:
    """Draw from N(mean, cov) where cov may be singular or exactly zero."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if not cov.any():
        return mean.copy()
    w, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    w = np.clip(w, 0.0, None)
    return mean + (vecs * np.sqrt(w)) @ rng.standard_normal(mean.shape[0])


def sample_bridged_track(scenario: Scenario, dest_index: int, T: float,
                         dt: float, rng, t0: float = 0.0,
                         eps_min: float = EPS_MIN_DEFAULT) -> Track:
    """Exact draw of a track that starts from the prior and lands at a
    sampled endpoint at time T.

    Interior points sit on the regular grid t0, t0+dt, ...; the final
    point is (T, X_T) exactly. A grid point closer than eps_min to T is
    dropped (the bridged step there is degenerate).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T <= t0:
        raise ValueError("arrival time must exceed the start time")
    dest = scenario.destinations[dest_index]
    params = scenario.model

    x_end = psd_draw(rng, dest.mean, dest.cov)
    x = psd_draw(rng, scenario.init_mean, scenario.init_cov)

    n_steps = int(np.floor((T - t0) / dt + 1e-12))
    times = t0 + dt * np.arange(n_steps + 1)
    if T - times[-1] < eps_min:
        times = times[:-1]

    states = [x]
    z = np.concatenate([x, x_end])
    for j in range(len(times) - 1):
        at = conditioned_transition(params, dest, t=float(times[j]),
                                    h=float(times[j + 1] - times[j]), T=T,
                                    eps_min=min(eps_min, 1e-12))
        mean = (at.R @ z + at.m)[:params.state_dim]
        x = psd_draw(rng, mean, at.U[:params.state_dim, :params.state_dim])
        z = np.concatenate([x, x_end])
        states.append(x)

    times = np.concatenate([times, [T]])
    states.append(x_end)
    return Track(times, np.stack(states), int(dest_index), float(T))


def sample_scenario_track(scenario: Scenario, rng, dt: float,
                          t0: float = 0.0) -> Track:
    """Draw (destination, arrival time) from the priors, then the track."""
    priors = np.array([d.prior for d in scenario.destinations])
    dest_index = int(rng.choice(len(priors), p=priors / priors.sum()))
    T = scenario.arrival_list()[dest_index].sample(rng)
    return sample_bridged_track(scenario, dest_index, T, dt, rng, t0=t0)


def observe(track: Track, noise_cov, rng, rate: float = 1.0) -> ObservationSet:
    """Noisy position observations of a track.

    rate in (0, 1] is the independent keep-probability per track point
    (the first point is always kept so inference can start); rate 1 keeps
    every point. Observation noise is drawn from N(0, noise_cov), which
    may be zero for exact observations.
    """
    if not (0.0 < rate <= 1.0):
        raise ValueError("rate must be in (0, 1]")
    noise_cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    keep = np.ones(track.n_points, dtype=bool)
    if rate < 1.0:
        keep = rng.uniform(size=track.n_points) < rate
        keep[0] = True
    times = track.times[keep]
    k = noise_cov.shape[0]
    s = track.states.shape[1]
    if k == s:
        pos = track.states[keep]
    else:
        pos = track.states[keep][:, :k]
    ys = np.stack([psd_draw(rng, p, noise_cov) for p in pos])
    return ObservationSet(times, ys)


def track_rng(master_seed: int, index: int):
    """Deterministic per-track generator stream."""
    return np.random.default_rng([int(master_seed), int(index)])


def simulate_batch(scenario: Scenario, n_tracks: int, seed: int, dt: float,
                   rate: float = 1.0):
    """Reproducible batch: returns a list of (track, observations)."""
    out = []
    for j in range(n_tracks):
        rng = track_rng(seed, j)
        track = sample_scenario_track(scenario, rng, dt)
        obs = observe(track, scenario.obs_noise, rng, rate=rate)
        out.append((track, obs))
    return out
