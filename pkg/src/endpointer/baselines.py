"""Benchmark predictors: heading-free and bridge-free destination inference.

All methods share one reduction: per-destination log-likelihood increments
are accumulated over observations and combined with the destination prior
by a softmax. They differ only in the increment.

  nn        nearness: y_n ~ N(destination position, var I)
  ba        bearing: the angle between the latest displacement and the
            direction to each destination ~ N(0, var)
  nobridge  a plain (unconditioned) Kalman filter per destination on the
            scenario's own motion model; the increment is the filter's
            log predictive density
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .intent import Scenario, normalize_log_weights
from .kalman import FilterState, kf_correct, kf_iterate
from .models import observation_matrix, transition

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class BaselineParams:
    """Variances of the two heuristic baselines."""

    nn_var: float = 1.0
    ba_var: float = 0.25


def nn_log_increments(y, dest_positions, var) -> np.ndarray:
    """log N(y; p_d, var I) for every destination."""
    y = np.asarray(y, dtype=float)
    diff = dest_positions - y[None, :]
    k = y.shape[0]
    return -0.5 * (k * (LOG_2PI + np.log(var))
                   + np.einsum("dk,dk->d", diff, diff) / var)


def bearing_angles(y, y_prev, dest_positions) -> np.ndarray:
    """Angle in [0, pi] between the step y_prev -> y and each direction
    y -> destination. Degenerate geometry (no step, or standing on the
    destination) reads as angle 0."""
    step = np.asarray(y, dtype=float) - np.asarray(y_prev, dtype=float)
    ns = np.linalg.norm(step)
    to_dest = dest_positions - np.asarray(y, dtype=float)[None, :]
    nd = np.linalg.norm(to_dest, axis=1)
    out = np.zeros(dest_positions.shape[0])
    if ns == 0.0:
        return out
    ok = nd > 0.0
    cosang = (to_dest[ok] @ step) / (ns * nd[ok])
    out[ok] = np.arccos(np.clip(cosang, -1.0, 1.0))
    return out


def ba_log_increments(y, y_prev, dest_positions, var) -> np.ndarray:
    """log N(angle; 0, var); a zero step is uninformative (all zeros)."""
    if np.array_equal(np.asarray(y, dtype=float),
                      np.asarray(y_prev, dtype=float)):
        return np.zeros(dest_positions.shape[0])
    ang = bearing_angles(y, y_prev, dest_positions)
    return -0.5 * (LOG_2PI + np.log(var) + ang ** 2 / var)


def run_heuristic(method: str, scenario: Scenario, times, ys,
                  params: BaselineParams):
    """Sequential nn/ba posterior over destinations.

    Returns (dest_probs (n, N), map_index (n,)).
    """
    ys = np.asarray(ys, dtype=float)
    n = ys.shape[0]
    s = scenario.model.dims
    pos = np.stack([d.position(s) for d in scenario.destinations])
    log_prior = scenario.dest_log_priors()
    acc = np.zeros(len(scenario.destinations))
    probs = np.empty((n, len(scenario.destinations)))
    maps = np.empty(n, dtype=int)
    for j in range(n):
        if method == "nn":
            acc = acc + nn_log_increments(ys[j], pos, params.nn_var)
        elif method == "ba":
            if j > 0:
                acc = acc + ba_log_increments(ys[j], ys[j - 1], pos,
                                              params.ba_var)
        else:
            raise ValueError(f"unknown heuristic {method!r}")
        probs[j] = normalize_log_weights(acc + log_prior)
        maps[j] = int(np.argmax(probs[j]))
    return probs, maps


def run_nobridge(scenario: Scenario, times, ys):
    """Per-destination plain Kalman filters, no endpoint conditioning.

    For destination-driven models the transition still pulls toward each
    candidate destination; what is missing is the arrival-time bridge.
    Returns (dest_probs (n, N), map_index (n,)).
    """
    times = np.asarray(times, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n = times.shape[0]
    N = len(scenario.destinations)
    G = observation_matrix(scenario.model)
    V = scenario.obs_noise
    log_prior = scenario.dest_log_priors()

    states = []
    acc = np.zeros(N)
    for d in range(N):
        logl, mean, cov = kf_correct(scenario.init_mean, scenario.init_cov,
                                     ys[0], G, V)
        states.append(FilterState(mean, cov, logl, 1, float(times[0])))
        acc[d] = logl

    probs = np.empty((n, N))
    maps = np.empty(n, dtype=int)
    probs[0] = normalize_log_weights(acc + log_prior)
    maps[0] = int(np.argmax(probs[0]))
    for j in range(1, n):
        h = float(times[j] - times[j - 1])
        for d, dest in enumerate(scenario.destinations):
            tri = transition(scenario.model, h, dest)
            logl, states[d] = kf_iterate(states[d], ys[j], tri.F, tri.M,
                                         tri.Q, G, V, h=h)
            acc[d] += logl
        probs[j] = normalize_log_weights(acc + log_prior)
        maps[j] = int(np.argmax(probs[j]))
    return probs, maps


def fit_nn_variance(obs_sets, dest_positions_per_track) -> float:
    """Closed-form MLE of the nn variance from labelled tracks.

    obs_sets: list of (n_j, k) observation arrays; dest_positions_per_track:
    the true destination position for each track.
    """
    total = 0.0
    count = 0
    for ys, p in zip(obs_sets, dest_positions_per_track):
        ys = np.asarray(ys, dtype=float)
        diff = ys - np.asarray(p, dtype=float)[None, :]
        total += float((diff ** 2).sum())
        count += diff.size
    if count == 0:
        raise ValueError("no observations to fit")
    return total / count


def fit_ba_variance(obs_sets, dest_positions_per_track) -> float:
    """Closed-form MLE of the bearing variance from labelled tracks."""
    total = 0.0
    count = 0
    for ys, p in zip(obs_sets, dest_positions_per_track):
        ys = np.asarray(ys, dtype=float)
        pos = np.asarray(p, dtype=float)[None, :]
        for j in range(1, ys.shape[0]):
            if np.array_equal(ys[j], ys[j - 1]):
                continue
            ang = bearing_angles(ys[j], ys[j - 1], pos)
            total += float(ang[0] ** 2)
            count += 1
    if count == 0:
        raise ValueError("no usable steps to fit")
    return total / count
