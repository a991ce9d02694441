"""Track-level inference drivers and success-rate evaluation.

The success signal S(t_n) is 1 when the maximum-probability destination at
observation n matches the track's true destination. Curves aggregate S
against progress through the track (percent of the way from first
observation to arrival), resampled onto a fixed grid of bins so that
tracks of different lengths can be averaged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .baselines import BaselineParams, run_heuristic, run_nobridge
from .intent import ArrivalWindowExceeded, Scenario, init_bank
from .simulate import simulate_batch

METHODS = ("bridge", "nn", "ba", "nobridge")


@dataclass
class TrackResult:
    """Per-observation inference output for one track."""

    times: np.ndarray
    dest_probs: np.ndarray          # (n, N)
    map_index: np.ndarray           # (n,)
    T_grid: np.ndarray | None       # (q,) for the bridge method
    arrival: np.ndarray | None      # (n, q) overall arrival posterior
    method: str


def infer_track(scenario: Scenario, times, ys, q: int = 9,
                method: str = "bridge", eps_min: float = 1e-6,
                fixed_T: float | None = None,
                baseline_params: BaselineParams | None = None) -> TrackResult:
    """Run one method over one observation sequence.

    The bridge method stops early (truncating the outputs) if every
    candidate arrival time lapses before the observations end.
    """
    times = np.asarray(times, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if method == "bridge":
        bank = init_bank(scenario, q=q, eps_min=eps_min, fixed_T=fixed_T)
        probs, maps, arr = [], [], []
        used = 0
        for t, y in zip(times, ys):
            try:
                post = bank.update(y, float(t))
            except ArrivalWindowExceeded:
                break
            probs.append(post.dest_probs)
            maps.append(post.map_index)
            arr.append(post.arrival_overall)
            used += 1
        if used == 0:
            raise ValueError("no observation fell inside the arrival window")
        return TrackResult(times[:used], np.stack(probs),
                           np.asarray(maps, dtype=int), bank.T_grid.copy(),
                           np.stack(arr), "bridge")
    if method in ("nn", "ba"):
        probs, maps = run_heuristic(method, scenario, times, ys,
                                    baseline_params or BaselineParams())
        return TrackResult(times, probs, maps, None, None, method)
    if method == "nobridge":
        probs, maps = run_nobridge(scenario, times, ys)
        return TrackResult(times, probs, maps, None, None, method)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def success_series(map_index, true_dest: int) -> np.ndarray:
    """S(t_n): 1 where the MAP destination is the true one."""
    return (np.asarray(map_index, dtype=int) == int(true_dest)).astype(float)


def proportion_correct(map_index, true_dest: int) -> float:
    """Mean of S over the track's observation times."""
    return float(success_series(map_index, true_dest).mean())


@dataclass
class SuccessCurve:
    """S averaged across tracks against percent progress."""

    centers: np.ndarray     # bin centers in percent
    mean: np.ndarray        # nan where no track contributed
    std: np.ndarray
    count: np.ndarray       # tracks contributing per bin


def resample_to_bins(progress, values, n_bins: int = 50) -> np.ndarray:
    """Nearest-observation resampling of one track onto progress bins.

    Bins with no observation within one bin width are left as nan
    (missing), never zero-filled.
    """
    progress = np.asarray(progress, dtype=float)
    values = np.asarray(values, dtype=float)
    width = 100.0 / n_bins
    centers = (np.arange(n_bins) + 0.5) * width
    out = np.full(n_bins, np.nan)
    for b, c in enumerate(centers):
        j = int(np.argmin(np.abs(progress - c)))
        if abs(progress[j] - c) <= width:
            out[b] = values[j]
    return out


def progress_curve(tracks_progress_values, n_bins: int = 50) -> SuccessCurve:
    """Average resampled series across tracks.

    tracks_progress_values: iterable of (progress array, value array).
    """
    width = 100.0 / n_bins
    centers = (np.arange(n_bins) + 0.5) * width
    rows = np.stack([resample_to_bins(p, v, n_bins)
                     for p, v in tracks_progress_values])
    count = np.sum(~np.isnan(rows), axis=0)
    with warnings.catch_warnings():
        # all-nan bins are expected; they come out masked below
        warnings.simplefilter("ignore", category=RuntimeWarning)
        mean = np.nanmean(np.where(count > 0, rows, np.nan), axis=0)
        std = np.nanstd(np.where(count > 0, rows, np.nan), axis=0)
    mean = np.where(count > 0, mean, np.nan)
    std = np.where(count > 0, std, np.nan)
    return SuccessCurve(centers, mean, std, count)


def track_progress(times, t0: float, T: float) -> np.ndarray:
    """Percent of the way from the first observation to arrival."""
    times = np.asarray(times, dtype=float)
    return 100.0 * (times - t0) / (T - t0)


@dataclass
class EvaluationReport:
    results: list           # TrackResult per track
    per_track: np.ndarray   # proportion correct per track
    curve: SuccessCurve

    @property
    def mean_correct(self) -> float:
        return float(self.per_track.mean())


def evaluate_tracks(scenario: Scenario, tracks_obs, q: int = 9,
                    method: str = "bridge",
                    baseline_params: BaselineParams | None = None,
                    n_bins: int = 50) -> EvaluationReport:
    """Run a method over (track, observations) pairs and aggregate success."""
    results = []
    props = []
    series = []
    for track, obs in tracks_obs:
        res = infer_track(scenario, obs.times, obs.ys, q=q, method=method,
                          baseline_params=baseline_params)
        results.append(res)
        props.append(proportion_correct(res.map_index, track.dest_index))
        prog = track_progress(res.times, float(obs.times[0]), track.T)
        series.append((prog, success_series(res.map_index,
                                            track.dest_index)))
    curve = progress_curve(series, n_bins=n_bins)
    return EvaluationReport(results, np.asarray(props), curve)


def quadrature_study(scenario: Scenario, q_values, n_tracks: int, seed: int,
                     dt: float, rate: float = 1.0):
    """Mean proportion-correct for several grid sizes on shared tracks.

    q = 1 pins the arrival time at the prior's upper endpoint. Returns a
    list of (q, mean, std) rows over the same simulated tracks.
    """
    batch = simulate_batch(scenario, n_tracks, seed, dt, rate=rate)
    rows = []
    for q in q_values:
        report = evaluate_tracks(scenario, batch, q=int(q), method="bridge")
        rows.append((int(q), float(report.per_track.mean()),
                     float(report.per_track.std())))
    return rows
