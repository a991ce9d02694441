"""Maximum-likelihood parameter fitting from labelled tracks.

Model parameters are fit by exhaustive grid search: for every parameter
combination the bridged evidence of each training track is computed with
the track's known destination and arrival time (a single-column bank), and
the combination with the largest total log evidence wins. Exact ties pick
the smaller parameter vector, then the earlier combination in iteration
order, so the result is deterministic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .intent import ArrivalWindowExceeded, Scenario, init_bank
from .models import Destination, ModelKind, ModelParams


@dataclass
class LabelledTrack:
    """Observations plus the generating labels needed for fitting."""

    times: np.ndarray
    ys: np.ndarray
    dest_index: int
    T: float


@dataclass
class FitResult:
    params: ModelParams
    log_lik: float
    table: list  # (combo dict, total log evidence) per grid point


def build_params(kind: ModelKind, dims: int, values: dict) -> ModelParams:
    """ModelParams from scalar named values (dimension-shared)."""
    kind = ModelKind(kind)
    sigma = values.get("sigma", 1.0)
    if kind is ModelKind.BM:
        return ModelParams.bm(sigma, dims=dims)
    if kind is ModelKind.MRD:
        return ModelParams.mrd(values["lam"], sigma, dims=dims)
    if kind is ModelKind.CV:
        return ModelParams.cv(sigma, dims=dims)
    return ModelParams.erv(values["eta"], values["rho"], sigma, dims=dims)


def track_log_evidence(params: ModelParams, scenario: Scenario,
                       track: LabelledTrack, eps_min: float) -> float:
    """Bridged log evidence of one track under known (destination, T).

    Observations at or past the pinned arrival time have no bridged step
    and are dropped.
    """
    dest = scenario.destinations[track.dest_index]
    single = Scenario(params, [Destination(dest.mean, dest.cov, 1.0,
                                           dest.name)],
                      scenario.arrival, scenario.obs_noise,
                      scenario.init_mean, scenario.init_cov)
    bank = init_bank(single, q=1, eps_min=eps_min, fixed_T=track.T)
    usable = track.times < track.T - eps_min
    total = None
    for t, y in zip(track.times[usable], track.ys[usable]):
        post = bank.update(y, float(t))
        total = post.log_dest_marginals[0]
    if total is None:
        raise ValueError("track has no usable observations before arrival")
    return float(total)


def fit_params(tracks: list[LabelledTrack], scenario: Scenario,
               kind: ModelKind, grids: dict,
               eps_min: float = 1e-6) -> FitResult:
    """Grid-search MLE of the motion-model parameters.

    grids maps parameter names (lam / eta / rho / sigma) to value arrays;
    parameters absent from grids keep the value in scenario.model (or 1.0
    for sigma if the scenario's model is of a different kind).
    """
    kind = ModelKind(kind)
    dims = scenario.model.dims
    names = list(grids.keys())
    axes = [np.asarray(grids[n], dtype=float) for n in names]

    defaults = {}
    if scenario.model.kind is kind:
        defaults["sigma"] = float(np.mean(np.diag(scenario.model.sigma)))
        if scenario.model.lam is not None:
            defaults["lam"] = float(np.mean(np.diag(scenario.model.lam)))
        if scenario.model.eta is not None:
            defaults["eta"] = float(np.mean(np.diag(scenario.model.eta)))
        if scenario.model.rho is not None:
            defaults["rho"] = float(np.mean(np.diag(scenario.model.rho)))

    table = []
    best = None  # (ll, -norm marker handled below)
    for combo in itertools.product(*axes):
        values = dict(defaults)
        values.update({n: float(v) for n, v in zip(names, combo)})
        try:
            params = build_params(kind, dims, values)
            total = 0.0
            for track in tracks:
                total += track_log_evidence(params, scenario, track, eps_min)
        except (np.linalg.LinAlgError, ArrivalWindowExceeded, ValueError):
            total = -np.inf
        entry = ({n: float(v) for n, v in zip(names, combo)}, float(total))
        table.append(entry)
        norm = float(np.linalg.norm(combo))
        if best is None:
            best = (total, norm, entry[0])
        else:
            bll, bnorm, _ = best
            if total > bll or (total == bll and norm < bnorm):
                best = (total, norm, entry[0])

    if best is None or not np.isfinite(best[0]):
        raise ValueError("no grid point produced a finite log evidence")
    values = dict(defaults)
    values.update(best[2])
    return FitResult(build_params(kind, dims, values), float(best[0]), table)
