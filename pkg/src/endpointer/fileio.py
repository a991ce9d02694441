"""Scenario documents (YAML) and result files (CSV / JSON).

A scenario document (.scn) is YAML with sections

  name:          optional scenario name
  model:         kind (bm / mrd / cv / erv), dims, and parameters
  destinations:  list of {name, mean, cov, prior}
  arrival:       shared prior, or a list of priors (one per destination)
  observation:   {noise: ...}
  initial:       {mean: ..., cov: ...}
  simulate:      optional defaults for track generation (dt, rate, seed)

Matrix-valued entries accept a scalar (multiple of the identity), a list
(diagonal), or nested lists (full matrix), and are written back in the
most compact of those forms. Floats in CSV files are written with %.9g,
which round-trips the double precision that matters here.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import yaml

from .gaussian import GaussianMixture
from .intent import Scenario, TabulatedArrival, UniformArrival
from .models import Destination, ModelKind, ModelParams
from .simulate import ObservationSet, Track

FLOAT_FMT = "%.9g"


def _fmt(x) -> str:
    return FLOAT_FMT % float(x)


# ---------------------------------------------------------------------------
# matrix specs


def matrix_from_spec(spec, dim: int) -> np.ndarray:
    """Scalar, diagonal list, or nested list to a (dim, dim) array."""
    if np.isscalar(spec):
        return float(spec) * np.eye(dim)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"diagonal spec has {arr.shape[0]} entries, "
                             f"expected {dim}")
        return np.diag(arr)
    if arr.shape != (dim, dim):
        raise ValueError(f"matrix spec shape {arr.shape}, expected "
                         f"({dim}, {dim})")
    return arr


def matrix_to_spec(mat: np.ndarray):
    """Most compact YAML-friendly form of a square matrix."""
    mat = np.asarray(mat, dtype=float)
    d = np.diag(mat)
    if np.array_equal(mat, np.diag(d)):
        if d.size > 0 and np.all(d == d[0]):
            return float(d[0])
        return [float(v) for v in d]
    return [[float(v) for v in row] for row in mat]


# ---------------------------------------------------------------------------
# scenario documents


def _model_from_section(sec: dict) -> ModelParams:
    kind = ModelKind(sec["kind"])
    dims = int(sec.get("dims", 2))
    sigma = sec.get("sigma", 1.0)
    if kind is ModelKind.BM:
        return ModelParams.bm(sigma, dims=dims)
    if kind is ModelKind.MRD:
        return ModelParams.mrd(sec["lam"], sigma, dims=dims)
    if kind is ModelKind.CV:
        return ModelParams.cv(sigma, dims=dims)
    return ModelParams.erv(sec["eta"], sec["rho"], sigma, dims=dims)


def _model_to_section(params: ModelParams) -> dict:
    sec = {"kind": params.kind.value, "dims": params.dims,
           "sigma": matrix_to_spec(params.sigma)}
    if params.lam is not None:
        sec["lam"] = matrix_to_spec(params.lam)
    if params.eta is not None:
        sec["eta"] = matrix_to_spec(params.eta)
    if params.rho is not None:
        sec["rho"] = matrix_to_spec(params.rho)
    return sec


def _arrival_from_section(sec):
    if isinstance(sec, list):
        return [_arrival_from_section(s) for s in sec]
    kind = sec.get("kind", "uniform")
    if kind == "uniform":
        return UniformArrival(float(sec["lower"]), float(sec["upper"]))
    if kind == "tabulated":
        return TabulatedArrival(np.asarray(sec["t"], dtype=float),
                                np.asarray(sec["density"], dtype=float))
    raise ValueError(f"unknown arrival kind {kind!r}")


def _arrival_to_section(arrival):
    if isinstance(arrival, (list, tuple)):
        return [_arrival_to_section(a) for a in arrival]
    if isinstance(arrival, UniformArrival):
        return {"kind": "uniform", "lower": float(arrival.lower),
                "upper": float(arrival.upper)}
    if isinstance(arrival, TabulatedArrival):
        return {"kind": "tabulated",
                "t": [float(v) for v in arrival.t_points],
                "density": [float(v) for v in arrival.density]}
    raise ValueError(f"cannot serialize arrival {type(arrival).__name__}")


def scenario_from_dict(doc: dict) -> Scenario:
    model = _model_from_section(doc["model"])
    r = model.state_dim
    dests = []
    for j, sec in enumerate(doc["destinations"]):
        dests.append(Destination(
            np.asarray(sec["mean"], dtype=float),
            matrix_from_spec(sec.get("cov", 0.0), r),
            prior=float(sec.get("prior", 1.0 / len(doc["destinations"]))),
            name=str(sec.get("name", f"d{j}"))))
    arrival = _arrival_from_section(doc["arrival"])
    obs = matrix_from_spec(doc["observation"]["noise"], model.obs_dim)
    init = doc["initial"]
    return Scenario(model, dests, arrival, obs,
                    np.asarray(init["mean"], dtype=float),
                    matrix_from_spec(init["cov"], r),
                    name=str(doc.get("name", "")))


def scenario_to_dict(scenario: Scenario,
                     simulate_defaults: dict | None = None) -> dict:
    doc = {
        "name": scenario.name,
        "model": _model_to_section(scenario.model),
        "destinations": [
            {"name": d.name,
             "mean": [float(v) for v in d.mean],
             "cov": matrix_to_spec(d.cov),
             "prior": float(d.prior)}
            for d in scenario.destinations
        ],
        "arrival": _arrival_to_section(scenario.arrival),
        "observation": {"noise": matrix_to_spec(scenario.obs_noise)},
        "initial": {"mean": [float(v) for v in scenario.init_mean],
                    "cov": matrix_to_spec(scenario.init_cov)},
    }
    if simulate_defaults:
        doc["simulate"] = dict(simulate_defaults)
    return doc


def packaged_scenario_dir() -> Path:
    """Directory of the scenario documents shipped with the package."""
    return Path(__file__).parent / "scenarios"


def resolve_scenario(spec) -> Path:
    """A filesystem path as-is, or a bare name against the packaged set."""
    p = Path(spec)
    if p.exists():
        return p
    candidate = packaged_scenario_dir() / f"{spec}.scn"
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"scenario not found: {spec!r} is neither a "
                            f"file nor a packaged scenario name")


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return scenario_from_dict(doc)


def load_simulate_defaults(path) -> dict:
    """The optional simulate section of a scenario document ({} if absent)."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return dict(doc.get("simulate") or {})


def save_scenario(scenario: Scenario, path,
                  simulate_defaults: dict | None = None) -> None:
    doc = scenario_to_dict(scenario, simulate_defaults)
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# CSV tables


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = list(r)
    return header, rows


def write_track_csv(path, track: Track) -> None:
    r = track.states.shape[1]
    header = ["t"] + [f"x{j + 1}" for j in range(r)]
    rows = [[_fmt(t)] + [_fmt(v) for v in x]
            for t, x in zip(track.times, track.states)]
    _write_csv(path, header, rows)


def read_track_csv(path):
    """(times, states) from a track table; labels live in the manifest."""
    header, rows = _read_csv(path)
    data = np.asarray(rows, dtype=float)
    return data[:, 0], data[:, 1:]


def write_observations_csv(path, obs: ObservationSet) -> None:
    k = obs.ys.shape[1]
    header = ["t"] + [f"y{j + 1}" for j in range(k)]
    rows = [[_fmt(t)] + [_fmt(v) for v in y]
            for t, y in zip(obs.times, obs.ys)]
    _write_csv(path, header, rows)


def read_observations_csv(path) -> ObservationSet:
    header, rows = _read_csv(path)
    data = np.asarray(rows, dtype=float)
    return ObservationSet(data[:, 0], data[:, 1:])


def write_posterior_csv(path, times, map_index, dest_probs,
                        arrival_overall=None) -> None:
    """Per-observation posterior log: t, MAP index, u_i, and optionally
    the arrival-time weights v_i."""
    dest_probs = np.asarray(dest_probs, dtype=float)
    n_dest = dest_probs.shape[1]
    header = ["t", "map"] + [f"u_{j + 1}" for j in range(n_dest)]
    arr = None
    if arrival_overall is not None:
        arr = np.asarray(arrival_overall, dtype=float)
        header += [f"v_{j + 1}" for j in range(arr.shape[1])]
    rows = []
    for j, (t, m) in enumerate(zip(times, map_index)):
        row = [_fmt(t), str(int(m))] + [_fmt(v) for v in dest_probs[j]]
        if arr is not None:
            row += [_fmt(v) for v in arr[j]]
        rows.append(row)
    _write_csv(path, header, rows)


def read_posterior_csv(path) -> dict:
    header, rows = _read_csv(path)
    data = np.asarray(rows, dtype=float)
    n_dest = sum(1 for h in header if h.startswith("u_"))
    n_arr = sum(1 for h in header if h.startswith("v_"))
    out = {"times": data[:, 0], "map_index": data[:, 1].astype(int),
           "dest_probs": data[:, 2:2 + n_dest]}
    if n_arr:
        out["arrival"] = data[:, 2 + n_dest:2 + n_dest + n_arr]
    return out


def write_curve_csv(path, curve) -> None:
    header = ["center", "mean", "std", "count"]
    rows = [[_fmt(c), "nan" if np.isnan(m) else _fmt(m),
             "nan" if np.isnan(s) else _fmt(s), str(int(n))]
            for c, m, s, n in zip(curve.centers, curve.mean, curve.std,
                                  curve.count)]
    _write_csv(path, header, rows)


def write_summary_csv(path, rows) -> None:
    """rows: iterable of (method, q, n_tracks, mean_correct)."""
    _write_csv(path, ["method", "q", "n_tracks", "mean_correct"],
               [[m, str(int(q)), str(int(n)), _fmt(p)]
                for m, q, n, p in rows])


def write_quadrature_csv(path, rows) -> None:
    """rows: iterable of (q, mean, std) from a quadrature study."""
    _write_csv(path, ["q", "mean", "std"],
               [[str(int(q)), _fmt(m), _fmt(s)] for q, m, s in rows])


def write_mixture_csv(path, mixture: GaussianMixture) -> None:
    """One component per row: weight, mean entries, covariance row-major."""
    r = mixture.means[0].shape[0]
    header = (["weight"] + [f"m_{j + 1}" for j in range(r)]
              + [f"c_{a + 1}_{b + 1}" for a in range(r) for b in range(r)])
    rows = []
    for w, m, c in zip(mixture.weights, mixture.means, mixture.covs):
        rows.append([_fmt(w)] + [_fmt(v) for v in m]
                    + [_fmt(v) for v in np.asarray(c).ravel()])
    _write_csv(path, header, rows)


def write_fit_fragment(path, params: ModelParams) -> None:
    """Fitted model as a scenario-document fragment (the model section)."""
    with open(path, "w") as fh:
        yaml.safe_dump({"model": _model_to_section(params)}, fh,
                       sort_keys=False)


def write_fit_table_csv(path, table) -> None:
    """Grid-search table: one row per combination plus its log evidence."""
    if not table:
        raise ValueError("empty fit table")
    names = list(table[0][0].keys())
    header = names + ["log_evidence"]
    rows = [[_fmt(combo[n]) for n in names]
            + ["-inf" if not np.isfinite(ll) else _fmt(ll)]
            for combo, ll in table]
    _write_csv(path, header, rows)


# ---------------------------------------------------------------------------
# batch manifests


def write_manifest(path, scenario_path, seed, dt, rate, entries) -> None:
    """Batch manifest tying result files back to their generator.

    entries: list of dicts with id, seed_index, dest_index, dest_name, T,
    track_csv, obs_csv (paths relative to the manifest's directory).
    """
    doc = {
        "scenario": str(scenario_path),
        "scenario_sha256": file_sha256(scenario_path),
        "seed": int(seed),
        "dt": float(dt),
        "rate": float(rate),
        "tracks": entries,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
