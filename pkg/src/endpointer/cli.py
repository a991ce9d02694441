"""Command-line interface.

Subcommands cover the whole workflow: simulate a labelled batch, fit model
parameters from it, run inference on one observation file, evaluate
methods over a batch, compare arrival-grid sizes, dump a future-state
mixture, and serve the streaming API.

Exit codes: 0 success, 2 usage error, 3 data error (missing or
inconsistent files, out-of-window observations), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .baselines import BaselineParams
from .bridge import BridgeNumericalError
from .evaluate import (
    METHODS,
    evaluate_tracks,
    infer_track,
    quadrature_study,
)
from .fit import LabelledTrack, fit_params
from .intent import ArrivalWindowExceeded, TimeRegression, init_bank
from .models import ModelKind
from .simulate import ObservationSet, Track, simulate_batch

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class DataError(Exception):
    """A file or its contents cannot be used as requested."""


def _load_scenario(spec: str):
    try:
        p = fileio.resolve_scenario(spec)
    except FileNotFoundError as exc:
        raise DataError(str(exc)) from exc
    try:
        return fileio.load_scenario(p)
    except Exception as exc:
        raise DataError(f"cannot parse scenario {p}: {exc}") from exc


def _load_batch(manifest_path: str):
    """(scenario, [(Track, ObservationSet)], manifest doc) from a manifest."""
    mp = Path(manifest_path)
    if not mp.exists():
        raise DataError(f"manifest not found: {mp}")
    doc = fileio.read_manifest(mp)
    scn_path = Path(doc["scenario"])
    if not scn_path.is_absolute():
        scn_path = mp.parent / scn_path
    scenario = _load_scenario(scn_path)
    batch = []
    for entry in doc["tracks"]:
        times, states = fileio.read_track_csv(mp.parent / entry["track_csv"])
        obs = fileio.read_observations_csv(mp.parent / entry["obs_csv"])
        track = Track(times, states, int(entry["dest_index"]),
                      float(entry["T"]))
        batch.append((track, obs))
    return scenario, batch, doc


def _parse_grid_axis(text: str):
    """name=lo:hi:step or name=v1,v2,... to (name, values)."""
    if "=" not in text:
        raise DataError(f"bad grid spec {text!r}; expected name=lo:hi:step "
                        "or name=v1,v2,...")
    name, _, body = text.partition("=")
    name = name.strip()
    if name not in ("lam", "eta", "rho", "sigma"):
        raise DataError(f"unknown grid parameter {name!r}")
    try:
        if ":" in body:
            lo, hi, step = (float(v) for v in body.split(":"))
            values = np.arange(lo, hi + 0.5 * step, step)
        else:
            values = np.array([float(v) for v in body.split(",")])
    except ValueError as exc:
        raise DataError(f"bad grid spec {text!r}: {exc}") from exc
    if values.size == 0:
        raise DataError(f"grid spec {text!r} produced no values")
    return name, values


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    scn_path = fileio.resolve_scenario(args.scenario)
    defaults = fileio.load_simulate_defaults(scn_path)
    dt = args.dt if args.dt is not None else float(defaults.get("dt", 1.0))
    rate = (args.rate if args.rate is not None
            else float(defaults.get("rate", 1.0)))
    seed = (args.seed if args.seed is not None
            else int(defaults.get("seed", 0)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    batch = simulate_batch(scenario, args.n, seed=seed, dt=dt, rate=rate)
    entries = []
    for j, (track, obs) in enumerate(batch):
        tid = f"track{j:03d}"
        track_csv = f"{tid}.csv"
        obs_csv = f"{tid}_obs.csv"
        fileio.write_track_csv(out / track_csv, track)
        fileio.write_observations_csv(out / obs_csv, obs)
        entries.append({
            "id": tid, "seed_index": j,
            "dest_index": track.dest_index,
            "dest_name": scenario.destinations[track.dest_index].name,
            "T": track.T, "track_csv": track_csv, "obs_csv": obs_csv,
        })
    fileio.write_manifest(out / "manifest.json", scn_path.resolve(),
                          seed, dt, rate, entries)
    print(f"wrote {len(batch)} tracks to {out}/ (seed {seed}, dt {dt:g})")
    return EXIT_OK


def cmd_infer(args) -> int:
    scenario = _load_scenario(args.scenario)
    obs_path = Path(args.obs)
    if not obs_path.exists():
        raise DataError(f"observation file not found: {obs_path}")
    obs = fileio.read_observations_csv(obs_path)
    result = infer_track(scenario, obs.times, obs.ys, q=args.q,
                         method=args.method,
                         baseline_params=BaselineParams(args.nn_var,
                                                        args.ba_var))
    if args.out:
        fileio.write_posterior_csv(args.out, result.times, result.map_index,
                                   result.dest_probs, result.arrival)
    last = result.map_index[-1]
    name = scenario.destinations[last].name
    print(f"{len(result.times)} observations used; final MAP destination "
          f"{last} ({name}) p={result.dest_probs[-1, last]:.4f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    scenario, batch, doc = _load_batch(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    methods = args.methods.split(",") if args.methods else ["bridge"]
    summary = []
    for method in methods:
        method = method.strip()
        if method not in METHODS:
            raise DataError(f"unknown method {method!r}; "
                            f"expected one of {METHODS}")
        report = evaluate_tracks(scenario, batch, q=args.q, method=method,
                                 baseline_params=BaselineParams(
                                     args.nn_var, args.ba_var),
                                 n_bins=args.bins)
        fileio.write_curve_csv(out / f"curve_{method}.csv", report.curve)
        summary.append((method, args.q if method == "bridge" else 0,
                        len(batch), report.mean_correct))
        print(f"{method:<9} mean proportion correct "
              f"{report.mean_correct:.4f} over {len(batch)} tracks")
    fileio.write_summary_csv(out / "summary.csv", summary)
    return EXIT_OK


def cmd_fit(args) -> int:
    scenario, batch, doc = _load_batch(args.manifest)
    tracks = [LabelledTrack(obs.times, obs.ys, track.dest_index, track.T)
              for track, obs in batch]
    grids = dict(_parse_grid_axis(spec) for spec in args.grid)
    kind = ModelKind(args.kind) if args.kind else scenario.model.kind
    result = fit_params(tracks, scenario, kind, grids)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_fit_fragment(out / "fitted_model.yaml", result.params)
    fileio.write_fit_table_csv(out / "fit_table.csv", result.table)
    best = max(result.table, key=lambda e: e[1])
    pretty = ", ".join(f"{k}={v:g}" for k, v in best[0].items())
    print(f"best fit: {pretty} (log evidence {result.log_lik:.4f}) "
          f"over {len(result.table)} grid points")
    return EXIT_OK


def cmd_quadstudy(args) -> int:
    scenario = _load_scenario(args.scenario)
    defaults = fileio.load_simulate_defaults(fileio.resolve_scenario(
        args.scenario))
    dt = args.dt if args.dt is not None else float(defaults.get("dt", 1.0))
    q_values = [int(v) for v in args.q.split(",")]
    rows = quadrature_study(scenario, q_values, n_tracks=args.n,
                            seed=args.seed, dt=dt, rate=args.rate or 1.0)
    for q, mean, std in rows:
        print(f"q={q:<3d} mean={mean:.4f} std={std:.4f}")
    if args.out:
        fileio.write_quadrature_csv(args.out, rows)
    return EXIT_OK


def cmd_predict(args) -> int:
    scenario = _load_scenario(args.scenario)
    obs_path = Path(args.obs)
    if not obs_path.exists():
        raise DataError(f"observation file not found: {obs_path}")
    obs = fileio.read_observations_csv(obs_path)
    mask = obs.times <= args.upto
    if not mask.any():
        raise DataError(f"no observations at or before t={args.upto:g}")
    bank = init_bank(scenario, q=args.q)
    for t, y in zip(obs.times[mask], obs.ys[mask]):
        bank.update(y, float(t))
    mixture = bank.predict_future(args.at)
    if args.out:
        fileio.write_mixture_csv(args.out, mixture)
    mean = mixture.mean()
    print(f"mixture of {mixture.n_components} components at t={args.at:g} "
          f"after {int(mask.sum())} observations; mean position "
          + np.array2string(mean[:scenario.model.obs_dim], precision=3))
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        import uvicorn
    except ImportError as exc:
        raise DataError(f"serving requires uvicorn: {exc}") from exc
    from .service import build_app

    app = build_app(scenario_dir=args.scenario_dir, demo=args.demo)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="endpointer",
        description="Destination and arrival-time inference for tracked "
                    "objects.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a labelled batch of tracks")
    p.add_argument("--scenario", required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("infer", help="destination posterior for one track")
    p.add_argument("--scenario", required=True)
    p.add_argument("--obs", required=True,
                   help="observations CSV (t, y1, ...)")
    p.add_argument("--q", type=int, default=9)
    p.add_argument("--method", default="bridge", choices=METHODS)
    p.add_argument("--nn-var", type=float, default=1.0)
    p.add_argument("--ba-var", type=float, default=0.25)
    p.add_argument("--out", default=None, help="posterior CSV to write")
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("evaluate", help="success rates over a batch")
    p.add_argument("--manifest", required=True)
    p.add_argument("--methods", default="bridge",
                   help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("--q", type=int, default=9)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--nn-var", type=float, default=1.0)
    p.add_argument("--ba-var", type=float, default=0.25)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("fit", help="grid-search model parameters")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", default=None,
                   choices=[k.value for k in ModelKind])
    p.add_argument("--grid", action="append", required=True,
                   metavar="NAME=LO:HI:STEP",
                   help="repeatable; also accepts NAME=v1,v2,...")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("quadstudy",
                       help="accuracy against arrival-grid size")
    p.add_argument("--scenario", required=True)
    p.add_argument("--q", default="1,3,9,15",
                   help="comma-separated grid sizes")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_quadstudy)

    p = sub.add_parser("predict", help="future-state mixture for one track")
    p.add_argument("--scenario", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--upto", type=float, required=True,
                   help="use observations with t <= this")
    p.add_argument("--at", type=float, required=True,
                   help="time to predict the state at")
    p.add_argument("--q", type=int, default=9)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("serve", help="run the streaming inference service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--scenario-dir", default=None,
                   help="directory of .scn files (default: packaged ones)")
    p.add_argument("--demo", action="store_true",
                   help="also serve the browser demo if it has been built")
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TimeRegression, ArrivalWindowExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (json.JSONDecodeError, KeyError) as exc:
        print(f"error: malformed input file ({exc})", file=sys.stderr)
        return EXIT_DATA
    except (BridgeNumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
