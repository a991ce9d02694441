"""Streaming inference over WebSocket, plus a small HTTP surface.

One WebSocket connection carries one session: the client starts it by
naming a scenario (optionally overriding the destination layout and
supplying an affine transform from its own coordinates into model
coordinates), then streams timestamped observations and receives the
destination / arrival-time posterior after each one. Errors are reported
in-band and leave the session usable; a reset starts the filter bank over
without renegotiating the configuration.

The message protocol is JSON, one object per WebSocket text frame, with a
``v`` version field. docs/protocol.md in the repository describes every
message. The service sends an application-level ping after an idle period
so half-open connections surface early.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import __version__, _backend
from .bridge import BridgeNumericalError
from .fileio import load_scenario, packaged_scenario_dir
from .intent import (
    ArrivalWindowExceeded,
    FilterBank,
    Scenario,
    TimeRegression,
    init_bank,
)
from .models import Destination

PROTOCOL_VERSION = 1
PING_IDLE_SECONDS = 5.0
MAX_Q = 51
MAX_MESSAGE_BYTES = 1 << 20


class ProtocolError(Exception):
    """A client message that cannot be acted on; carries an error code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class Transform:
    """Affine map from client coordinates into model coordinates."""

    scale: float = 1.0
    offset: np.ndarray | None = None
    time_scale: float = 1.0

    def position(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = self.scale * y
        if self.offset is not None:
            out = out + self.offset
        return out

    def time(self, t: float) -> float:
        return self.time_scale * float(t)


def _parse_transform(sec, obs_dim: int) -> Transform:
    if sec is None:
        return Transform()
    if not isinstance(sec, dict):
        raise ProtocolError("bad_message", "transform must be an object")
    scale = float(sec.get("scale", 1.0))
    time_scale = float(sec.get("time_scale", 1.0))
    if scale == 0.0 or time_scale <= 0.0:
        raise ProtocolError("bad_message",
                            "transform scale must be nonzero and "
                            "time_scale positive")
    offset = None
    if "offset" in sec:
        offset = np.asarray(sec["offset"], dtype=float)
        if offset.shape != (obs_dim,):
            raise ProtocolError("bad_message",
                                f"offset must have {obs_dim} entries")
    return Transform(scale, offset, time_scale)


def _override_destinations(scenario: Scenario, sec,
                           transform: Transform) -> Scenario:
    """New scenario with the destination layout the client asked for.

    Positions arrive in client coordinates and are mapped through the
    transform; covariance and the (uniform) prior come from the scenario's
    first destination, so the override only moves endpoints around.
    """
    if not isinstance(sec, dict) or "positions" not in sec:
        raise ProtocolError("bad_message",
                            "destinations override needs a positions list")
    positions = sec["positions"]
    if not isinstance(positions, list) or not positions:
        raise ProtocolError("bad_message", "positions must be a nonempty "
                                           "list")
    names = sec.get("names")
    if names is not None and len(names) != len(positions):
        raise ProtocolError("bad_message", "names length must match "
                                           "positions")
    template = scenario.destinations[0]
    r = scenario.model.state_dim
    k = scenario.model.obs_dim
    dests = []
    for j, pos in enumerate(positions):
        pos = np.asarray(pos, dtype=float)
        if pos.shape != (k,):
            raise ProtocolError("bad_message",
                                f"each position must have {k} entries")
        mean = np.zeros(r)
        mean[:k] = transform.position(pos)
        name = str(names[j]) if names else f"d{j}"
        dests.append(Destination(mean, template.cov.copy(),
                                 prior=1.0 / len(positions), name=name))
    return Scenario(scenario.model, dests, scenario.arrival,
                    scenario.obs_noise, scenario.init_mean,
                    scenario.init_cov, name=scenario.name)


@dataclass
class Session:
    scenario: Scenario
    bank: FilterBank
    transform: Transform
    q: int

    def reset(self) -> None:
        self.bank = init_bank(self.scenario, q=self.q)


def _scenario_summary(name: str, scenario: Scenario) -> dict:
    k = scenario.model.obs_dim
    return {
        "name": name,
        "model_kind": scenario.model.kind.value,
        "obs_dim": k,
        "n_dest": scenario.n_dest,
        "dest_names": [d.name for d in scenario.destinations],
        "dest_positions": [[float(v) for v in d.position(k)]
                           for d in scenario.destinations],
        "arrival_support": [float(v) for v in scenario.arrival_support],
    }


def _ack(session: Session) -> dict:
    doc = _scenario_summary(session.scenario.name, session.scenario)
    return {"v": PROTOCOL_VERSION, "type": "ack", "q": session.q,
            "backend": _backend.backend_name(), **doc}


def _posterior_message(session: Session, post, latency_us: int) -> dict:
    return {
        "v": PROTOCOL_VERSION,
        "type": "posterior",
        "t": float(session.bank.t_now),
        "dest_probs": [float(v) for v in post.dest_probs],
        "map": int(post.map_index),
        "arrival": {
            "T_grid": [float(v) for v in session.bank.T_grid],
            "v": [float(v) for v in post.arrival_overall],
        },
        "latency_us": int(latency_us),
    }


def _prediction_message(at: float, mixture, top: int | None) -> dict:
    weights = np.asarray(mixture.weights, dtype=float)
    order = np.argsort(weights)[::-1]
    if top is not None:
        order = order[:max(1, int(top))]
    return {
        "v": PROTOCOL_VERSION,
        "type": "prediction",
        "at": float(at),
        "weights": [float(weights[j]) for j in order],
        "weight_sum": float(weights[order].sum()),
        "means": [[float(v) for v in mixture.means[j]] for j in order],
        "covs": [[[float(v) for v in row] for row in mixture.covs[j]]
                 for j in order],
    }


def _error(code: str, message: str) -> dict:
    return {"v": PROTOCOL_VERSION, "type": "error", "code": code,
            "message": message}


def load_scenarios(scenario_dir=None) -> dict:
    """name -> Scenario for every .scn file in the directory."""
    root = Path(scenario_dir) if scenario_dir else packaged_scenario_dir()
    out = {}
    for path in sorted(root.glob("*.scn")):
        out[path.stem] = load_scenario(path)
    if not out:
        raise FileNotFoundError(f"no .scn files in {root}")
    return out


def build_app(scenario_dir=None, demo: bool = False, demo_dir=None,
              ping_idle: float = PING_IDLE_SECONDS) -> FastAPI:
    scenarios = load_scenarios(scenario_dir)
    app = FastAPI(title="endpointer", version=__version__)

    @app.get("/healthz")
    async def healthz():
        return {"status": "ok", "version": __version__,
                "backend": _backend.backend_name(),
                "scenarios": sorted(scenarios)}

    @app.get("/scenarios")
    async def list_scenarios():
        return {"scenarios": [_scenario_summary(name, sc)
                              for name, sc in sorted(scenarios.items())]}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session: Session | None = None

        async def send(doc: dict) -> None:
            await ws.send_text(json.dumps(doc))

        while True:
            try:
                text = await asyncio.wait_for(ws.receive_text(),
                                              timeout=ping_idle)
            except asyncio.TimeoutError:
                await send({"v": PROTOCOL_VERSION, "type": "ping"})
                continue
            except WebSocketDisconnect:
                return

            try:
                session, reply = _handle_message(scenarios, session, text)
            except ProtocolError as exc:
                await send(_error(exc.code, str(exc)))
                continue
            except TimeRegression as exc:
                await send(_error("time_regression", str(exc)))
                continue
            except ArrivalWindowExceeded as exc:
                await send(_error("window_exceeded", str(exc)))
                continue
            except (BridgeNumericalError, np.linalg.LinAlgError) as exc:
                await send(_error("numerical", str(exc)))
                continue
            except ValueError as exc:
                await send(_error("bad_message", str(exc)))
                continue
            if reply is not None:
                await send(reply)

    if demo:
        from fastapi.staticfiles import StaticFiles

        root = Path(demo_dir) if demo_dir else _default_demo_dir()
        if not (root / "index.html").exists():
            raise FileNotFoundError(
                f"demo assets not found at {root}; build the frontend "
                f"first (npm run build in frontend/)")
        app.mount("/", StaticFiles(directory=root, html=True), name="demo")

    return app


def _default_demo_dir() -> Path:
    return Path(__file__).resolve().parents[2] / "frontend" / "dist"


def _handle_message(scenarios: dict, session: Session | None, text: str):
    """Returns (session, reply dict or None); raises for in-band errors."""
    if len(text.encode()) > MAX_MESSAGE_BYTES:
        raise ProtocolError("bad_message", "message too large")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError("bad_message", f"not valid JSON: {exc}")
    if not isinstance(doc, dict) or "type" not in doc:
        raise ProtocolError("bad_message", "expected an object with a type")
    if doc.get("v", PROTOCOL_VERSION) != PROTOCOL_VERSION:
        raise ProtocolError("bad_message",
                            f"unsupported protocol version {doc.get('v')!r}")
    kind = doc["type"]

    if kind == "start":
        name = doc.get("scenario")
        if name not in scenarios:
            raise ProtocolError("unknown_scenario",
                                f"unknown scenario {name!r}; available: "
                                + ", ".join(sorted(scenarios)))
        scenario = scenarios[name]
        q = int(doc.get("q", 9))
        if not (1 <= q <= MAX_Q):
            raise ProtocolError("bad_message",
                                f"q must be in [1, {MAX_Q}]")
        transform = _parse_transform(doc.get("transform"),
                                     scenario.model.obs_dim)
        if "destinations" in doc:
            scenario = _override_destinations(scenario,
                                              doc["destinations"], transform)
        try:
            bank = init_bank(scenario, q=q)
        except ValueError as exc:
            raise ProtocolError("bad_message", str(exc))
        session = Session(scenario, bank, transform, q)
        return session, _ack(session)

    if kind == "pong":
        return session, None

    if session is None:
        raise ProtocolError("no_session", "send a start message first")

    if kind == "observe":
        if "t" not in doc or "y" not in doc:
            raise ProtocolError("bad_message", "observe needs t and y")
        try:
            t = session.transform.time(doc["t"])
            y = session.transform.position(doc["y"])
        except (TypeError, ValueError) as exc:
            raise ProtocolError("bad_message", f"bad observe payload: {exc}")
        if y.shape != (session.scenario.model.obs_dim,):
            raise ProtocolError("bad_message",
                                "y must have "
                                f"{session.scenario.model.obs_dim} entries")
        if not (np.isfinite(t) and np.isfinite(y).all()):
            raise ProtocolError("bad_message", "t and y must be finite")
        begin = time.perf_counter()
        post = session.bank.update(y, t)
        latency_us = (time.perf_counter() - begin) * 1e6
        return session, _posterior_message(session, post, latency_us)

    if kind == "predict":
        if "at" not in doc:
            raise ProtocolError("bad_message", "predict needs at")
        try:
            at = session.transform.time(doc["at"])
        except (TypeError, ValueError) as exc:
            raise ProtocolError("bad_message", f"bad predict payload: {exc}")
        if not np.isfinite(at):
            raise ProtocolError("bad_message", "at must be finite")
        top = doc.get("top")
        try:
            mixture = session.bank.predict_future(at)
        except ValueError as exc:
            raise ProtocolError("bad_message", str(exc))
        return session, _prediction_message(at, mixture, top)

    if kind == "reset":
        session.reset()
        return session, _ack(session)

    raise ProtocolError("bad_message", f"unknown message type {kind!r}")
