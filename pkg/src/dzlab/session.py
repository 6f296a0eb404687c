"""Live episode collection: a fixed-tick session loop behind a
bidirectional JSON message protocol.

One message per line (TCP) or per frame (WebSocket):
  server -> client: {"type":"state","t":..,"pos_m":..,"speed_mps":..,
                     "phase":"green|yellow|red","yellow_remaining_s":..,
                     "decided":bool}
  client -> server: {"type":"start","driver_id":..,"seed":..}
                    {"type":"control","throttle":..,"brake":..}
                    {"type":"decision","choice":"stop|go"}
                    {"type":"abort"}
  terminal:         {"type":"summary", ...episode header fields}
Decisions are always acknowledged ({"type":"ack",...}); controls are
acknowledged only when rejected.  Inputs are sampled at tick boundaries,
last-writer-wins within a tick; the first decision latches.

Pacing: real-time (drift-corrected sleep to the next 20 ms deadline),
fast (no waiting), or lockstep (the loop consumes exactly one client
message per tick; scripted clients send exactly one message per state
received, which pins the tick each input applies to).
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .dataset import append_episode_jsonl
from .kinematics import POSITION_EPS_M, crossing_time, step
from .persona import Episode, GO, POST_CROSS_RUNOUT_S, STOP, compute_ran_red
from .scenario import Scenario, ScenarioConfig, generate_scenario, phase_at

log = logging.getLogger(__name__)

RUNNING, FINISHED = "running", "finished"
MAX_EPISODE_S = 120.0


@dataclass
class SessionState:
    """One approach driven over the wire; physics identical to rollouts."""
    session_id: str
    driver_id: str
    scenario: Scenario
    status: str = RUNNING
    decision: Optional[str] = None
    decision_t_s: Optional[float] = None
    throttle: float = 0.0
    brake: float = 0.0
    crossed_line_t_s: Optional[float] = None

    def __post_init__(self):
        self.current = self.scenario.initial
        self.samples = [self._sample_row(self.current)]

    def _sample_row(self, st):
        return (st.t_s, st.position_m, st.speed_mps, st.accel_mps2,
                phase_at(self.scenario.timing, st.t_s).value)

    @property
    def phase(self):
        return phase_at(self.scenario.timing, self.current.t_s)

    def state_message(self) -> dict:
        timing = self.scenario.timing
        return {
            "type": "state",
            "t": self.current.t_s,
            "pos_m": self.current.position_m,
            "speed_mps": self.current.speed_mps,
            "phase": self.phase.value,
            "yellow_remaining_s": max(timing.red_onset_s - self.current.t_s, 0.0),
            "decided": self.decision is not None,
        }

    def apply_input(self, msg: dict) -> Optional[dict]:
        """Control or decision message; returns an ack dict or None."""
        if self.status == FINISHED:
            return {"type": "ack", "accepted": False, "reason": "session finished"}
        kind = msg.get("type")
        if kind == "control":
            self.throttle = min(max(float(msg.get("throttle", 0.0)), 0.0), 1.0)
            self.brake = min(max(float(msg.get("brake", 0.0)), 0.0), 1.0)
            return None
        if kind == "decision":
            choice = msg.get("choice")
            if choice not in (STOP, GO):
                return {"type": "ack", "accepted": False,
                        "reason": f"unknown decision choice {choice!r}"}
            if self.decision is not None:
                return {"type": "ack", "accepted": False,
                        "reason": "decision already recorded"}
            self.decision = choice
            self.decision_t_s = self.current.t_s
            return {"type": "ack", "accepted": True, "choice": choice,
                    "t": self.decision_t_s}
        return {"type": "ack", "accepted": False, "reason": f"unknown message type {kind!r}"}

    def tick(self) -> dict:
        """Advance exactly one dt; returns the new state message."""
        limits = self.scenario.limits
        accel_cmd = self.throttle * limits.a_max - self.brake * limits.b_max
        nxt = step(self.current, accel_cmd, self.scenario.dt_s, limits)
        if (self.crossed_line_t_s is None and self.current.position_m > POSITION_EPS_M
                and nxt.position_m <= -POSITION_EPS_M):
            self.crossed_line_t_s = crossing_time(self.current, nxt)
        self.current = nxt
        self.samples.append(self._sample_row(nxt))
        if self._done():
            self.status = FINISHED
        return self.state_message()

    def _done(self) -> bool:
        if self.decision is not None and self.current.speed_mps == 0.0:
            return True
        if (self.crossed_line_t_s is not None
                and self.current.t_s >= self.crossed_line_t_s + POST_CROSS_RUNOUT_S):
            return True
        return self.current.t_s >= MAX_EPISODE_S

    def to_episode(self) -> Episode:
        timing = self.scenario.timing
        return Episode(
            driver_id=self.driver_id,
            scenario=self.scenario,
            samples=self.samples,
            decision=self.decision,
            decision_t_s=self.decision_t_s,
            ran_red=compute_ran_red(self.decision, self.crossed_line_t_s,
                                    self.current.position_m, timing.red_onset_s),
            crossed_line_t_s=self.crossed_line_t_s,
        )

    def summary_message(self, stored: bool) -> dict:
        ep = self.to_episode()
        return {
            "type": "summary",
            "session_id": self.session_id,
            "driver_id": ep.driver_id,
            "decision": ep.decision,
            "decision_t_s": ep.decision_t_s,
            "ran_red": ep.ran_red,
            "crossed_line_t_s": ep.crossed_line_t_s,
            "final_position_m": self.current.position_m,
            "n_samples": len(self.samples),
            "stored": stored,
        }


class SessionManager:
    """Creates sessions and owns store persistence; sessions share no state."""

    def __init__(self, store_dir, config: ScenarioConfig = ScenarioConfig(),
                 fast: bool = False):
        self.store_dir = Path(store_dir)
        self.store_dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.fast = fast
        self.active: dict[str, SessionState] = {}
        self._counter = itertools.count(1)
        self._store_lock = asyncio.Lock()

    def start_session(self, driver_id: str, seed: int,
                      session_id: Optional[str] = None) -> SessionState:
        if not driver_id or not isinstance(driver_id, str):
            raise ValueError("driver_id must be a non-empty string")
        sid = session_id or f"{driver_id}-{next(self._counter)}"
        if sid in self.active:
            raise ValueError(f"duplicate session_id {sid!r}")
        scenario = generate_scenario(int(seed), self.config)
        session = SessionState(session_id=sid, driver_id=driver_id, scenario=scenario)
        self.active[sid] = session
        return session

    async def finish_session(self, session: SessionState) -> tuple[Episode, bool]:
        """Assemble the episode and append it to the driver's JSONL store.

        Undecided episodes (timeout without a button press) are returned
        but not stored; they carry no usable label.
        """
        session.status = FINISHED
        episode = session.to_episode()
        stored = False
        if episode.decision is not None:
            path = self.store_dir / f"{episode.driver_id}.jsonl"
            async with self._store_lock:
                append_episode_jsonl(path, episode)
            stored = True
        else:
            log.warning("session %s finished without a decision; not stored",
                        session.session_id)
        self.active.pop(session.session_id, None)
        return episode, stored

    def abort_session(self, session: SessionState) -> None:
        session.status = FINISHED
        self.active.pop(session.session_id, None)
        log.info("session %s aborted; episode discarded", session.session_id)


class Transport:
    """Line- or frame-oriented JSON message pipe."""

    async def send(self, msg: dict) -> None:
        raise NotImplementedError

    async def recv(self) -> Optional[dict]:
        raise NotImplementedError


class TcpTransport(Transport):
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer

    async def send(self, msg: dict) -> None:
        self.writer.write(json.dumps(msg).encode() + b"\n")
        await self.writer.drain()

    async def recv(self) -> Optional[dict]:
        line = await self.reader.readline()
        if not line:
            return None
        try:
            return json.loads(line)
        except json.JSONDecodeError:
            return {"type": "_malformed", "raw": line.decode(errors="replace")}


async def handle_client(manager: SessionManager, transport: Transport) -> None:
    """Per-connection protocol loop; one active session at a time."""
    queue: asyncio.Queue = asyncio.Queue()

    async def reader():
        while True:
            msg = await transport.recv()
            await queue.put(msg if msg is not None else {"type": "_disconnect"})
            if msg is None:
                return

    reader_task = asyncio.create_task(reader())
    try:
        while True:
            msg = await queue.get()
            kind = msg.get("type")
            if kind == "_disconnect":
                return
            if kind == "_malformed":
                await transport.send({"type": "error", "error": "malformed JSON message"})
                continue
            if kind in ("control", "decision"):
                await transport.send({"type": "ack", "accepted": False,
                                      "reason": "no active session"})
                continue
            if kind != "start":
                await transport.send({"type": "error",
                                      "error": f"expected start message, got {kind!r}"})
                continue
            try:
                session = manager.start_session(
                    driver_id=msg.get("driver_id"),
                    seed=msg.get("seed", 0),
                    session_id=msg.get("session_id"),
                )
            except (ValueError, TypeError) as exc:
                await transport.send({"type": "error", "error": str(exc)})
                continue
            lockstep = bool(msg.get("lockstep", False))
            disconnected = await _run_session(manager, session, transport, queue, lockstep)
            if disconnected:
                return
    finally:
        reader_task.cancel()


async def _run_session(manager: SessionManager, session: SessionState,
                       transport: Transport, queue: asyncio.Queue,
                       lockstep: bool) -> bool:
    """Tick loop for one session; returns True if the client disconnected."""
    dt = session.scenario.dt_s
    loop = asyncio.get_running_loop()
    deadline = loop.time()
    await transport.send(session.state_message())
    while session.status == RUNNING:
        # sample inputs at the tick boundary
        if lockstep:
            msg = await queue.get()
            outcome = await _dispatch(manager, session, transport, msg)
            if outcome is not None:
                return outcome
        while not queue.empty():
            msg = queue.get_nowait()
            outcome = await _dispatch(manager, session, transport, msg)
            if outcome is not None:
                return outcome
        if not manager.fast and not lockstep:
            deadline += dt
            delay = deadline - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
        elif not lockstep:
            await asyncio.sleep(0)
        await transport.send(session.tick())
    episode, stored = await manager.finish_session(session)
    await transport.send(session.summary_message(stored))
    return False


async def _dispatch(manager: SessionManager, session: SessionState,
                    transport: Transport, msg: dict) -> Optional[bool]:
    """Apply one client message; returns True/False to end the session
    (disconnected / aborted), None to keep running."""
    kind = msg.get("type")
    if kind == "_disconnect":
        manager.abort_session(session)
        return True
    if kind == "abort":
        manager.abort_session(session)
        await transport.send({"type": "ack", "accepted": True, "aborted": True})
        return False
    if kind == "_malformed":
        await transport.send({"type": "error", "error": "malformed JSON message"})
        return None
    if kind == "start":
        await transport.send({"type": "error", "error": "session already running"})
        return None
    ack = session.apply_input(msg)
    if ack is not None:
        await transport.send(ack)
    return None


async def serve_tcp(manager: SessionManager, host: str, port: int) -> asyncio.AbstractServer:
    async def on_connect(reader, writer):
        peer = writer.get_extra_info("peername")
        log.info("client connected: %s", peer)
        try:
            await handle_client(manager, TcpTransport(reader, writer))
        except ConnectionError:
            pass
        finally:
            writer.close()
            log.info("client gone: %s", peer)

    return await asyncio.start_server(on_connect, host, port)


def create_app(manager: SessionManager, static_dir=None):
    """FastAPI app exposing the same protocol over a WebSocket at /ws,
    optionally serving the browser client from static_dir."""
    from fastapi import FastAPI
    from fastapi.staticfiles import StaticFiles
    from starlette.routing import WebSocketRoute

    app = FastAPI(title="dzlab collection service")

    class WsTransport(Transport):
        def __init__(self, ws):
            self.ws = ws

        async def send(self, msg: dict) -> None:
            await self.ws.send_text(json.dumps(msg))

        async def recv(self) -> Optional[dict]:
            from starlette.websockets import WebSocketDisconnect
            try:
                text = await self.ws.receive_text()
            except WebSocketDisconnect:
                return None
            try:
                return json.loads(text)
            except json.JSONDecodeError:
                return {"type": "_malformed", "raw": text}

    async def ws_endpoint(websocket) -> None:
        from starlette.websockets import WebSocketDisconnect
        await websocket.accept()
        try:
            await handle_client(manager, WsTransport(websocket))
        except (WebSocketDisconnect, ConnectionError):
            pass

    app.router.routes.append(WebSocketRoute("/ws", ws_endpoint))

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
