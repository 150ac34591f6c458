"""Live steerable simulation service.

One authoritative world per process, stepped by a single asyncio loop.
Clients connect over a WebSocket, receive JSON frames, and send JSON
commands that are applied atomically between ticks. Slow clients drop
frames from their own queue; they can never stall the physics.

Wire schema (version 1), all messages JSON text:

  server -> client
    {"v": 1, "type": "hello", "epoch": E, "tick": T, "dt": dt,
     "config": {...}, "frame": {...}}
    {"v": 1, "type": "frame", "epoch": E, "tick": T, "sim_time": s,
     "running": bool, "agents": [[id, x, y, heading, sensor, tag], ...],
     "metrics": {"circliness": c, "diffusion": d|null, "n_components": k},
     "collisions_total": n}
    {"v": 1, "type": "ack", "seq": ..., "cmd": name, "epoch": E,
     "applied_at_tick": T}            # plus cmd-specific fields
    {"v": 1, "type": "snapshot", "seq": ..., "data": {...}}
    {"v": 1, "type": "error", "seq": ..., "reason": str, "echo": ...}

  client -> server (optional "seq" is echoed back verbatim)
    {"type": "pause"} | {"type": "resume"} | {"type": "step", "k": 1}
    {"type": "reset", "seed": 42}     # seed optional: None reuses config
    {"type": "set_speed", "multiplier": 4.0}
    {"type": "set_param", "name": "v", "value": 0.3}
    {"type": "assign_controller", "agent_id": 3,
     "controller": {"tag": "self_centering", "v_m_s": 0.25, "omega_rad_s": 0.785}}
    {"type": "load_config", "config": {...}}   # config or world snapshot
    {"type": "snapshot"}

Frames carry (epoch, tick): the epoch increments on reset/load_config, and
within an epoch broadcast ticks strictly increase. Frame content for a
given command history is a pure function of config and seed, so replaying
the same commands at the same tick boundaries reproduces frames exactly.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import math
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from .config import ConfigError, ControllerMode, WorldConfig
from .metrics import (
    circliness_batch,
    min_pair_distance,
    n_components_batch,
    pivots_batch,
)
from .model import World, init_world, pair_displacements

SCHEMA_VERSION = 1
DEFAULT_FRAME_HZ_CAP = 60.0
MAX_STEP_K = 100_000
MAX_SPEED = 1024.0
_ECHO_LIMIT = 512


class CommandError(ValueError):
    """Rejected command; the session state is untouched."""


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


class LiveSession:
    """Synchronous session core: a world plus pacing/steering state.

    The network layer owns the clock; everything here is deterministic,
    which is what makes command histories replayable (and testable
    without sockets).
    """

    def __init__(self, config: WorldConfig,
                 frame_hz_cap: float = DEFAULT_FRAME_HZ_CAP):
        if frame_hz_cap <= 0:
            raise ValueError("frame_hz_cap must be positive")
        self.frame_hz_cap = float(frame_hz_cap)
        self.world = init_world(config.validate())
        self.base_config = self.world.config
        self.paused = False
        self.speed = 1.0
        self.epoch = 0

    # -- pacing --------------------------------------------------------------

    @property
    def tick(self) -> int:
        return self.world.tick

    @property
    def dt(self) -> float:
        return self.world.config.dt

    def frame_stride(self) -> int:
        """Broadcast every stride-th tick so frame rate stays <= the cap.

        Pure function of (dt, speed): replays see the same frames.
        """
        ticks_per_s = self.speed / self.dt
        return max(1, math.ceil(ticks_per_s / self.frame_hz_cap))

    def tick_interval_s(self) -> float:
        return self.dt / self.speed

    # -- frames ---------------------------------------------------------------

    def make_frame(self) -> dict:
        w = self.world
        x, y, heading = w.x, w.y, w.heading
        agents = [
            [i, float(x[0, i]), float(y[0, i]), float(heading[0, i]),
             int(w.last_sensor[0, i]), w.modes[i].tag.value]
            for i in range(w.n)
        ]
        cbar = float(circliness_batch(x, y)[0])
        px, py = pivots_batch(x, y, heading, w.u1_eff, w.u2_eff, self.dt)
        delta = float(min_pair_distance(px, py)[0] / w.gamma.mean())
        link = w.config.classifier.link_distance
        link = float(w.gamma.mean()) if link is None else float(link)
        _, _, d2 = pair_displacements(x, y, w.config.arena)
        ncomp = int(n_components_batch(d2, np.array([link]))[0])
        return {
            "v": SCHEMA_VERSION,
            "type": "frame",
            "epoch": self.epoch,
            "tick": w.tick,
            "sim_time": w.tick * self.dt,
            "running": not self.paused,
            "agents": agents,
            "metrics": {
                "circliness": _finite(cbar),
                "diffusion": _finite(delta),
                "n_components": ncomp,
            },
            "collisions_total": w.collisions_total,
        }

    def advance(self, n_ticks: int = 1) -> list:
        """Step physics, returning the frames due for broadcast."""
        stride = self.frame_stride()
        frames = []
        for _ in range(n_ticks):
            self.world.step(1)
            if self.world.tick % stride == 0:
                frames.append(self.make_frame())
        return frames

    # -- commands --------------------------------------------------------------

    def snapshot_blob(self) -> dict:
        return self.world.snapshot()

    def apply_command(self, msg: dict) -> tuple:
        """Apply one command atomically; returns (reply, frames).

        Raises CommandError on any invalid command, leaving the session
        exactly as it was.
        """
        if not isinstance(msg, dict):
            raise CommandError("command must be a JSON object")
        cmd = msg.get("type")
        handler = _COMMANDS.get(cmd)
        if handler is None:
            known = ", ".join(sorted(_COMMANDS))
            raise CommandError(f"unknown command {cmd!r} (expected one of: {known})")
        reply, frames = handler(self, msg)
        reply.setdefault("v", SCHEMA_VERSION)
        reply.setdefault("type", "ack")
        reply.setdefault("cmd", cmd)
        reply.setdefault("epoch", self.epoch)
        reply.setdefault("applied_at_tick", self.tick)
        if "seq" in msg:
            reply["seq"] = msg["seq"]
        return reply, frames

    # Individual commands. Each returns (partial reply, frames to broadcast)
    # and mutates only after every input has been validated.

    def _cmd_pause(self, msg: dict) -> tuple:
        self.paused = True
        return {}, [self.make_frame()]

    def _cmd_resume(self, msg: dict) -> tuple:
        self.paused = False
        return {}, []

    def _cmd_step(self, msg: dict) -> tuple:
        k = msg.get("k", 1)
        if not isinstance(k, int) or isinstance(k, bool) or not (1 <= k <= MAX_STEP_K):
            raise CommandError(f"step k must be an integer in [1, {MAX_STEP_K}]")
        self.paused = True
        frames = self.advance(k)
        if not frames or frames[-1]["tick"] != self.tick:
            frames.append(self.make_frame())
        return {"stepped": k}, frames

    def _cmd_set_speed(self, msg: dict) -> tuple:
        mult = msg.get("multiplier")
        if not isinstance(mult, (int, float)) or isinstance(mult, bool):
            raise CommandError("set_speed needs a numeric multiplier")
        mult = float(mult)
        if not math.isfinite(mult) or not (0.0 < mult <= MAX_SPEED):
            raise CommandError(f"speed multiplier must be in (0, {MAX_SPEED}]")
        self.speed = mult
        return {"multiplier": mult}, []

    def _cmd_set_param(self, msg: dict) -> tuple:
        name = msg.get("name")
        value = msg.get("value")
        if not isinstance(name, str):
            raise CommandError("set_param needs a string name")
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise CommandError("set_param needs a numeric value")
        try:
            self.world.set_shared_param(name, float(value))
        except ConfigError as e:
            raise CommandError(str(e)) from e
        return {"name": name, "value": float(value)}, []

    def _cmd_assign_controller(self, msg: dict) -> tuple:
        agent_id = msg.get("agent_id")
        if not isinstance(agent_id, int) or isinstance(agent_id, bool):
            raise CommandError("assign_controller needs an integer agent_id")
        spec = msg.get("controller")
        if not isinstance(spec, dict):
            raise CommandError("assign_controller needs a controller object")
        try:
            mode = ControllerMode.from_json_dict(spec)
            self.world.set_mode(agent_id, mode)
        except (ConfigError, KeyError, ValueError) as e:
            raise CommandError(f"bad controller assignment: {e}") from e
        return {"agent_id": agent_id, "controller": mode.to_json_dict()}, []

    def _cmd_reset(self, msg: dict) -> tuple:
        seed = msg.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)
                                 or seed < 0):
            raise CommandError("reset seed must be a nonnegative integer")
        cfg = self.base_config if seed is None else self.base_config.replace(seed=seed)
        world = init_world(cfg.validate())
        self.world = world
        self.base_config = world.config
        self.epoch += 1
        return {"seed": world.config.seed}, [self.make_frame()]

    def _cmd_load_config(self, msg: dict) -> tuple:
        blob = msg.get("config")
        if not isinstance(blob, dict):
            raise CommandError("load_config needs a config object")
        try:
            if blob.get("kind") == "world_snapshot":
                world = World.from_snapshot(blob)
            else:
                world = init_world(WorldConfig.from_json_dict(blob).validate())
        except (ConfigError, KeyError, TypeError, ValueError) as e:
            raise CommandError(f"bad config: {e}") from e
        self.world = world
        self.base_config = world.config
        self.epoch += 1
        return {"n_agents": world.n}, [self.make_frame()]

    def _cmd_snapshot(self, msg: dict) -> tuple:
        return {"type": "snapshot", "data": self.snapshot_blob()}, []


_COMMANDS = {
    "pause": LiveSession._cmd_pause,
    "resume": LiveSession._cmd_resume,
    "step": LiveSession._cmd_step,
    "set_speed": LiveSession._cmd_set_speed,
    "set_param": LiveSession._cmd_set_param,
    "assign_controller": LiveSession._cmd_assign_controller,
    "reset": LiveSession._cmd_reset,
    "load_config": LiveSession._cmd_load_config,
    "snapshot": LiveSession._cmd_snapshot,
}


def error_reply(reason: str, echo=None, seq=None) -> dict:
    reply = {"v": SCHEMA_VERSION, "type": "error", "reason": reason}
    if echo is not None:
        text = echo if isinstance(echo, str) else json.dumps(echo)
        reply["echo"] = text[:_ECHO_LIMIT]
    if seq is not None:
        reply["seq"] = seq
    return reply


class _Client:
    """One WebSocket subscriber with a bounded drop-oldest outbox."""

    def __init__(self, queue_size: int = 256):
        self.outbox: asyncio.Queue = asyncio.Queue(maxsize=queue_size)
        self.last_key = (-1, -1)       # (epoch, tick) of last frame queued

    def offer(self, message: dict) -> None:
        if message.get("type") == "frame":
            key = (message["epoch"], message["tick"])
            if key <= self.last_key:
                return
            self.last_key = key
        while True:
            try:
                self.outbox.put_nowait(message)
                return
            except asyncio.QueueFull:
                try:
                    self.outbox.get_nowait()
                except asyncio.QueueEmpty:
                    pass


def create_app(session: LiveSession, data_dir: str | Path | None = None,
               static_dir: str | Path | None = None):
    """FastAPI app wrapping one LiveSession.

    data_dir is where /phase-diagram looks for sweep CSVs; static_dir, if
    it exists, is served at / for the browser client.
    """
    clients: set = set()
    commands: asyncio.Queue = asyncio.Queue()

    def broadcast(message: dict) -> None:
        for c in clients:
            c.offer(message)

    async def sim_loop() -> None:
        # Paces the world at speed/dt ticks per wall second, draining the
        # command queue between ticks. Pausing parks the loop on the queue.
        next_due = time.monotonic()
        while True:
            try:
                timeout = None if session.paused else max(0.0, next_due - time.monotonic())
                try:
                    msg, client = await asyncio.wait_for(commands.get(), timeout)
                except asyncio.TimeoutError:
                    msg = None
                if msg is not None:
                    was_paused = session.paused
                    try:
                        reply, frames = session.apply_command(msg)
                    except CommandError as e:
                        client.offer(error_reply(str(e), echo=msg, seq=msg.get("seq")
                                                 if isinstance(msg, dict) else None))
                    else:
                        client.offer(reply)
                        for f in frames:
                            broadcast(f)
                    if session.paused != was_paused or not session.paused:
                        next_due = time.monotonic()
                    continue
                frames = session.advance(1)
                for f in frames:
                    broadcast(f)
                next_due += session.tick_interval_s()
                # never build up a backlog after a stall
                next_due = max(next_due, time.monotonic() - 0.25)
            except asyncio.CancelledError:
                raise
            except Exception as e:  # simulation failure: report and pause
                session.paused = True
                broadcast(error_reply(f"simulation error: {e}"))

    @contextlib.asynccontextmanager
    async def lifespan(app):
        task = asyncio.create_task(sim_loop())
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(title="swarmsim live service", lifespan=lifespan)

    @app.get("/health")
    async def health() -> JSONResponse:
        return JSONResponse({
            "status": "ok",
            "schema": SCHEMA_VERSION,
            "epoch": session.epoch,
            "tick": session.tick,
            "running": not session.paused,
            "clients": len(clients),
        })

    @app.get("/config")
    async def config() -> JSONResponse:
        return JSONResponse(session.world.config.to_json_dict())

    @app.get("/phase-diagram")
    async def phase_diagram(file: str) -> PlainTextResponse:
        name = Path(file).name
        if not name or name != file or not name.endswith(".csv"):
            return PlainTextResponse("file must be a bare *.csv name",
                                     status_code=400)
        root = Path(data_dir) if data_dir is not None else None
        path = (root / name) if root is not None else None
        if path is None or not path.is_file():
            return PlainTextResponse(f"no such diagram: {name}", status_code=404)
        return PlainTextResponse(path.read_text(), media_type="text/csv")

    @app.websocket("/session")
    async def ws_session(ws: WebSocket) -> None:
        await ws.accept()
        client = _Client()
        hello = {
            "v": SCHEMA_VERSION,
            "type": "hello",
            "epoch": session.epoch,
            "tick": session.tick,
            "dt": session.dt,
            "config": session.world.config.to_json_dict(),
            "frame": session.make_frame(),
        }
        await ws.send_text(json.dumps(hello))
        clients.add(client)

        async def pump_out() -> None:
            while True:
                await ws.send_text(json.dumps(await client.outbox.get()))

        out_task = asyncio.create_task(pump_out())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as e:
                    client.offer(error_reply(f"malformed JSON: {e}", echo=raw))
                    continue
                if not isinstance(msg, dict):
                    client.offer(error_reply("command must be a JSON object",
                                             echo=raw))
                    continue
                await commands.put((msg, client))
        except WebSocketDisconnect:
            pass
        finally:
            clients.discard(client)
            out_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await out_task

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="ui")

    return app


def serve(config: WorldConfig, port: int, host: str = "127.0.0.1",
          data_dir: str | Path | None = None,
          static_dir: str | Path | None = None) -> None:
    """Run the service until interrupted (blocking)."""
    import uvicorn
    app = create_app(LiveSession(config), data_dir=data_dir,
                     static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
