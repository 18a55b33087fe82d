"""WebSocket teleoperation: stream simulation state, accept live targets.

One asyncio task owns the simulation and ticks it at the control rate
in wall-clock time. Network sessions interact with it only through a
latest-command mailbox (new commands overwrite unconsumed ones) and
per-client broadcast slots of depth one (a slow client skips frames,
the loop never waits). State goes out at a decimated rate, 30 Hz by
default. Wire format is JSON text messages on the ``/teleop`` endpoint.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass

import numpy as np

from .contact import ContactEvent
from .controller import make_controller
from .dynamics import init_sim_state, step_dynamics
from .hand_model import forward_kinematics, resolve_hand_model
from .reference import LiveReference
from .scenario import Scenario, build_basis, perturb_scene

__all__ = [
    "SCHEMA_VERSION",
    "ProtocolError",
    "StateMessage",
    "CommandMessage",
    "encode_state",
    "decode_state",
    "encode_command",
    "decode_command",
    "TeleopServer",
    "serve",
]

SCHEMA_VERSION = 1
BROADCAST_HZ = 30.0


class ProtocolError(ValueError):
    """Malformed or wrong-version wire message."""


@dataclass
class StateMessage:
    t: float
    q: np.ndarray
    q_d: np.ndarray
    fingertips: dict[str, np.ndarray]
    contacts: list[dict]
    ks: np.ndarray
    kd: np.ndarray
    v: np.ndarray
    aggregates: dict
    schema: int = SCHEMA_VERSION


@dataclass
class CommandMessage:
    q_d: np.ndarray
    controller: str | None = None
    reset: bool = False
    schema: int = SCHEMA_VERSION


def encode_state(msg: StateMessage) -> str:
    return json.dumps(
        {
            "type": "state",
            "schema": msg.schema,
            "t": msg.t,
            "q": [float(x) for x in msg.q],
            "q_d": [float(x) for x in msg.q_d],
            "fingertips": {k: [float(x) for x in v] for k, v in msg.fingertips.items()},
            "contacts": msg.contacts,
            "profiles": {
                "ks": [float(x) for x in msg.ks],
                "kd": [float(x) for x in msg.kd],
                "v": [float(x) for x in msg.v],
            },
            "aggregates": msg.aggregates,
        },
        separators=(",", ":"),
    )


def _require(payload: dict, key: str):
    if key not in payload:
        raise ProtocolError(f"missing required field {key!r}")
    return payload[key]


def _check_schema(payload: dict) -> None:
    schema = _require(payload, "schema")
    if schema != SCHEMA_VERSION:
        raise ProtocolError(f"unknown schema version {schema!r}")


def decode_state(text: str) -> StateMessage:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc}") from exc
    if payload.get("type") != "state":
        raise ProtocolError("not a state message")
    _check_schema(payload)
    profiles = _require(payload, "profiles")
    return StateMessage(
        t=float(_require(payload, "t")),
        q=np.asarray(_require(payload, "q"), dtype=float),
        q_d=np.asarray(_require(payload, "q_d"), dtype=float),
        fingertips={
            k: np.asarray(v, dtype=float) for k, v in _require(payload, "fingertips").items()
        },
        contacts=list(_require(payload, "contacts")),
        ks=np.asarray(_require(profiles, "ks"), dtype=float),
        kd=np.asarray(_require(profiles, "kd"), dtype=float),
        v=np.asarray(_require(profiles, "v"), dtype=float),
        aggregates=dict(_require(payload, "aggregates")),
        schema=payload["schema"],
    )


def encode_command(msg: CommandMessage) -> str:
    payload = {
        "type": "command",
        "schema": msg.schema,
        "q_d": [float(x) for x in msg.q_d],
    }
    if msg.controller is not None:
        payload["controller"] = msg.controller
    if msg.reset:
        payload["reset"] = True
    return json.dumps(payload, separators=(",", ":"))


def decode_command(text: str, n_joints: int | None = None) -> CommandMessage:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc}") from exc
    if payload.get("type") != "command":
        raise ProtocolError("not a command message")
    _check_schema(payload)
    q_d = _require(payload, "q_d")
    if not isinstance(q_d, list) or not all(isinstance(x, (int, float)) for x in q_d):
        raise ProtocolError("q_d must be a list of numbers")
    q_d = np.asarray(q_d, dtype=float)
    if not np.all(np.isfinite(q_d)):
        raise ProtocolError("q_d must be finite")
    if n_joints is not None and q_d.shape != (n_joints,):
        raise ProtocolError(f"q_d must have length {n_joints}, got {q_d.shape[0]}")
    controller = payload.get("controller")
    if controller is not None and controller not in ("adaptive", "fixed", "position"):
        raise ProtocolError(f"unknown controller type {controller!r}")
    reset = payload.get("reset", False)
    if not isinstance(reset, bool):
        raise ProtocolError("reset must be a boolean")
    return CommandMessage(q_d=q_d, controller=controller, reset=reset, schema=payload["schema"])


def _error_reply(reason: str) -> str:
    return json.dumps(
        {"type": "error", "schema": SCHEMA_VERSION, "error": reason}, separators=(",", ":")
    )


class TeleopServer:
    """Live scenario simulation behind a WebSocket endpoint."""

    def __init__(self, scenario: Scenario, broadcast_hz: float = BROADCAST_HZ):
        if scenario.reference_config.get("kind", "live") != "live":
            raise ValueError("teleop serving needs a scenario with a live reference")
        self.scenario = scenario
        self.model = resolve_hand_model(scenario.hand_model)
        rng = np.random.default_rng(scenario.seed)
        self.scene = perturb_scene(scenario.scene, rng)
        basis, phase_tau = build_basis(scenario.basis_config, max(scenario.duration, 1.0))
        self._basis = basis
        self._phase_tau = phase_tau
        self._controller_type = scenario.controller
        self.controller = self._build_controller(scenario.controller)
        self.controller.reset()
        self.reference = LiveReference(self.model)
        self.state = init_sim_state(self.model, self.scene)
        self.broadcast_interval = 1.0 / broadcast_hz
        self._mailbox: CommandMessage | None = None
        self._clients: dict[object, asyncio.Queue] = {}
        self._stop = asyncio.Event()
        self._tick_events: list[ContactEvent] = []
        self._max_force = 0.0
        self._force_sum = 0.0
        self._force_count = 0
        self._ticks = 0
        self.commands_applied = 0

    def _build_controller(self, ctype: str):
        cfg = self.scenario.controllers.get(ctype)
        if cfg is None:
            from .controller import ControllerConfig

            cfg = ControllerConfig.from_dict({"type": ctype})
        if ctype == "position" and "position" in self.scenario.controllers:
            pos = self.scenario.controllers["position"]
            gains = (pos.ks_init, pos.kd_init)
        else:
            gains = self.model.position_mode_gains
        return make_controller(
            cfg, self.model.n_joints, self.model.tau_max, gains, self._basis, self._phase_tau
        )

    # ---- session side ----------------------------------------------------

    def hello_message(self) -> str:
        return json.dumps(
            {
                "type": "hello",
                "schema": SCHEMA_VERSION,
                "joints": [j.name for j in self.model.joints],
                "limit_lo": [float(x) for x in self.model.limit_lo],
                "limit_hi": [float(x) for x in self.model.limit_hi],
                "rest": [float(x) for x in self.model.rest_state().q],
                "ctrl_dt": self.scenario.ctrl_dt,
                "controller": self._controller_type,
            },
            separators=(",", ":"),
        )

    def submit(self, msg: CommandMessage) -> None:
        """Drop the command in the mailbox; the next tick consumes the latest."""
        self._mailbox = msg

    async def handler(self, websocket) -> None:
        path = getattr(getattr(websocket, "request", None), "path", "/teleop")
        if path.rstrip("/") != "/teleop":
            await websocket.close(code=1008, reason="unknown endpoint")
            return
        queue: asyncio.Queue = asyncio.Queue(maxsize=1)
        self._clients[websocket] = queue
        sender = asyncio.create_task(self._send_loop(websocket, queue))
        try:
            await websocket.send(self.hello_message())
            async for raw in websocket:
                try:
                    msg = decode_command(raw, self.model.n_joints)
                except ProtocolError as exc:
                    await websocket.send(_error_reply(str(exc)))
                    continue
                self.submit(msg)
        except Exception:
            pass
        finally:
            self._clients.pop(websocket, None)
            sender.cancel()

    async def _send_loop(self, websocket, queue: asyncio.Queue) -> None:
        try:
            while True:
                text = await queue.get()
                await websocket.send(text)
        except (asyncio.CancelledError, Exception):
            return

    def _broadcast(self, text: str) -> None:
        for queue in self._clients.values():
            if queue.full():
                try:
                    queue.get_nowait()
                except asyncio.QueueEmpty:
                    pass
            queue.put_nowait(text)

    # ---- simulation side ---------------------------------------------------

    def _consume_mailbox(self) -> None:
        msg = self._mailbox
        self._mailbox = None
        if msg is None:
            return
        if msg.controller is not None and msg.controller != self._controller_type:
            self._controller_type = msg.controller
            self.controller = self._build_controller(msg.controller)
            self.controller.reset()
        if msg.reset:
            self.state = init_sim_state(self.model, self.scene)
            self.controller.reset()
            self.reference = LiveReference(self.model)
            self._max_force = 0.0
            self._force_sum = 0.0
            self._force_count = 0
            self._ticks = 0
        self.reference.push(msg.q_d)
        self.commands_applied += 1

    def tick(self) -> None:
        """One control period: consume mailbox, controller step, substeps."""
        self._consume_mailbox()
        q_d = self.reference.sample_at(self.state.joints.t).q_d
        cmd = self.controller.step(
            self.state.joints.q, self.state.joints.q_dot, q_d, self.scenario.ctrl_dt
        )
        self._tick_events = []
        for _ in range(self.scenario.substeps):
            self.state, batch = step_dynamics(
                self.model, self.state, cmd.tau, self.scene, self.scenario.sim_dt
            )
            if batch is not None:
                self._tick_events.extend(batch.events)
        for ev in self._tick_events:
            self._max_force = max(self._max_force, ev.force_magnitude)
            self._force_sum += ev.force_magnitude
            self._force_count += 1
        self._ticks += 1
        self._last_q_d = q_d

    def snapshot(self) -> StateMessage:
        fk = forward_kinematics(self.model, self.state.joints.q)
        ks, kd, v = self.controller.profiles()
        n = self.model.n_joints
        mean_force = self._force_sum / self._force_count if self._force_count else 0.0
        q_d = getattr(self, "_last_q_d", self.model.rest_state().q)
        return StateMessage(
            t=self.state.joints.t,
            q=self.state.joints.q.copy(),
            q_d=q_d.copy(),
            fingertips={k: p.copy() for k, p in fk.fingertips.items()},
            contacts=[
                {
                    "fingertip": ev.fingertip,
                    "object": ev.object_id,
                    "point": [float(x) for x in ev.point],
                    "force": ev.force_magnitude,
                }
                for ev in self._tick_events
            ],
            ks=np.asarray(ks, dtype=float) + np.zeros(n),
            kd=np.asarray(kd, dtype=float) + np.zeros(n),
            v=np.asarray(v, dtype=float).copy() + np.zeros(n),
            aggregates={
                "max_contact_force": self._max_force,
                "mean_contact_force": mean_force,
                "ticks": self._ticks,
            },
        )

    async def run(self) -> None:
        """Tick at the control rate in wall time, broadcasting at 30 Hz."""
        ctrl_dt = self.scenario.ctrl_dt
        next_tick = time.monotonic()
        last_broadcast = -np.inf
        while not self._stop.is_set():
            self.tick()
            now = time.monotonic()
            if now - last_broadcast >= self.broadcast_interval - 1e-9:
                self._broadcast(encode_state(self.snapshot()))
                last_broadcast = now
            next_tick += ctrl_dt
            delay = next_tick - time.monotonic()
            if delay > 0:
                try:
                    await asyncio.wait_for(self._stop.wait(), timeout=delay)
                except asyncio.TimeoutError:
                    pass
            else:
                next_tick = time.monotonic()
                await asyncio.sleep(0)

    def stop(self) -> None:
        self._stop.set()


async def serve(scenario: Scenario, port: int, host: str = "127.0.0.1") -> None:
    """Run the teleop endpoint until cancelled (the CLI ``serve`` command)."""
    import websockets

    server = TeleopServer(scenario)
    async with websockets.serve(server.handler, host, port):
        print(f"teleop endpoint at ws://{host}:{port}/teleop")
        await server.run()
