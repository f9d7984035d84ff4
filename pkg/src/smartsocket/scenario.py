"""Scenario files and the in-process socket simulator.

Scenario lines, sorted by timestamp (``#`` starts a comment)::

    <iso8601> SAMPLE <socket_id> <amps>
    <iso8601> SMS_TO_SOCKET <socket_id> <body>
    <iso8601> EVENT <socket_id>
"""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

from . import codec, model
from .errors import ParseError, SmartSocketError
from .model import Mode, SwitchOnEvent
from .socket_sim import CurrentSample, SmartSocket

logger = logging.getLogger(__name__)

VERBS = ("SAMPLE", "SMS_TO_SOCKET", "EVENT")


class ScenarioError(SmartSocketError):
    def __init__(self, lineno: int, detail: str):
        self.lineno = lineno
        super().__init__(f"scenario line {lineno}: {detail}")


@dataclass(frozen=True)
class ScenarioLine:
    lineno: int
    at: dt.datetime
    verb: str
    socket: str
    arg: str = ""


def parse_scenario(lines: Iterable[str]) -> list[ScenarioLine]:
    out: list[ScenarioLine] = []
    last = None
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split(" ", 3)
        if len(parts) < 3:
            raise ScenarioError(lineno, f"too few fields in {line!r}")
        stamp, verb, socket = parts[:3]
        arg = parts[3] if len(parts) == 4 else ""
        try:
            at = model.parse_ts(stamp)
        except ValueError:
            raise ScenarioError(lineno, f"bad timestamp {stamp!r}") from None
        if verb not in VERBS:
            raise ScenarioError(lineno, f"unknown verb {verb!r}")
        if not model.is_socket_id(socket):
            raise ScenarioError(lineno, f"bad socket id {socket!r}")
        if verb == "SAMPLE":
            try:
                amps = float(arg)
            except ValueError:
                raise ScenarioError(lineno, f"bad current {arg!r}") from None
            if not amps >= 0:
                raise ScenarioError(lineno, f"current must be >= 0, got {arg!r}")
        elif verb == "SMS_TO_SOCKET" and not arg:
            raise ScenarioError(lineno, "SMS_TO_SOCKET needs a body")
        elif verb == "EVENT" and arg:
            raise ScenarioError(lineno, "EVENT takes no argument")
        if last is not None and at < last:
            raise ScenarioError(lineno, "timestamps must be non-decreasing")
        last = at
        out.append(ScenarioLine(lineno, at, verb, socket, arg))
    return out


@dataclass(frozen=True)
class Tick:
    at: dt.datetime


@dataclass(frozen=True)
class Frame:
    env: codec.Envelope


GatewayInput = Union[Tick, Frame]


@dataclass
class SimulationResult:
    inputs: list[GatewayInput] = field(default_factory=list)
    events: int = 0
    notifications: int = 0
    direct: int = 0
    dropped: int = 0
    rejected_sms: int = 0


class Simulation:
    """Drives virtual sockets over a scenario.

    The output is the ordered stream of what the middleware sees: a
    clock tick for every scenario line and a frame for every notification
    a MIDDLEWARE-mode socket sends. DIRECT-mode notifications go to
    ``direct_send(destination, envelope)`` and never reach the server.
    """

    def __init__(self, server_address: str,
                 direct_send: Callable[[str, codec.Envelope], None] | None = None,
                 **socket_params):
        self.server_address = server_address
        self.direct_send = direct_send
        self.socket_params = socket_params
        self.sockets: dict[str, SmartSocket] = {}

    def socket(self, socket_id: str) -> SmartSocket:
        s = self.sockets.get(socket_id)
        if s is None:
            s = self.sockets[socket_id] = SmartSocket(socket_id, self.server_address,
                                                      **self.socket_params)
        return s

    def run(self, scenario: Iterable[ScenarioLine]) -> SimulationResult:
        res = SimulationResult()
        for ln in scenario:
            res.inputs.append(Tick(ln.at))
            sock = self.socket(ln.socket)
            if ln.verb == "SAMPLE":
                try:
                    event = sock.feed_sample(CurrentSample(ln.at, float(ln.arg)))
                except SmartSocketError as exc:
                    raise ScenarioError(ln.lineno, str(exc)) from None
                if event is not None:
                    self._emit(sock, event, ln.at, res)
            elif ln.verb == "EVENT":
                self._emit(sock, SwitchOnEvent(sock.id, ln.at), ln.at, res)
            else:
                try:
                    msg = codec.parse(ln.arg)
                except ParseError as exc:
                    logger.warning("socket %s ignored SMS %r: %s", sock.id, ln.arg, exc)
                    res.rejected_sms += 1
                    continue
                if not isinstance(msg, codec.Config):
                    logger.warning("socket %s ignored non-config SMS %r", sock.id, ln.arg)
                    res.rejected_sms += 1
                    continue
                sock.apply_config(msg, sender="sim:operator")
        res.dropped = sum(s.dropped for s in self.sockets.values())
        return res

    def _emit(self, sock: SmartSocket, event: SwitchOnEvent, now: dt.datetime,
              res: SimulationResult) -> None:
        res.events += 1
        out = sock.emit_notification(event, now)
        if out is None:
            return
        destination, env = out
        res.notifications += 1
        if sock.config.mode is Mode.MIDDLEWARE:
            res.inputs.append(Frame(env))
        else:
            res.direct += 1
            if self.direct_send is not None:
                self.direct_send(destination, env)


def drive(gateway, inputs: Iterable[GatewayInput]) -> None:
    for item in inputs:
        if isinstance(item, Tick):
            gateway.tick(item.at)
        else:
            gateway.ingest(item.env)
