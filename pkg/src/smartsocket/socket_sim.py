"""Virtual smart socket: a current sensor with an SMS modem.

The socket watches its load current and reports appliance switch-on.
A single configuration SMS tells it where notifications go; when that
address is the middleware server the socket runs in MIDDLEWARE mode,
otherwise notifications go straight to the person watching.
"""
from __future__ import annotations

import datetime as dt
import enum
import logging
from dataclasses import dataclass

from . import codec, model
from .errors import OutOfOrderSample
from .model import Mode, SocketConfig, Source, SwitchOnEvent

logger = logging.getLogger(__name__)

DEFAULT_I_ON = 0.10
DEFAULT_DEBOUNCE = 5


class Load(enum.Enum):
    OFF = "OFF"
    CANDIDATE = "CANDIDATE"
    ON = "ON"


@dataclass(frozen=True)
class CurrentSample:
    at: dt.datetime
    amps: float

    def __post_init__(self):
        if not self.amps >= 0:
            raise ValueError(f"current must be non-negative, got {self.amps!r}")


class SmartSocket:
    """One simulated socket. Single owner; not thread-safe."""

    def __init__(self, socket_id: str, server_address: str,
                 i_on: float = DEFAULT_I_ON, debounce_seconds: int = DEFAULT_DEBOUNCE):
        if not model.is_socket_id(socket_id):
            raise ValueError(f"bad socket id {socket_id!r}")
        if not i_on > 0:
            raise ValueError("i_on must be positive")
        if debounce_seconds < 0:
            raise ValueError("debounce_seconds must be >= 0")
        self.id = socket_id
        self.server_address = server_address
        self.i_on = i_on
        self.debounce_seconds = debounce_seconds
        self.config: SocketConfig | None = None
        self.load = Load.OFF
        self.candidate_since: dt.datetime | None = None
        self.last_sample_at: dt.datetime | None = None
        self.dropped = 0

    @property
    def address(self) -> str:
        return f"sim:{self.id}"

    def apply_config(self, msg: codec.Config, sender: str | None = None) -> SocketConfig:
        # any sender may reconfigure; latest wins
        mode = Mode.MIDDLEWARE if msg.destination == self.server_address else Mode.DIRECT
        self.config = SocketConfig(self.id, msg.destination, mode)
        logger.debug("socket %s configured by %s: %s", self.id, sender, self.config)
        return self.config

    def feed_sample(self, s: CurrentSample) -> SwitchOnEvent | None:
        if self.last_sample_at is not None and s.at < self.last_sample_at:
            raise OutOfOrderSample(
                f"{self.id}: sample at {s.at} precedes {self.last_sample_at}")
        self.last_sample_at = s.at
        above = s.amps >= self.i_on

        if not above:
            self.load = Load.OFF
            self.candidate_since = None
            return None
        if self.load is Load.ON:
            return None
        if self.load is Load.OFF:
            self.load = Load.CANDIDATE
            self.candidate_since = s.at
        # a zero debounce confirms on the crossing sample itself
        if (s.at - self.candidate_since).total_seconds() >= self.debounce_seconds:
            event = SwitchOnEvent(self.id, self.candidate_since, Source.DEVICE_REPORTED)
            self.load = Load.ON
            self.candidate_since = None
            return event
        return None

    def emit_notification(self, e: SwitchOnEvent, now: dt.datetime) -> tuple[str, codec.Envelope] | None:
        """Return ``(destination, envelope)`` or ``None`` if unconfigured."""
        if e.socket != self.id:
            raise ValueError(f"event for {e.socket} fed to socket {self.id}")
        if self.config is None:
            self.dropped += 1
            return None
        body = codec.serialize(codec.Notification(self.id, e.at))
        return self.config.destination, codec.Envelope(self.address, now, body)
