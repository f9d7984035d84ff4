"""Domain vocabulary: identifiers, time discretization, events and configs.

Timestamps are naive :class:`datetime.datetime` values at one-second
resolution, interpreted in the single civil timezone of the deployment.
"""
from __future__ import annotations

import datetime as dt
import enum
import re
from dataclasses import dataclass

from .errors import ConfigError

MINUTES_PER_DAY = 1440
DEFAULT_BIN_SIZE = 60

SOCKET_ID_RE = re.compile(r"[A-Za-z0-9_-]{1,16}")
PHONE_RE = re.compile(r"\+[0-9]{7,15}")
URI_RE = re.compile(r"([a-z][a-z0-9+.-]*):(\S+)")
MAX_URI_LEN = 32
ISO_RE = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}")


def is_socket_id(value: str) -> bool:
    return isinstance(value, str) and SOCKET_ID_RE.fullmatch(value) is not None


def is_phone(value: str) -> bool:
    return PHONE_RE.fullmatch(value) is not None


def is_address(value: str) -> bool:
    if not isinstance(value, str):
        return False
    if is_phone(value):
        return True
    return len(value) <= MAX_URI_LEN and value.isascii() and URI_RE.fullmatch(value) is not None


def address_scheme(address: str) -> str | None:
    """Scheme of a URI-form address, ``None`` for phone numbers."""
    if is_phone(address):
        return None
    return address.split(":", 1)[0]


def format_ts(at: dt.datetime) -> str:
    return at.strftime("%Y-%m-%dT%H:%M:%S")


def parse_ts(text: str) -> dt.datetime:
    """Strict ``YYYY-MM-DDTHH:MM:SS``; raises ValueError otherwise."""
    if ISO_RE.fullmatch(text) is None:
        raise ValueError(f"not an ISO-8601 second timestamp: {text!r}")
    return dt.datetime.fromisoformat(text)


def check_bin_size(bin_size_minutes: int) -> int:
    if (
        not isinstance(bin_size_minutes, int)
        or bin_size_minutes <= 0
        or MINUTES_PER_DAY % bin_size_minutes
    ):
        raise ConfigError(f"bin_size_minutes must divide 1440, got {bin_size_minutes!r}")
    return bin_size_minutes


def bins_per_day(bin_size_minutes: int) -> int:
    return MINUTES_PER_DAY // check_bin_size(bin_size_minutes)


def bin_of(at: dt.datetime, bin_size_minutes: int = DEFAULT_BIN_SIZE) -> int:
    check_bin_size(bin_size_minutes)
    return (at.hour * 60 + at.minute) // bin_size_minutes


def bin_start(day: dt.date, index: int, bin_size_minutes: int) -> dt.datetime:
    return dt.datetime.combine(day, dt.time()) + dt.timedelta(minutes=index * bin_size_minutes)


def bin_end(day: dt.date, index: int, bin_size_minutes: int) -> dt.datetime:
    return bin_start(day, index + 1, bin_size_minutes)


def bin_window(index: int, bin_size_minutes: int) -> str:
    """Render a bin as ``HH:MM-HH:MM``; the last bin ends at ``24:00``."""
    lo = index * bin_size_minutes
    hi = lo + bin_size_minutes
    return f"{lo // 60:02d}:{lo % 60:02d}-{hi // 60:02d}:{hi % 60:02d}"


class Source(enum.Enum):
    DEVICE_REPORTED = "DEVICE_REPORTED"
    REPLAYED = "REPLAYED"


class Mode(enum.Enum):
    DIRECT = "DIRECT"
    MIDDLEWARE = "MIDDLEWARE"


@dataclass(frozen=True)
class SwitchOnEvent:
    socket: str
    at: dt.datetime
    source: Source = Source.DEVICE_REPORTED

    @property
    def dedupe_key(self) -> str:
        return f"{self.socket}/{format_ts(self.at)}"


@dataclass(frozen=True)
class SocketConfig:
    socket: str
    destination: str
    mode: Mode


@dataclass(frozen=True)
class Alarm:
    socket: str
    bin: int
    date: dt.date
    raised_at: dt.datetime

    @property
    def dedupe_key(self) -> str:
        return f"{self.socket}/{self.date.isoformat()}/{self.bin}"

    def body(self) -> str:
        return f"ALARM {self.socket} {self.date.isoformat()} bin={self.bin} no activity in usual time"
