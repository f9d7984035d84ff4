"""Service configuration: flat ``key=value`` text, ``#`` comments.

Recognised keys::

    server_address=+10000000000          (required)
    bin_size_minutes=60
    pattern_days=3
    grace_minutes=15
    reorder_tolerance_seconds=0
    log_path=events.log
    dead_letter_path=dead_letters.log
    journal_path=deliveries.log
    outbox_dir=outbox
    listen=127.0.0.1:7070                (or input=frames.txt)
    clock=logical                        (logical | wall)
    max_attempts=3
    backoff_seconds=1
    forward_notifications=true
    fsync=true
    recipients.S001=+37126000001,push:user42
    recipients.*=+37126000009            (fallback for other sockets)
    route.push=push                      (scheme or exact address -> transport)
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

from . import model
from .engine import EngineParams
from .errors import ConfigError

_INT_KEYS = ("bin_size_minutes", "pattern_days", "grace_minutes",
             "reorder_tolerance_seconds", "max_attempts", "backoff_seconds")
_BOOL_KEYS = ("forward_notifications", "fsync")
_STR_KEYS = ("server_address", "log_path", "dead_letter_path", "journal_path",
             "outbox_dir", "listen", "input", "clock")


@dataclass
class ServiceConfig:
    server_address: str
    bin_size_minutes: int = model.DEFAULT_BIN_SIZE
    pattern_days: int = 3
    grace_minutes: int = 15
    reorder_tolerance_seconds: int = 0
    log_path: Path = Path("events.log")
    dead_letter_path: Path = Path("dead_letters.log")
    journal_path: Path = Path("deliveries.log")
    outbox_dir: Path = Path("outbox")
    listen: tuple[str, int] | None = None
    input: Path | None = None
    clock: str = "logical"
    max_attempts: int = 3
    backoff_seconds: int = 1
    forward_notifications: bool = True
    fsync: bool = True
    recipients: dict[str, list[str]] = field(default_factory=dict)
    routes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not model.is_address(self.server_address):
            raise ConfigError(f"server_address is not an address: {self.server_address!r}")
        if self.clock not in ("logical", "wall"):
            raise ConfigError(f"clock must be 'logical' or 'wall', got {self.clock!r}")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be >= 1")
        if self.backoff_seconds < 0:
            raise ConfigError("backoff_seconds must be >= 0")
        for socket, addrs in self.recipients.items():
            for a in addrs:
                if not model.is_address(a):
                    raise ConfigError(f"recipients.{socket}: bad address {a!r}")
        self.params  # validates engine fields

    @property
    def params(self) -> EngineParams:
        return EngineParams(self.pattern_days, self.grace_minutes,
                            self.bin_size_minutes, self.reorder_tolerance_seconds)

    @property
    def backoff(self) -> dt.timedelta:
        return dt.timedelta(seconds=self.backoff_seconds)

    def recipients_for(self, socket: str) -> list[str]:
        return self.recipients.get(socket, self.recipients.get("*", []))


def _parse_bool(key, value):
    low = value.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def parse_config(text: str) -> ServiceConfig:
    kw: dict = {"recipients": {}, "routes": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("recipients."):
            kw["recipients"][key[len("recipients."):]] = [
                a.strip() for a in value.split(",") if a.strip()]
        elif key.startswith("route."):
            kw["routes"][key[len("route."):]] = value
        elif key in _INT_KEYS:
            try:
                kw[key] = int(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from None
        elif key in _BOOL_KEYS:
            kw[key] = _parse_bool(key, value)
        elif key in _STR_KEYS:
            kw[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    if "server_address" not in kw:
        raise ConfigError("server_address is required")
    for key in ("log_path", "dead_letter_path", "journal_path", "outbox_dir", "input"):
        if key in kw:
            kw[key] = Path(kw[key])
    if "listen" in kw:
        host, sep, port = kw["listen"].rpartition(":")
        if not sep or not port.isdigit():
            raise ConfigError(f"listen must be host:port, got {kw['listen']!r}")
        kw["listen"] = (host or "127.0.0.1", int(port))
    return ServiceConfig(**kw)


def load_config(path) -> ServiceConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text)
