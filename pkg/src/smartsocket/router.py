"""Alert delivery over pluggable transports.

Delivery is at-least-once with deduplication: a ``(dedupe_key,
destination)`` pair that has been SENT is never sent again, so each
transport outbox shows one effect per key. Shipped transports are file
stubs standing in for an SMS modem, a push service and a webhook.
"""
from __future__ import annotations

import collections
import datetime as dt
import enum
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol

from . import model
from .errors import DuplicateTransport, NoTransport

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BACKOFF = dt.timedelta(seconds=1)
STUB_TRANSPORTS = ("sms", "push", "webhook")


class SendResult(enum.Enum):
    OK = "OK"
    TRANSIENT = "TRANSIENT"
    PERMANENT = "PERMANENT"


class DeliveryKind(enum.Enum):
    NOTIFICATION = "NOTIFICATION"
    ALARM = "ALARM"


class Status(enum.Enum):
    PENDING = "PENDING"
    SENT = "SENT"
    FAILED = "FAILED"


class Transport(Protocol):
    name: str

    def send(self, destination: str, body: str, at: dt.datetime | None = None) -> SendResult:
        ...


@dataclass
class Delivery:
    kind: DeliveryKind
    dedupe_key: str
    destination: str
    body: str
    created_at: dt.datetime
    attempts: int = 0
    status: Status = Status.PENDING

    @property
    def store_key(self) -> tuple[str, str]:
        return self.dedupe_key, self.destination


class FileOutbox:
    """Stub transport appending ``<iso8601>\\t<destination>\\t<body>`` lines.

    ``script`` is a list of results returned by successive sends before
    the stub starts succeeding, for failure injection.
    """

    def __init__(self, name: str, path, script: Iterable[SendResult] = ()):
        self.name = name
        self.path = Path(path)
        self.script = collections.deque(script)
        self.calls = 0
        self._lock = threading.Lock()

    def send(self, destination: str, body: str, at: dt.datetime | None = None) -> SendResult:
        with self._lock:
            self.calls += 1
            if self.script:
                result = self.script.popleft()
                if result is not SendResult.OK:
                    return result
            at = at or dt.datetime.now().replace(microsecond=0)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="ascii", newline="\n") as fh:
                fh.write(f"{model.format_ts(at)}\t{destination}\t{body}\n")
                fh.flush()
            return SendResult.OK

    def lines(self) -> list[str]:
        if not self.path.exists():
            return []
        return self.path.read_text(encoding="ascii").splitlines()


def stub_transports(outbox_dir) -> list[FileOutbox]:
    outbox_dir = Path(outbox_dir)
    return [FileOutbox(name, outbox_dir / f"{name}.outbox") for name in STUB_TRANSPORTS]


class Router:
    def __init__(self, routes: dict[str, str] | None = None, journal=None,
                 max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                 backoff: dt.timedelta = DEFAULT_BACKOFF):
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.transports: dict[str, Transport] = {}
        self.routes = dict(routes or {})
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.journal = Path(journal) if journal else None
        self.store: dict[tuple[str, str], Delivery] = {}
        self._queue: collections.deque[Delivery] = collections.deque()
        self._lock = threading.RLock()
        if self.journal is not None:
            self._load_journal()

    def register_transport(self, t: Transport) -> None:
        with self._lock:
            if t.name in self.transports:
                raise DuplicateTransport(t.name)
            self.transports[t.name] = t

    def resolve(self, destination: str) -> Transport:
        name = self.routes.get(destination)
        if name is None:
            scheme = model.address_scheme(destination) if model.is_address(destination) else None
            if scheme is not None:
                name = self.routes.get(scheme, scheme)
            elif model.is_phone(destination):
                name = "sms"
        t = self.transports.get(name) if name else None
        if t is None:
            raise NoTransport(f"no transport for {destination!r}")
        return t

    def is_sent(self, dedupe_key: str, destination: str) -> bool:
        d = self.store.get((dedupe_key, destination))
        return d is not None and d.status is Status.SENT

    def route(self, d: Delivery) -> Delivery:
        with self._lock:
            existing = self.store.get(d.store_key)
            if existing is not None and existing.status is Status.SENT:
                return existing
            transport = self.resolve(d.destination)
            d.attempts = 0
            d.status = Status.PENDING
            while True:
                at = d.created_at + d.attempts * self.backoff
                d.attempts += 1
                result = transport.send(d.destination, d.body, at)
                if result is SendResult.OK:
                    d.status = Status.SENT
                    break
                if result is SendResult.PERMANENT or d.attempts >= self.max_attempts:
                    d.status = Status.FAILED
                    logger.error("delivery %s to %s failed after %d attempt(s): %s",
                                 d.dedupe_key, d.destination, d.attempts, result.value)
                    break
                logger.warning("transient failure delivering %s via %s, retrying",
                               d.dedupe_key, transport.name)
            self.store[d.store_key] = d
            self._journal(d)
            return d

    def enqueue(self, d: Delivery) -> None:
        with self._lock:
            self._queue.append(d)

    def drain(self, after: Callable[[Delivery], None] | None = None) -> list[Delivery]:
        """Route queued deliveries in FIFO order, calling ``after`` on each."""
        done = []
        with self._lock:
            while self._queue:
                d = self._queue.popleft()
                try:
                    d = self.route(d)
                except NoTransport as exc:
                    logger.error("%s", exc)
                    d.status = Status.FAILED
                    self.store[d.store_key] = d
                    self._journal(d)
                done.append(d)
                if after is not None:
                    after(d)
        return done

    def _journal(self, d: Delivery) -> None:
        if self.journal is None:
            return
        self.journal.parent.mkdir(parents=True, exist_ok=True)
        with open(self.journal, "a", encoding="ascii", newline="\n") as fh:
            fh.write(f"{d.dedupe_key}\t{d.destination}\t{d.kind.value}\t"
                     f"{d.status.value}\t{d.attempts}\n")
            fh.flush()

    def _load_journal(self) -> None:
        if not self.journal.exists():
            return
        for line in self.journal.read_text(encoding="ascii").splitlines():
            parts = line.split("\t")
            if len(parts) != 5:
                logger.warning("%s: skipping malformed journal line %r", self.journal, line)
                continue
            key, dest, kind, status, attempts = parts
            self.store[(key, dest)] = Delivery(
                DeliveryKind(kind), key, dest, "", dt.datetime.min, int(attempts), Status(status))
