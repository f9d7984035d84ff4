"""Append-only event log, one tab-separated record per line::

    <iso8601>\t<kind>\t<socket_id>\t<payload>

A final line without its newline is the residue of a crash mid-write.
Opening the log for writing truncates it; reading drops it with a
warning. Any other malformed line is fatal.
"""
from __future__ import annotations

import datetime as dt
import enum
import errno
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from . import model
from .errors import Corrupt, StorageFull

logger = logging.getLogger(__name__)


class Kind(enum.Enum):
    EVENT = "EVENT"
    CONFIG = "CONFIG"
    ALARM = "ALARM"


@dataclass(frozen=True)
class LogRecord:
    at: dt.datetime
    kind: Kind
    socket: str
    payload: str

    def to_line(self) -> str:
        if "\t" in self.payload or "\n" in self.payload:
            raise ValueError(f"payload may not contain tabs or newlines: {self.payload!r}")
        return f"{model.format_ts(self.at)}\t{self.kind.value}\t{self.socket}\t{self.payload}\n"

    @classmethod
    def from_line(cls, line: str) -> LogRecord:
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 4:
            raise ValueError("expected 4 tab-separated fields")
        stamp, kind, socket, payload = parts
        if not model.is_socket_id(socket):
            raise ValueError(f"bad socket id {socket!r}")
        return cls(model.parse_ts(stamp), Kind(kind), socket, payload)


def recover(path: Path) -> int:
    """Truncate a partial trailing line; returns the number of bytes cut."""
    if not path.exists():
        return 0
    with open(path, "rb+") as fh:
        data = fh.read()
        if not data or data.endswith(b"\n"):
            return 0
        keep = data.rfind(b"\n") + 1
        fh.truncate(keep)
    cut = len(data) - keep
    logger.warning("%s: truncated %d-byte partial trailing line", path, cut)
    return cut


class EventLog:
    """Single-writer append handle."""

    def __init__(self, path, fsync: bool = True):
        self.path = Path(path)
        self.fsync = fsync
        self.path.parent.mkdir(parents=True, exist_ok=True)
        recover(self.path)
        self._check_tail()
        self._fh = open(self.path, "a", encoding="ascii", newline="\n")

    def _check_tail(self) -> None:
        if not self.path.exists() or self.path.stat().st_size == 0:
            return
        with open(self.path, "rb") as fh:
            fh.seek(max(0, self.path.stat().st_size - 4096))
            tail = fh.read().splitlines()[-1].decode("ascii", "replace")
        try:
            LogRecord.from_line(tail)
        except ValueError as exc:
            raise Corrupt(f"{self.path}: last record unreadable: {exc}") from None

    def append(self, record: LogRecord) -> None:
        line = record.to_line()
        try:
            self._fh.write(line)
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())
        except OSError as exc:
            if exc.errno == errno.ENOSPC:
                raise StorageFull(str(exc)) from exc
            raise

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def replay(path, start: dt.datetime | None = None,
           end: dt.datetime | None = None) -> Iterator[LogRecord]:
    """Yield records in file order, optionally limited to ``start <= at <= end``."""
    path = Path(path)
    if not path.exists():
        return
    with open(path, "r", encoding="ascii", errors="replace", newline="\n") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.endswith("\n"):
                logger.warning("%s:%d: dropping partial trailing line", path, lineno)
                return
            try:
                rec = LogRecord.from_line(line)
            except ValueError as exc:
                raise Corrupt(f"{path}:{lineno}: {exc}") from None
            if start is not None and rec.at < start:
                continue
            if end is not None and rec.at > end:
                continue
            yield rec
