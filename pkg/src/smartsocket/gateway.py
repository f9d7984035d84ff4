"""Middleware ingestion service.

Frames arrive as ``<iso8601>\\t<sender>\\t<body>`` lines. Every frame first
advances the clock (closing any bins whose grace period has passed), then
its body is parsed, logged and fed to the pattern engine. The log is
written before the engine is touched, so a restarted service rebuilds
exactly the state it had by replaying the log.
"""
from __future__ import annotations

import asyncio
import collections
import datetime as dt
import logging
import re
import signal
from pathlib import Path
from typing import Callable, Iterable

from . import codec, model, store
from .config import ServiceConfig
from .engine import EngineParams, PatternEngine
from .errors import Corrupt, OutOfOrderEvent, ParseError
from .model import Alarm, Source, SwitchOnEvent
from .router import Delivery, DeliveryKind, Router, Transport, stub_transports
from .store import EventLog, Kind, LogRecord

logger = logging.getLogger(__name__)

_ALARM_PAYLOAD = re.compile(r"date=(\d{4}-\d{2}-\d{2}) bin=(\d+)")


def socket_for_sender(sender: str) -> str:
    """Socket id under which a server-side Config is audited."""
    if sender.startswith("sim:") and model.is_socket_id(sender[4:]):
        return sender[4:]
    if model.is_phone(sender):
        return sender[1:][-16:]
    return re.sub(r"[^A-Za-z0-9_-]", "_", sender)[-16:]


def alarm_payload(a: Alarm) -> str:
    return f"date={a.date.isoformat()} bin={a.bin}"


def parse_alarm_record(rec: LogRecord) -> Alarm:
    m = _ALARM_PAYLOAD.fullmatch(rec.payload)
    if m is None:
        raise Corrupt(f"bad ALARM payload {rec.payload!r}")
    return Alarm(rec.socket, int(m.group(2)), dt.date.fromisoformat(m.group(1)), rec.at)


class BinScheduler:
    """Tracks, per socket, the next (day, bin) slot still to be closed.

    A socket's first slot is the one containing the first time it was
    seen; earlier slots cannot hold a pattern.
    """

    def __init__(self, params: EngineParams):
        self.params = params
        self.per_day = model.bins_per_day(params.bin_size_minutes)
        self.step = dt.timedelta(minutes=params.bin_size_minutes)
        # socket -> (day, bin, due time) of its next unclosed slot
        self.cursors: dict[str, tuple[dt.date, int, dt.datetime]] = {}
        self._earliest: dt.datetime | None = None

    def track(self, socket: str, at: dt.datetime) -> None:
        if socket not in self.cursors:
            day, index = at.date(), model.bin_of(at, self.params.bin_size_minutes)
            when = self.params.close_due(day, index)
            self.cursors[socket] = (day, index, when)
            if self._earliest is None or when < self._earliest:
                self._earliest = when

    def due(self, now: dt.datetime) -> list[tuple[dt.datetime, str, dt.date, int]]:
        """Pop every slot due at or before ``now``, in chronological order."""
        if self._earliest is None or now < self._earliest:
            return []
        out = []
        for socket, (day, index, when) in self.cursors.items():
            while when <= now:
                out.append((when, socket, day, index))
                index += 1
                when += self.step
                if index == self.per_day:
                    index = 0
                    day += dt.timedelta(days=1)
            self.cursors[socket] = (day, index, when)
        self._earliest = min(c[2] for c in self.cursors.values())
        out.sort()
        return out


def rebuild(log_path, params: EngineParams) -> tuple[PatternEngine, list[Alarm], list[Alarm]]:
    """Replay a log through a fresh engine without writing or routing.

    Returns ``(engine, recomputed_alarms, logged_alarms)``.
    """
    engine = PatternEngine(params)
    scheduler = BinScheduler(params)
    recomputed: list[Alarm] = []
    logged: list[Alarm] = []
    for rec in store.replay(log_path):
        for when, socket, day, index in scheduler.due(rec.at):
            a = engine.close_bin(socket, index, day, when)
            if a is not None:
                recomputed.append(a)
        if rec.kind is Kind.EVENT:
            event = SwitchOnEvent(rec.socket, model.parse_ts(rec.payload), Source.REPLAYED)
            scheduler.track(event.socket, event.at)
            engine.ingest_event(event)
        elif rec.kind is Kind.CONFIG:
            engine.touch(rec.socket)
            scheduler.track(rec.socket, rec.at)
        else:
            logged.append(parse_alarm_record(rec))
    return engine, recomputed, logged


class Gateway:
    """One service instance bound to a log, journal and outbox directory.

    ``checkpoint`` is called with a label after every durable or state
    changing step; tests use it to inject crashes.
    """

    def __init__(self, config: ServiceConfig, transports: Iterable[Transport] | None = None,
                 checkpoint: Callable[[str], None] | None = None):
        self.config = config
        self.params = config.params
        self.engine = PatternEngine(self.params)
        self.router = Router(config.routes, journal=config.journal_path,
                             max_attempts=config.max_attempts, backoff=config.backoff)
        if transports is None:
            transports = stub_transports(config.outbox_dir)
        for t in transports:
            self.router.register_transport(t)
        self.checkpoint = checkpoint or (lambda label: None)
        self.counters: collections.Counter = collections.Counter()
        self.alarms: list[Alarm] = []
        self.recovered_alarms: list[Alarm] = []
        self._now: dt.datetime | None = None
        self.scheduler = BinScheduler(self.params)
        self._seen: set[str] = set()
        self._logged_alarms: set[str] = set()
        self._dead: set[str] = set()
        self._load_dead_letters()
        self.log = EventLog(config.log_path, fsync=config.fsync)
        self._recover()

    @property
    def now(self) -> dt.datetime | None:
        return self._now

    def close(self) -> None:
        self.log.close()

    # -- clock -------------------------------------------------------------

    def _close_due(self, now: dt.datetime, live: bool) -> list[Alarm]:
        alarms = []
        for when, socket, day, index in self.scheduler.due(now):
            at = now if (live and self.config.clock == "wall") else when
            alarm = self.engine.close_bin(socket, index, day, at)
            if live:
                self.checkpoint("close")
            if alarm is not None:
                alarms.append(alarm)
        return alarms

    def tick(self, now: dt.datetime) -> list[Alarm]:
        """Close every bin due at or before ``now``; log and route alarms.

        A ``now`` at or behind the previous tick is a no-op.
        """
        if self._now is not None and now <= self._now:
            return []
        self._now = now
        alarms = self._close_due(now, live=True)
        for a in alarms:
            self.log.append(LogRecord(a.raised_at, Kind.ALARM, a.socket, alarm_payload(a)))
            self._logged_alarms.add(a.dedupe_key)
            self.checkpoint("append-alarm")
        for a in alarms:
            self._enqueue(self._alarm_deliveries(a))
        self._drain()
        self.alarms.extend(alarms)
        self.counters["alarms"] += len(alarms)
        return alarms

    # -- ingestion ---------------------------------------------------------

    def ingest(self, env: codec.Envelope) -> codec.Message | None:
        self.tick(env.received_at)
        now = self._now
        try:
            msg = codec.parse(env.body)
        except ParseError as exc:
            self._dead_letter(env, exc)
            return None

        if isinstance(msg, codec.Config):
            socket = socket_for_sender(env.sender)
            payload = f"{model.format_ts(env.received_at)} {env.body}"
            key = f"CFG/{socket}/{payload}"
            if key in self._seen:
                self.counters["duplicates"] += 1
                return None
            self.log.append(LogRecord(now, Kind.CONFIG, socket, payload))
            self._seen.add(key)
            self.checkpoint("append-config")
            self.engine.touch(socket)
            self.scheduler.track(socket, now)
            self.counters["configs"] += 1
            return msg

        event = SwitchOnEvent(msg.socket, msg.at_override or env.received_at)
        if event.dedupe_key in self._seen:
            self.counters["duplicates"] += 1
            return None
        try:
            self.engine.check_order(event.socket, event.at)
        except OutOfOrderEvent as exc:
            self._dead_letter(env, exc)
            return None
        self.log.append(LogRecord(now, Kind.EVENT, event.socket, model.format_ts(event.at)))
        self._seen.add(event.dedupe_key)
        self.checkpoint("append-event")
        self.scheduler.track(event.socket, event.at)
        self.engine.ingest_event(event)
        self.checkpoint("engine-ingest")
        self.counters["events"] += 1
        self._enqueue(self._notification_deliveries(event, now))
        self._drain()
        return msg

    def process_frame(self, line: str) -> None:
        """Ingest one raw frame; malformed framing is dead-lettered."""
        try:
            env = codec.parse_frame(line)
        except ParseError as exc:
            raw = line.rstrip("\n").replace("\t", " ")
            self._dead_letter(None, exc, raw=raw)
            return
        self.ingest(env)

    # -- deliveries --------------------------------------------------------

    def _notification_deliveries(self, e: SwitchOnEvent, now: dt.datetime) -> list[Delivery]:
        if not self.config.forward_notifications:
            return []
        body = codec.serialize(codec.Notification(e.socket, e.at))
        return [Delivery(DeliveryKind.NOTIFICATION, e.dedupe_key, dest, body, now)
                for dest in self.config.recipients_for(e.socket)]

    def _alarm_deliveries(self, a: Alarm) -> list[Delivery]:
        return [Delivery(DeliveryKind.ALARM, a.dedupe_key, dest, a.body(), a.raised_at)
                for dest in self.config.recipients_for(a.socket)]

    def _enqueue(self, deliveries: Iterable[Delivery]) -> None:
        for d in deliveries:
            self.router.enqueue(d)

    def _drain(self) -> None:
        self.router.drain(after=lambda d: self.checkpoint("route"))

    # -- dead letters ------------------------------------------------------

    def _load_dead_letters(self) -> None:
        path = Path(self.config.dead_letter_path)
        if path.exists():
            self._dead.update(path.read_text(encoding="ascii", errors="replace").splitlines())

    def _dead_letter(self, env: codec.Envelope | None, exc: Exception, raw: str = "") -> None:
        err = str(exc)
        if not isinstance(exc, ParseError):
            err = f"{type(exc).__name__}: {err}"
        err = err.replace("\t", " ").replace("\n", " ")
        if env is None:
            line = f"-\t-\t{raw}\t{err}"
        else:
            line = f"{model.format_ts(env.received_at)}\t{env.sender}\t{env.body}\t{err}"
        self.counters["dead_letters"] += 1
        if line in self._dead:
            return
        path = Path(self.config.dead_letter_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="ascii", errors="replace", newline="\n") as fh:
            fh.write(line + "\n")
        self._dead.add(line)
        logger.warning("dead letter: %s", line)
        self.checkpoint("dead-letter")

    # -- recovery ----------------------------------------------------------

    def _recover(self) -> None:
        recomputed: list[Alarm] = []
        pending: list[Delivery] = []
        n = 0
        for rec in store.replay(self.config.log_path):
            n += 1
            recomputed += self._close_due(rec.at, live=False)
            if self._now is None or rec.at > self._now:
                self._now = rec.at
            if rec.kind is Kind.EVENT:
                event = SwitchOnEvent(rec.socket, model.parse_ts(rec.payload), Source.REPLAYED)
                self._seen.add(event.dedupe_key)
                self.scheduler.track(event.socket, event.at)
                self.engine.ingest_event(event)
                pending += self._notification_deliveries(event, rec.at)
            elif rec.kind is Kind.CONFIG:
                self._seen.add(f"CFG/{rec.socket}/{rec.payload}")
                self.engine.touch(rec.socket)
                self.scheduler.track(rec.socket, rec.at)
            else:
                a = parse_alarm_record(rec)
                self._logged_alarms.add(a.dedupe_key)
                pending += self._alarm_deliveries(a)

        keys = {a.dedupe_key for a in recomputed}
        stray = self._logged_alarms - keys
        if stray:
            logger.warning("logged alarms not reproduced by replay: %s", sorted(stray))
        for a in recomputed:
            if a.dedupe_key not in self._logged_alarms:
                # closed in memory before a crash, never made it to the log
                self.log.append(LogRecord(a.raised_at, Kind.ALARM, a.socket, alarm_payload(a)))
                self._logged_alarms.add(a.dedupe_key)
                pending += self._alarm_deliveries(a)
        self.recovered_alarms = recomputed
        self._enqueue(d for d in pending if d.store_key not in self.router.store)
        self._drain()
        if n:
            logger.info("recovered %d log records, %d alarm(s)", n, len(recomputed))


def serve_file(gateway: Gateway, path) -> None:
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        for line in fh:
            if line.strip():
                gateway.process_frame(line)


async def serve_tcp(gateway: Gateway, host: str, port: int, *,
                    tick_seconds: float = 1.0, ready: Callable[[], None] | None = None) -> None:
    """Serve newline-delimited frames until SIGINT/SIGTERM."""
    lock = asyncio.Lock()
    stop = asyncio.Event()

    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while line := await reader.readline():
                async with lock:
                    gateway.process_frame(line.decode("ascii", errors="replace"))
        finally:
            writer.close()

    async def wall_clock() -> None:
        while not stop.is_set():
            await asyncio.sleep(tick_seconds)
            async with lock:
                gateway.tick(dt.datetime.now().replace(microsecond=0))

    server = await asyncio.start_server(handle, host, port)
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        loop.add_signal_handler(sig, stop.set)
    ticker = asyncio.create_task(wall_clock()) if gateway.config.clock == "wall" else None
    logger.info("listening on %s:%d", host, port)
    if ready is not None:
        ready()
    async with server:
        await stop.wait()
    if ticker is not None:
        ticker.cancel()
