"""Per-socket time-of-day pattern learning and absence alarms.

A (socket, bin) pair becomes an active pattern once switch-on events
land in that bin on ``pattern_days`` consecutive days. When an active
bin closes (bin end plus a grace period) without an event that day, an
:class:`~smartsocket.model.Alarm` is raised and the streak starts over.
"""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

from . import model
from .errors import ConfigError, DuplicateClose, OutOfOrderEvent, UnknownSocket
from .model import Alarm, SwitchOnEvent

logger = logging.getLogger(__name__)

ONE_DAY = dt.timedelta(days=1)


@dataclass(frozen=True)
class EngineParams:
    pattern_days: int = 3
    grace_minutes: int = 15
    bin_size_minutes: int = model.DEFAULT_BIN_SIZE
    reorder_tolerance_seconds: int = 0

    def __post_init__(self):
        model.check_bin_size(self.bin_size_minutes)
        if not isinstance(self.pattern_days, int) or self.pattern_days < 2:
            raise ConfigError(f"pattern_days must be an integer >= 2, got {self.pattern_days!r}")
        if not isinstance(self.grace_minutes, int) or self.grace_minutes < 0:
            raise ConfigError(f"grace_minutes must be an integer >= 0, got {self.grace_minutes!r}")
        if self.reorder_tolerance_seconds < 0:
            raise ConfigError("reorder_tolerance_seconds must be >= 0")

    @property
    def grace(self) -> dt.timedelta:
        return dt.timedelta(minutes=self.grace_minutes)

    def close_due(self, day: dt.date, index: int) -> dt.datetime:
        """Earliest instant the (bin, day) slot may be closed."""
        return model.bin_end(day, index, self.bin_size_minutes) + self.grace


@dataclass(frozen=True)
class PatternState:
    socket: str
    bin: int
    consecutive_hits: int
    last_hit_date: dt.date | None
    active: bool

    def render(self, bin_size_minutes: int) -> str:
        return (f"bin={self.bin} window={model.bin_window(self.bin, bin_size_minutes)} "
                f"hits={self.consecutive_hits} active={str(self.active).lower()}")


@dataclass
class _Streak:
    hits: int = 0
    last_hit: dt.date | None = None
    last_closed: dt.date | None = None
    # hit date -> streak length ending that day; recent dates only
    history: dict[dt.date, int] = field(default_factory=dict)
    # day of the last alarm; streaks never chain across it
    barrier: dt.date | None = None

    def prune(self) -> None:
        marks = [d for d in (self.last_closed, self.last_hit) if d is not None]
        if not marks:
            return
        horizon = min(marks) - ONE_DAY
        for day in [d for d in self.history if d < horizon]:
            del self.history[day]


@dataclass
class _SocketPatterns:
    streaks: dict[int, _Streak] = field(default_factory=dict)
    high_water: dt.datetime | None = None


class PatternEngine:
    """Incremental pattern state for many sockets.

    Calls for one socket must be serialized by the caller; different
    sockets touch disjoint state.
    """

    def __init__(self, params: EngineParams | None = None):
        self.params = params or EngineParams()
        self._sockets: dict[str, _SocketPatterns] = {}
        self.alarms: list[Alarm] = []
        self._alarm_keys: set[str] = set()

    def known(self, socket: str) -> bool:
        return socket in self._sockets

    def touch(self, socket: str) -> None:
        """Mark a socket as seen (e.g. after a config message)."""
        self._sockets.setdefault(socket, _SocketPatterns())

    def sockets(self) -> list[str]:
        return sorted(self._sockets)

    def check_order(self, socket: str, at: dt.datetime) -> None:
        """Raise OutOfOrderEvent if ``at`` lags the socket's high-water mark too far."""
        sp = self._sockets.get(socket)
        if sp is None or sp.high_water is None:
            return
        lag = (sp.high_water - at).total_seconds()
        if lag > self.params.reorder_tolerance_seconds:
            raise OutOfOrderEvent(
                f"{socket}: event at {model.format_ts(at)} is {lag:.0f}s behind "
                f"{model.format_ts(sp.high_water)}")

    def ingest_event(self, e: SwitchOnEvent) -> PatternState:
        p = self.params
        self.check_order(e.socket, e.at)
        sp = self._sockets.setdefault(e.socket, _SocketPatterns())
        if sp.high_water is None or e.at > sp.high_water:
            sp.high_water = e.at

        index = model.bin_of(e.at, p.bin_size_minutes)
        day = e.at.date()
        st = sp.streaks.setdefault(index, _Streak())
        if day not in st.history:
            prev = day - ONE_DAY
            chained = st.barrier is None or prev >= st.barrier
            st.history[day] = (st.history.get(prev, 0) if chained else 0) + 1
            if st.last_hit is None or day > st.last_hit:
                # equals +1 when last_hit is yesterday, 1 after a gap or reset
                st.hits = st.history[day]
                st.last_hit = day
            st.prune()
        # a repeat within the same bin-day changes nothing
        return self._state(e.socket, index, st)

    def close_bin(self, socket: str, index: int, day: dt.date, now: dt.datetime) -> Alarm | None:
        p = self.params
        due = p.close_due(day, index)
        if now < due:
            raise ValueError(
                f"close of {socket}/{day}/{index} at {model.format_ts(now)} precedes "
                f"{model.format_ts(due)}")
        sp = self._sockets.setdefault(socket, _SocketPatterns())
        st = sp.streaks.setdefault(index, _Streak())
        if st.last_closed is not None and day <= st.last_closed:
            raise DuplicateClose(f"{socket}/{day.isoformat()}/{index}")
        st.last_closed = day

        # judge the day by the streak that ended the day before, which also
        # holds when a later day's event in this bin was ingested first
        if day in st.history or st.history.get(day - ONE_DAY, 0) < p.pattern_days:
            st.prune()
            return None
        alarm = Alarm(socket, index, day, now)
        st.barrier = day
        if st.last_hit is None or st.last_hit < day:
            st.hits = 0
            st.last_hit = None
        st.prune()
        if alarm.dedupe_key in self._alarm_keys:
            # unreachable through close-once; kept as a hard guard
            return None
        self._alarm_keys.add(alarm.dedupe_key)
        self.alarms.append(alarm)
        logger.info("alarm %s raised at %s", alarm.dedupe_key, model.format_ts(now))
        return alarm

    def snapshot(self, socket: str) -> list[PatternState]:
        sp = self._sockets.get(socket)
        if sp is None:
            raise UnknownSocket(socket)
        out = [self._state(socket, i, st) for i, st in sorted(sp.streaks.items())]
        return [s for s in out if s.consecutive_hits > 0 or s.active]

    def _state(self, socket: str, index: int, st: _Streak) -> PatternState:
        return PatternState(socket, index, st.hits, st.last_hit,
                            st.hits >= self.params.pattern_days)
