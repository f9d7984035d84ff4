"""Smart socket activity monitoring: virtual sockets and a pattern-learning middleware."""

from .codec import Config, Envelope, Notification, parse, serialize
from .engine import EngineParams, PatternEngine, PatternState
from .model import Alarm, Mode, SocketConfig, Source, SwitchOnEvent, bin_of

__version__ = "0.1.0"

__all__ = [
    "Alarm", "Config", "EngineParams", "Envelope", "Mode", "Notification",
    "PatternEngine", "PatternState", "SocketConfig", "Source", "SwitchOnEvent",
    "bin_of", "parse", "serialize",
]
