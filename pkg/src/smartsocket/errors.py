"""Exception hierarchy shared by every smartsocket module."""


class SmartSocketError(Exception):
    pass


class ConfigError(SmartSocketError, ValueError):
    pass


class ParseError(SmartSocketError, ValueError):
    """Base for codec rejections. ``token`` holds the offending text."""

    def __init__(self, token, detail=""):
        self.token = token
        msg = f"{type(self).__name__}: {token!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class UnknownKeyword(ParseError):
    pass


class MalformedAddress(ParseError):
    pass


class MalformedSocketId(ParseError):
    pass


class MalformedTimestamp(ParseError):
    pass


class MalformedMessage(ParseError):
    """Structural problems: arity, spacing, length, non-ASCII."""


class OutOfOrderSample(SmartSocketError):
    pass


class OutOfOrderEvent(SmartSocketError):
    pass


class DuplicateClose(SmartSocketError):
    pass


class UnknownSocket(SmartSocketError, KeyError):
    def __str__(self):
        return f"UnknownSocket: {self.args[0]!r}"


class NoTransport(SmartSocketError):
    pass


class DuplicateTransport(SmartSocketError):
    pass


class StorageFull(SmartSocketError, OSError):
    pass


class Corrupt(SmartSocketError):
    pass
