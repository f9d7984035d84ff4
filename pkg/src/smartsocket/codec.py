"""SMS-style text protocol.

Bodies are single ASCII lines of at most 160 characters::

    CFG <address>
    ON <socket_id>
    ON <socket_id> @<YYYY-MM-DDTHH:MM:SS>

Tokens are separated by exactly one space and keywords are uppercase.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Union

from . import model
from .errors import (
    MalformedAddress,
    MalformedMessage,
    MalformedSocketId,
    MalformedTimestamp,
    UnknownKeyword,
)

MAX_BODY = 160


@dataclass(frozen=True)
class Config:
    destination: str


@dataclass(frozen=True)
class Notification:
    socket: str
    at_override: dt.datetime | None = None


Message = Union[Config, Notification]


@dataclass(frozen=True)
class Envelope:
    sender: str
    received_at: dt.datetime
    body: str


def check_body(body: str) -> None:
    if not isinstance(body, str):
        raise MalformedMessage(repr(body), "body must be text")
    if len(body) > MAX_BODY:
        raise MalformedMessage(body[:20] + "...", f"longer than {MAX_BODY} characters")
    if not body.isascii():
        raise MalformedMessage(body, "non-ASCII body")
    if any(not ch.isprintable() for ch in body):
        raise MalformedMessage(body, "control character in body")


def parse(body: str) -> Message:
    check_body(body)
    if body == "":
        raise MalformedMessage(body, "empty body")
    tokens = body.split(" ")
    if "" in tokens:
        raise MalformedMessage(body, "tokens must be separated by exactly one space")
    keyword, args = tokens[0], tokens[1:]
    if keyword == "CFG":
        if len(args) != 1:
            raise MalformedMessage(body, "CFG takes exactly one address")
        if not model.is_address(args[0]):
            raise MalformedAddress(args[0])
        return Config(args[0])
    if keyword == "ON":
        if len(args) not in (1, 2):
            raise MalformedMessage(body, "ON takes a socket id and an optional @timestamp")
        if not model.is_socket_id(args[0]):
            raise MalformedSocketId(args[0])
        at = None
        if len(args) == 2:
            stamp = args[1]
            if not stamp.startswith("@"):
                raise MalformedTimestamp(stamp, "expected @<iso8601>")
            try:
                at = model.parse_ts(stamp[1:])
            except ValueError:
                raise MalformedTimestamp(stamp) from None
        return Notification(args[0], at)
    raise UnknownKeyword(keyword)


def serialize(msg: Message) -> str:
    if isinstance(msg, Config):
        return f"CFG {msg.destination}"
    if isinstance(msg, Notification):
        if msg.at_override is None:
            return f"ON {msg.socket}"
        return f"ON {msg.socket} @{model.format_ts(msg.at_override)}"
    raise TypeError(f"not a message: {msg!r}")


def format_frame(env: Envelope) -> str:
    """Envelope frame without the trailing newline."""
    return f"{model.format_ts(env.received_at)}\t{env.sender}\t{env.body}"


def parse_frame(line: str) -> Envelope:
    """Split one ``<iso8601>\\t<sender>\\t<body>`` frame.

    Only the framing is validated here; the body is parsed later so that
    bad bodies can be dead-lettered with their sender attached.
    """
    line = line.rstrip("\n")
    parts = line.split("\t")
    if len(parts) != 3:
        raise MalformedMessage(line, "frame needs three tab-separated fields")
    stamp, sender, body = parts
    try:
        at = model.parse_ts(stamp)
    except ValueError:
        raise MalformedTimestamp(stamp) from None
    if not model.is_address(sender):
        raise MalformedAddress(sender)
    return Envelope(sender, at, body)
