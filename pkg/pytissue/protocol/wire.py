"""Newline-delimited ASCII wire format.

    HELLO <antigen|signal|response> <version>
    ANTIGEN <uint>
    SIGNAL <uint> <decimal>
    RESPONSE <uint> <uint_us>
    BYE

Tokens are separated by single spaces. The server may also send
`ERR <reason>` to notify a client that a message was rejected.
"""

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from pytissue.errors import ProtocolError, ProtocolErrorKind


PROTOCOL_VERSION = 1
MAX_UINT = 2**64 - 1

_UINT = re.compile(r"[0-9]+")
_DECIMAL = re.compile(r"[0-9]+(\.[0-9]+)?([eE][+-]?[0-9]+)?")


class ClientKind(str, Enum):
    """Role declared by a client in its HELLO."""
    ANTIGEN = "antigen"
    SIGNAL = "signal"
    RESPONSE = "response"


class MessageKind(str, Enum):
    HELLO = "HELLO"
    ANTIGEN = "ANTIGEN"
    SIGNAL = "SIGNAL"
    RESPONSE = "RESPONSE"
    BYE = "BYE"
    ERR = "ERR"


@dataclass(frozen=True, slots=True)
class WireMessage:
    """One protocol message; only the fields of its kind are set."""
    kind: MessageKind
    client: Optional[ClientKind] = None
    version: Optional[int] = None
    antigen: Optional[int] = None
    signal_id: Optional[int] = None
    level: Optional[float] = None
    t_us: Optional[int] = None
    reason: Optional[str] = None

    @classmethod
    def hello(cls, client: ClientKind, version: int = PROTOCOL_VERSION) -> "WireMessage":
        return cls(MessageKind.HELLO, client=client, version=version)

    @classmethod
    def antigen_msg(cls, value: int) -> "WireMessage":
        return cls(MessageKind.ANTIGEN, antigen=value)

    @classmethod
    def signal_msg(cls, signal_id: int, level: float) -> "WireMessage":
        # + 0.0 folds -0.0 into 0.0, which has a decodable spelling
        return cls(MessageKind.SIGNAL, signal_id=signal_id, level=float(level) + 0.0)

    @classmethod
    def response_msg(cls, value: int, t_us: int) -> "WireMessage":
        return cls(MessageKind.RESPONSE, antigen=value, t_us=t_us)

    @classmethod
    def bye(cls) -> "WireMessage":
        return cls(MessageKind.BYE)

    @classmethod
    def err(cls, reason: str) -> "WireMessage":
        return cls(MessageKind.ERR, reason=reason)


def encode(msg: WireMessage) -> bytes:
    """Encode one message as a newline-terminated ASCII line."""
    match msg.kind:
        case MessageKind.HELLO:
            text = f"HELLO {msg.client.value} {msg.version}"
        case MessageKind.ANTIGEN:
            text = f"ANTIGEN {msg.antigen}"
        case MessageKind.SIGNAL:
            text = f"SIGNAL {msg.signal_id} {msg.level!r}"
        case MessageKind.RESPONSE:
            text = f"RESPONSE {msg.antigen} {msg.t_us}"
        case MessageKind.BYE:
            text = "BYE"
        case MessageKind.ERR:
            text = "ERR " + " ".join((msg.reason or "error").split())
    return (text + "\n").encode("ascii", errors="replace")


def decode(line: bytes) -> WireMessage:
    """Decode one line (with or without its trailing newline).

    Raises:
        ProtocolError: If the line is not a valid message
    """
    raw = line
    if line.endswith(b"\n"):
        line = line[:-1]
        if line.endswith(b"\r"):
            line = line[:-1]
    if not line:
        raise ProtocolError(ProtocolErrorKind.EMPTY, raw)
    try:
        text = line.decode("ascii")
    except UnicodeDecodeError:
        raise ProtocolError(ProtocolErrorKind.BAD_ENCODING, raw) from None
    if not text.isprintable():
        raise ProtocolError(ProtocolErrorKind.BAD_ENCODING, raw, "control characters")

    tokens = text.split(" ")
    head, args = tokens[0], tokens[1:]
    try:
        kind = MessageKind(head)
    except ValueError:
        raise ProtocolError(ProtocolErrorKind.UNKNOWN_KIND, raw) from None

    if kind is MessageKind.ERR:
        if not args:
            raise ProtocolError(ProtocolErrorKind.BAD_ARITY, raw)
        return WireMessage.err(" ".join(args))

    expected = {
        MessageKind.HELLO: 2,
        MessageKind.ANTIGEN: 1,
        MessageKind.SIGNAL: 2,
        MessageKind.RESPONSE: 2,
        MessageKind.BYE: 0,
    }[kind]
    if len(args) != expected:
        raise ProtocolError(ProtocolErrorKind.BAD_ARITY, raw, f"{kind.value} takes {expected} fields")

    match kind:
        case MessageKind.HELLO:
            try:
                client = ClientKind(args[0])
            except ValueError:
                raise ProtocolError(ProtocolErrorKind.BAD_VALUE, raw, "unknown client kind") from None
            return WireMessage.hello(client, _uint(args[1], raw))
        case MessageKind.ANTIGEN:
            return WireMessage.antigen_msg(_uint(args[0], raw))
        case MessageKind.SIGNAL:
            return WireMessage.signal_msg(_uint(args[0], raw), _level(args[1], raw))
        case MessageKind.RESPONSE:
            return WireMessage.response_msg(_uint(args[0], raw), _uint(args[1], raw))
        case _:
            return WireMessage.bye()


def _uint(token: str, raw: bytes) -> int:
    if not _UINT.fullmatch(token):
        raise ProtocolError(ProtocolErrorKind.BAD_VALUE, raw, f"not an unsigned integer: {token!r}")
    value = int(token)
    if value > MAX_UINT:
        raise ProtocolError(ProtocolErrorKind.BAD_VALUE, raw, "integer too large")
    return value


def _level(token: str, raw: bytes) -> float:
    if not _DECIMAL.fullmatch(token):
        raise ProtocolError(ProtocolErrorKind.BAD_VALUE, raw, f"not a decimal level: {token!r}")
    value = float(token)
    if not math.isfinite(value):
        raise ProtocolError(ProtocolErrorKind.BAD_VALUE, raw, "level out of range")
    return value
