"""Client side of the protocol: antigen, signal and response clients."""

import logging
import random
import time
from collections.abc import Iterator
from typing import Optional

from pytissue.errors import ConnectError, ProtocolError
from pytissue.protocol.transport import Connection, open_tcp, parse_endpoint
from pytissue.protocol.wire import ClientKind, MessageKind, WireMessage, decode, encode


logger = logging.getLogger(__name__)


# Connect retry configuration
DEFAULT_CONNECT_ATTEMPTS = 5
DEFAULT_BASE_DELAY = 0.2  # seconds
DEFAULT_MAX_DELAY = 5.0  # seconds
DEFAULT_EXPONENTIAL_BASE = 2.0


def _calculate_backoff_delay(
    attempt: int,
    base_delay: float = DEFAULT_BASE_DELAY,
    max_delay: float = DEFAULT_MAX_DELAY,
    exponential_base: float = DEFAULT_EXPONENTIAL_BASE,
) -> float:
    """Exponential backoff delay with ±25% jitter.

    Args:
        attempt: Current attempt number (0-indexed)
        base_delay: Base delay in seconds
        max_delay: Maximum delay in seconds
        exponential_base: Base for exponential calculation
    """
    delay = base_delay * (exponential_base ** attempt)
    delay += delay * 0.25 * (2 * random.random() - 1)
    return min(delay, max_delay)


def connect_tcp(
    endpoint: str,
    attempts: int = DEFAULT_CONNECT_ATTEMPTS,
    base_delay: float = DEFAULT_BASE_DELAY,
) -> Connection:
    """Open a TCP connection, retrying with exponential backoff.

    Raises:
        ConnectError: If every attempt fails
    """
    host, port = parse_endpoint(endpoint)
    last_error: Optional[OSError] = None
    for attempt in range(attempts):
        try:
            return open_tcp(host, port)
        except OSError as e:
            last_error = e
            logger.warning(f"connect attempt {attempt + 1}/{attempts} to {endpoint} failed: {e}")
            # Don't sleep after the last attempt
            if attempt < attempts - 1:
                delay = _calculate_backoff_delay(attempt, base_delay)
                logger.info(f"Retrying in {delay:.1f}s...")
                time.sleep(delay)
    raise ConnectError(f"cannot connect to {endpoint} after {attempts} attempts", last_error=last_error)


class TissueClient:
    """One protocol connection of a fixed kind.

    The HELLO is sent on construction. Use as a context manager to send BYE
    and close on exit.
    """

    def __init__(self, conn: Connection, kind: ClientKind):
        self.conn = conn
        self.kind = kind
        self.sent = 0
        self.closed = False
        self.conn.send_line(encode(WireMessage.hello(kind)))

    @classmethod
    def connect(cls, endpoint: str, kind: ClientKind, attempts: int = DEFAULT_CONNECT_ATTEMPTS) -> "TissueClient":
        return cls(connect_tcp(endpoint, attempts=attempts), kind)

    def send(self, msg: WireMessage) -> None:
        self.conn.send_line(encode(msg))
        self.sent += 1

    def send_antigen(self, value: int) -> None:
        self.send(WireMessage.antigen_msg(value))

    def send_signal(self, signal_id: int, level: float) -> None:
        self.send(WireMessage.signal_msg(signal_id, level))

    def responses(self, timeout: Optional[float] = None) -> Iterator[WireMessage]:
        """Yield RESPONSE messages until the server closes the connection.

        ERR notices are logged and skipped. With a timeout, iteration also
        ends when no line arrives for that long; `closed` tells the two apart.
        """
        while True:
            try:
                line = self.conn.recv_line(timeout=timeout)
            except TimeoutError:
                return
            if line is None:
                self.closed = True
                return
            try:
                msg = decode(line)
            except ProtocolError as e:
                logger.warning(f"ignoring bad line from server: {e}")
                continue
            if msg.kind is MessageKind.ERR:
                logger.warning(f"server: {msg.reason}")
            elif msg.kind is MessageKind.RESPONSE:
                yield msg

    def bye(self) -> None:
        try:
            self.conn.send_line(encode(WireMessage.bye()))
        except OSError:
            pass

    def close(self) -> None:
        self.conn.close()

    def __enter__(self) -> "TissueClient":
        return self

    def __exit__(self, *exc) -> None:
        self.bye()
        self.close()
