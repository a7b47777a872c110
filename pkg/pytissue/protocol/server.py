"""Server side of the client protocol.

A Hub accepts connections (TCP or loopback) and runs one ClientSession per
connection on its own thread. Sessions turn ANTIGEN and SIGNAL messages into
queued events and stream the response feed to response clients.
"""

import logging
import queue
import socketserver
import threading
from collections.abc import Callable
from typing import Optional

from pytissue.errors import ProtocolError, ProtocolErrorKind, StartupError
from pytissue.models.records import ReplayEvent, ResponseRecord
from pytissue.protocol.channels import EventQueue, ResponseFeed
from pytissue.protocol.transport import Connection, SocketConnection, parse_endpoint
from pytissue.protocol.wire import PROTOCOL_VERSION, ClientKind, MessageKind, WireMessage, decode, encode


logger = logging.getLogger(__name__)


MAX_CONSECUTIVE_ERRORS = 3
POLL_SECONDS = 0.25

NowFn = Callable[[], int]


class ClientSession:
    """Protocol state machine for one connection.

    The first message must be HELLO; its kind fixes what the connection may
    send afterwards. Three consecutive bad lines drop the connection.
    """

    def __init__(
        self,
        conn: Connection,
        events: EventQueue,
        feed: ResponseFeed,
        now_us: NowFn,
        max_cytokines: int,
        name: str = "client",
        stopping: Optional[threading.Event] = None,
    ):
        self.conn = conn
        self.events = events
        self.feed = feed
        self.now_us = now_us
        self.max_cytokines = max_cytokines
        self.name = name
        self.kind: Optional[ClientKind] = None
        self.errors = 0
        self.received = 0
        self._stopping = stopping or threading.Event()
        self._writer: Optional[threading.Thread] = None
        self._subscription: Optional[queue.Queue] = None

    @property
    def is_ingest(self) -> bool:
        return self.kind in (ClientKind.ANTIGEN, ClientKind.SIGNAL)

    def serve(self) -> None:
        """Read and handle lines until BYE, disconnect, shutdown or too many errors."""
        try:
            while not self._stopping.is_set():
                try:
                    line = self.conn.recv_line(timeout=POLL_SECONDS)
                except TimeoutError:
                    continue
                if line is None:
                    logger.info(f"{self.name} disconnected")
                    break
                if not self._handle_line(line):
                    break
        finally:
            self._finish()

    def _handle_line(self, line: bytes) -> bool:
        """Handle one line; False ends the session."""
        try:
            msg = decode(line)
            keep_going = self._dispatch(msg, line)
        except ProtocolError as e:
            self.errors += 1
            logger.warning(f"{self.name}: {e} ({self.errors}/{MAX_CONSECUTIVE_ERRORS})")
            self._notify(e.kind.value)
            if self.errors >= MAX_CONSECUTIVE_ERRORS:
                logger.warning(f"dropping {self.name} after {self.errors} consecutive errors")
                return False
            return True
        self.errors = 0
        return keep_going

    def _dispatch(self, msg: WireMessage, line: bytes) -> bool:
        if self.kind is None:
            if msg.kind is not MessageKind.HELLO:
                raise ProtocolError(ProtocolErrorKind.UNEXPECTED, line, "expected HELLO")
            return self._hello(msg)

        match msg.kind:
            case MessageKind.BYE:
                logger.info(f"{self.name} said BYE")
                return False
            case MessageKind.ANTIGEN if self.kind is ClientKind.ANTIGEN:
                self.events.put(ReplayEvent.antigen_event(self.now_us(), msg.antigen), self.now_us())
                self.received += 1
            case MessageKind.SIGNAL if self.kind is ClientKind.SIGNAL:
                if msg.signal_id >= self.max_cytokines:
                    # Rejected without counting toward the error limit.
                    self._notify(f"signal id {msg.signal_id} out of range")
                    return True
                now = self.now_us()
                self.events.put(ReplayEvent.signal_event(now, msg.signal_id, msg.level), now)
                self.received += 1
            case _:
                raise ProtocolError(
                    ProtocolErrorKind.UNEXPECTED, line, f"{msg.kind.value} on a {self.kind.value} connection"
                )
        return True

    def _hello(self, msg: WireMessage) -> bool:
        if msg.version != PROTOCOL_VERSION:
            logger.warning(f"{self.name}: unsupported protocol version {msg.version}")
            self._notify(f"unsupported version {msg.version}")
            return False
        self.kind = msg.client
        self.name = f"{self.kind.value} client {self.name}"
        logger.info(f"{self.name} connected")
        if self.is_ingest:
            self.events.ingest_opened()
        else:
            self._subscription = self.feed.subscribe()
            self._writer = threading.Thread(target=self._write_responses, name=f"{self.name} writer", daemon=True)
            self._writer.start()
        return True

    def _write_responses(self) -> None:
        subscription = self._subscription
        while True:
            record: Optional[ResponseRecord] = subscription.get()
            if record is None:
                return
            try:
                self.conn.send_line(encode(WireMessage.response_msg(record.antigen, record.t_us)))
            except OSError as e:
                logger.warning(f"{self.name}: cannot deliver response: {e}")
                self.feed.unsubscribe(subscription)
                return

    def _notify(self, reason: str) -> None:
        try:
            self.conn.send_line(encode(WireMessage.err(reason)))
        except OSError:
            pass

    def _finish(self) -> None:
        if self.is_ingest:
            self.events.ingest_closed(self.now_us())
        if self._subscription is not None:
            self.feed.unsubscribe(self._subscription)
            self._subscription.put(None)
            self._writer.join(timeout=1.0)
        self.conn.close()


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        host, port = self.client_address[:2]
        self.server.hub.serve_connection(SocketConnection(self.request), name=f"{host}:{port}")


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class Hub:
    """Accepts client connections and feeds the scheduler's event queue.

    Attributes:
        events: Queue shared by every ingest connection
        feed: Broadcast channel for response clients
        address: Bound (host, port) once listening on TCP
    """

    def __init__(
        self,
        events: EventQueue,
        feed: ResponseFeed,
        now_us: NowFn,
        max_cytokines: int = 0,
    ):
        self.events = events
        self.feed = feed
        self.now_us = now_us
        self.max_cytokines = max_cytokines
        self.address: Optional[tuple[str, int]] = None
        self._tcp: Optional[_TCPServer] = None
        self._tcp_thread: Optional[threading.Thread] = None
        self._lock = threading.Lock()
        self._sessions: set[ClientSession] = set()
        self._threads: list[threading.Thread] = []
        self._stopping = threading.Event()

    @property
    def connections(self) -> int:
        with self._lock:
            return len(self._sessions)

    def listen(self, endpoint: str) -> tuple[str, int]:
        """Start accepting TCP connections on HOST:PORT (port 0 picks a free port).

        Raises:
            StartupError: If the endpoint cannot be bound
        """
        try:
            host, port = parse_endpoint(endpoint)
            self._tcp = _TCPServer((host, port), _Handler)
        except (OSError, ValueError) as e:
            raise StartupError(f"cannot listen on {endpoint}: {e}") from e
        self._tcp.hub = self
        self.address = self._tcp.server_address[:2]
        self._tcp_thread = threading.Thread(target=self._tcp.serve_forever, name="tissue listener", daemon=True)
        self._tcp_thread.start()
        logger.info(f"listening on {self.address[0]}:{self.address[1]}")
        return self.address

    def serve_connection(self, conn: Connection, name: str = "client") -> None:
        """Run a session on the calling thread until it ends."""
        session = ClientSession(
            conn, self.events, self.feed, self.now_us, self.max_cytokines, name=name, stopping=self._stopping
        )
        with self._lock:
            self._sessions.add(session)
        try:
            session.serve()
        except Exception as e:
            # One misbehaving connection must not take the listener down.
            logger.error(f"{session.name} failed: {e}")
            conn.close()
        finally:
            with self._lock:
                self._sessions.discard(session)

    def attach(self, conn: Connection, name: str = "loopback") -> threading.Thread:
        """Serve an in-process connection on a new thread."""
        thread = threading.Thread(target=self.serve_connection, args=(conn, name), name=name, daemon=True)
        with self._lock:
            self._threads.append(thread)
        thread.start()
        return thread

    def shutdown(self) -> None:
        """Stop accepting, end every session and wait for their threads."""
        self._stopping.set()
        if self._tcp is not None:
            self._tcp.shutdown()
            self._tcp.server_close()
            self._tcp_thread.join(timeout=2.0)
        with self._lock:
            sessions = list(self._sessions)
            threads = list(self._threads)
        for session in sessions:
            session.conn.close()
        for thread in threads:
            thread.join(timeout=2.0)
        logger.info("client hub stopped")


def serve_clients(
    endpoint: str,
    event_queue: EventQueue,
    response_feed: ResponseFeed,
    now_us: NowFn,
    max_cytokines: int = 0,
) -> Hub:
    """Start a TCP hub on endpoint and return it; call shutdown() when done."""
    hub = Hub(event_queue, response_feed, now_us, max_cytokines)
    hub.listen(endpoint)
    return hub
