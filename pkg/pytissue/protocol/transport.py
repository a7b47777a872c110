"""Line transports: TCP sockets and an in-process loopback.

Both implement the same small Connection interface, so the server hub and
the clients never know which one they are using.
"""

import queue
import select
import socket
import threading
from typing import Optional, Protocol


MAX_LINE = 4096


class Connection(Protocol):
    def send_line(self, line: bytes) -> None: ...
    def recv_line(self, timeout: Optional[float] = None) -> Optional[bytes]: ...
    def close(self) -> None: ...


class SocketConnection:
    """Connection over a connected TCP socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buffer = bytearray()
        self._send_lock = threading.Lock()
        self._closed = False

    def send_line(self, line: bytes) -> None:
        with self._send_lock:
            self._sock.sendall(line)

    def recv_line(self, timeout: Optional[float] = None) -> Optional[bytes]:
        """Next line, or None at end of stream.

        A partial line still buffered at end of stream is returned as is.

        Raises:
            TimeoutError: If timeout elapses first
        """
        while True:
            end = self._buffer.find(b"\n")
            if end >= 0 or len(self._buffer) >= MAX_LINE:
                cut = end + 1 if end >= 0 else MAX_LINE
                line = bytes(self._buffer[:cut])
                del self._buffer[:cut]
                return line
            try:
                # select keeps the socket blocking for the sending side
                ready, _, _ = select.select([self._sock], [], [], timeout)
                if not ready:
                    raise TimeoutError("no line received")
                chunk = self._sock.recv(MAX_LINE)
            except TimeoutError:
                raise
            except (OSError, ValueError):
                chunk = b""
            if not chunk:
                if self._buffer:
                    line = bytes(self._buffer)
                    self._buffer.clear()
                    return line
                return None
            self._buffer += chunk

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class LoopbackConnection:
    """One end of an in-process connection pair."""

    _EOF = object()

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = threading.Event()

    @classmethod
    def pair(cls) -> tuple["LoopbackConnection", "LoopbackConnection"]:
        """Two connected ends: lines sent on one are received on the other."""
        a_to_b: queue.Queue = queue.Queue()
        b_to_a: queue.Queue = queue.Queue()
        return cls(b_to_a, a_to_b), cls(a_to_b, b_to_a)

    def send_line(self, line: bytes) -> None:
        if self._closed.is_set():
            raise ConnectionError("loopback connection closed")
        self._outbox.put(line)

    def recv_line(self, timeout: Optional[float] = None) -> Optional[bytes]:
        try:
            item = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no line received") from None
        if item is self._EOF:
            # Leave the marker for any other reader of this end.
            self._inbox.put(item)
            return None
        return item

    def close(self) -> None:
        if not self._closed.is_set():
            self._closed.set()
            self._outbox.put(self._EOF)
            self._inbox.put(self._EOF)


def open_tcp(host: str, port: int, timeout: float = 5.0) -> SocketConnection:
    """Connect to host:port."""
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return SocketConnection(sock)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    """Split HOST:PORT."""
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {endpoint!r}")
    return host, int(port)
