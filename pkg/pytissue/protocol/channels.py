"""Shared structures between client connections and the scheduler.

The scheduler is the single consumer of the event queue; each ingest
connection is a producer. Responses go out through a broadcast feed with
one subscription per response client.
"""

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Optional

from pytissue.models.records import ReplayEvent, ResponseRecord


logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class QueuedEvent:
    """An event stamped with the run time it arrived at."""
    arrival_us: int
    event: ReplayEvent


class EventQueue:
    """Bounded FIFO of client events; put() blocks when full.

    Also tracks ingest connections so the server knows when replay is over.
    """

    def __init__(self, maxsize: int = 65536):
        self._queue: queue.Queue[QueuedEvent] = queue.Queue(maxsize=maxsize)
        self._lock = threading.Lock()
        self._open_ingest = 0
        self._seen_ingest = 0
        self._ingest_idle_since: Optional[int] = None

    def put(self, event: ReplayEvent, arrival_us: int) -> None:
        self._queue.put(QueuedEvent(arrival_us, event))

    def drain(self) -> list[QueuedEvent]:
        """Remove and return everything queued so far, in arrival order."""
        items: list[QueuedEvent] = []
        while True:
            try:
                items.append(self._queue.get_nowait())
            except queue.Empty:
                return items

    def __len__(self) -> int:
        return self._queue.qsize()

    # -------------------------------------------------------------------------
    # Ingest connection accounting
    # -------------------------------------------------------------------------

    def ingest_opened(self) -> None:
        with self._lock:
            self._open_ingest += 1
            self._seen_ingest += 1
            self._ingest_idle_since = None

    def ingest_closed(self, now_us: int) -> None:
        with self._lock:
            self._open_ingest = max(0, self._open_ingest - 1)
            if self._open_ingest == 0:
                self._ingest_idle_since = now_us

    @property
    def open_ingest(self) -> int:
        with self._lock:
            return self._open_ingest

    @property
    def ingest_idle_since(self) -> Optional[int]:
        """Run time at which the last ingest connection closed, None while any is open or none ever opened."""
        with self._lock:
            return self._ingest_idle_since


class ResponseFeed:
    """Broadcasts response records to every subscribed response client."""

    def __init__(self):
        self._lock = threading.Lock()
        self._subscribers: list[queue.Queue] = []

    def subscribe(self) -> queue.Queue:
        subscription: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers.append(subscription)
        return subscription

    def unsubscribe(self, subscription: queue.Queue) -> None:
        with self._lock:
            if subscription in self._subscribers:
                self._subscribers.remove(subscription)

    @property
    def subscribers(self) -> int:
        with self._lock:
            return len(self._subscribers)

    def publish(self, record: ResponseRecord) -> None:
        with self._lock:
            targets = list(self._subscribers)
        for subscription in targets:
            subscription.put(record)

    # ResponseFeed can sit directly in a ResponseLog's listener list.
    __call__ = publish
