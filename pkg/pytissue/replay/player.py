"""Replay client: plays a replay log to a tissue server at a chosen rate."""

import logging
import threading
import time
from collections.abc import Callable, Sequence
from typing import Optional

from pytissue.errors import ReplayAbortedError
from pytissue.models.records import ReplayEvent
from pytissue.protocol.client import TissueClient
from pytissue.protocol.wire import ClientKind


logger = logging.getLogger(__name__)


def replay(
    events: Sequence[ReplayEvent],
    rate_factor: float,
    antigen_client: TissueClient,
    signal_client: Optional[TissueClient] = None,
    *,
    now: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
    stop: Optional[threading.Event] = None,
) -> int:
    """Send each event at t_us / rate_factor wall seconds after start.

    ANTIGEN events go to antigen_client and SIGNAL events to signal_client.
    Without a signal client, SIGNAL events are skipped.

    Returns:
        Number of events sent

    Raises:
        ValueError: If rate_factor is not positive
        ReplayAbortedError: If a connection fails or stop is set mid-replay
    """
    if rate_factor <= 0:
        raise ValueError(f"rate factor must be positive, got {rate_factor}")

    sent = 0
    skipped = 0
    start = now()
    for position, event in enumerate(events):
        if stop is not None and stop.is_set():
            raise ReplayAbortedError("replay stopped", unsent=len(events) - position)
        delay = start + event.t_us / 1_000_000 / rate_factor - now()
        if delay > 0:
            sleep(delay)
        try:
            if event.is_antigen:
                antigen_client.send_antigen(event.antigen)
            elif signal_client is not None:
                signal_client.send_signal(event.signal.id, event.signal.level)
            else:
                skipped += 1
                continue
        except OSError as e:
            logger.error(f"connection lost after {sent} events: {e}")
            raise ReplayAbortedError(f"connection lost: {e}", unsent=len(events) - position) from e
        sent += 1

    if skipped:
        logger.info(f"skipped {skipped} signal events (no signal connection)")
    logger.info(f"replayed {sent} events in {now() - start:.2f}s")
    return sent


def replay_to_server(
    events: Sequence[ReplayEvent],
    rate_factor: float,
    endpoint: str,
    stop: Optional[threading.Event] = None,
) -> int:
    """Connect to endpoint, replay events and say BYE on both connections.

    A signal connection is opened only when the log holds SIGNAL events.
    """
    has_signals = any(not event.is_antigen for event in events)
    with TissueClient.connect(endpoint, ClientKind.ANTIGEN) as antigen_client:
        if not has_signals:
            return replay(events, rate_factor, antigen_client, stop=stop)
        with TissueClient.connect(endpoint, ClientKind.SIGNAL) as signal_client:
            return replay(events, rate_factor, antigen_client, signal_client, stop=stop)
