"""The tissue server: owns one compartment and drives the scheduler.

Two ways to run:
- run_offline(events): deterministic ticks; the events are applied by their
  timestamps, shifted by replay_delay
- run(stop_event): realtime or accelerated; events arrive through the event
  queue from protocol connections

Either way the run ends grace_period after the input does, and close()
writes the transcript directory (when one was given) and returns the
RunTranscript.
"""

import logging
import threading
from collections import deque
from collections.abc import Callable, Iterable, Sequence
from pathlib import Path
from typing import Optional

from pytissue.config import TissueConfig
from pytissue.engine.cellkit import Matcher, exact_match
from pytissue.engine.clock import RunClock, make_rng
from pytissue.engine.probes import Probe, run_probe
from pytissue.engine.scheduler import Algorithm, apply_event, tick
from pytissue.engine.sinks import RESPONSE_COLUMNS, CsvSink, MemorySink, ResponseLog, TeeSink
from pytissue.errors import ConfigError, RunFatalError
from pytissue.models.records import ReplayEvent, ResponseRecord, RunTranscript, TickReport
from pytissue.models.tissue import new_compartment
from pytissue.protocol.channels import EventQueue, ResponseFeed
from pytissue.replay.logfile import log_digest


logger = logging.getLogger(__name__)


MANIFEST = "manifest.txt"
RESPONSES_CSV = "responses.csv"
TICKS_CSV = "ticks.csv"


class TissueServer:
    """One compartment, its algorithm and everything a run records.

    Attributes:
        compartment: The tissue compartment, owned by the scheduler
        events: Queue feeding client events into the scheduler
        feed: Broadcast of committed responses for response clients
        transcript: What the run has produced so far
    """

    def __init__(
        self,
        config: TissueConfig,
        algorithm: Optional[Algorithm] = None,
        *,
        clock: Optional[RunClock] = None,
        seed: int = 0,
        out_dir: Optional[str | Path] = None,
        probes: Optional[Sequence[Probe]] = None,
        matcher: Matcher = exact_match,
        on_tick: Optional[Callable[[TickReport], None]] = None,
        response_listeners: Sequence[Callable[[ResponseRecord], None]] = (),
    ):
        if algorithm is None:
            from pytissue.algorithms.twocell import TwoCell

            algorithm = TwoCell(config)
        self.config = config
        self.algorithm = algorithm
        self.clock = clock or RunClock.deterministic(config.cell_update_rate)
        self.seed = seed
        self.rng = make_rng(seed)
        self.matcher = matcher
        self.on_tick = on_tick
        self.input_digest: Optional[str] = None

        self.compartment = new_compartment(config.tissue_params())
        self.algorithm.populate(self.compartment, self.rng)
        self.callbacks = dict(self.algorithm.callbacks())

        self.events = EventQueue(config.event_queue_size)
        self.feed = ResponseFeed()
        self._pending: deque[ReplayEvent] = deque()
        self._started = False
        self._closed = False
        self.late_ticks = 0

        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self.transcript = RunTranscript(seed=seed)

        self.responses = ResponseLog(
            self._csv(RESPONSES_CSV, RESPONSE_COLUMNS),
            listeners=[self.feed, *response_listeners],
        )
        self._ticks_sink = self._csv(TICKS_CSV, TickReport.COLUMNS)

        if probes is None:
            default_probes = getattr(self.algorithm, "default_probes", None)
            probes = default_probes() if default_probes else []
        self.probes = list(probes)
        for probe in self.probes:
            rows = MemorySink()
            self.transcript.probe_rows[probe.name] = rows.rows
            csv_sink = self._csv(f"probe_{probe.name}.csv", probe.header)
            probe.sink = TeeSink(rows, csv_sink) if csv_sink else rows
            probe.next_due_us = probe.rate_us or config.probe_rate

        logger.info(
            f"{self.algorithm.name} server ready: {len(self.compartment.cells)} cells, "
            f"seed {seed}, {self.clock.mode.value} clock"
        )

    def _csv(self, name: str, header: Sequence[str]) -> Optional[CsvSink]:
        if self.out_dir is None:
            return None
        sink = CsvSink(self.out_dir / name, header)
        self.transcript.files[name] = str(self.out_dir / name)
        return sink

    # -------------------------------------------------------------------------
    # Stepping
    # -------------------------------------------------------------------------

    def submit(self, event: ReplayEvent) -> None:
        """Queue a client event; it is applied before the next tick."""
        self.events.put(event, self.clock.now_us())

    def _apply_arrived(self) -> int:
        applied = 0
        next_tick_us = (self.clock.tick_index + 1) * self.clock.tick_us
        while self._pending and self._pending[0].t_us < next_tick_us:
            applied += self._apply(self._pending.popleft())
        for queued in self.events.drain():
            applied += self._apply(queued.event)
        return applied

    def _apply(self, event: ReplayEvent) -> int:
        try:
            apply_event(self.compartment, event, self.rng)
        except ConfigError as e:
            # Clients are told about bad signal ids by the hub; a replayed
            # log can still carry them.
            logger.warning(f"dropping event at {event.t_us}us: {e}")
            return 0
        return 1

    def step(self) -> TickReport:
        """Apply arrived events, run one tick, then any probes that are due.

        Raises:
            RunFatalError: If the tick or a probe fails
        """
        applied = self._apply_arrived()
        report = tick(self.compartment, self.callbacks, self.matcher, self.responses, self.rng, self.clock)
        report.events_applied = applied
        self.transcript.ticks = report.tick
        self.transcript.reports.append(report)
        if self._ticks_sink is not None:
            self._ticks_sink.write(report.to_row())

        now = report.t_us
        for probe in self.probes:
            if now >= probe.next_due_us:
                run_probe(self.compartment, probe, self.clock)
                rate = probe.rate_us or self.config.probe_rate
                while probe.next_due_us <= now:
                    probe.next_due_us += rate

        if self.on_tick is not None:
            self.on_tick(report)
        return report

    # -------------------------------------------------------------------------
    # Runs
    # -------------------------------------------------------------------------

    def start(self) -> None:
        """Start the run clock; later calls are no-ops."""
        if not self._started:
            self._started = True
            self.clock.start()

    def run_offline(self, events: Iterable[ReplayEvent]) -> RunTranscript:
        """Deterministic run over a replay log.

        Events are shifted by replay_delay; the run ends at replay_delay +
        last event time + grace_period.
        """
        events = sorted(events, key=lambda e: e.t_us)
        if self.input_digest is None:
            self.input_digest = log_digest(events)
        delay = self.config.replay_delay
        self._pending.extend(event.shifted(delay) for event in events)
        end_us = delay + (events[-1].t_us if events else 0) + self.config.grace_period

        self.start()
        logger.info(f"offline run: {len(events)} events, {end_us / 1_000_000:.1f}s of run time")
        try:
            while self.clock.now_us() < end_us:
                self.step()
        finally:
            transcript = self.close()
        return transcript

    def run(self, stop_event: Optional[threading.Event] = None, max_run_us: Optional[int] = None) -> RunTranscript:
        """Realtime or accelerated run fed by the event queue.

        Ends when stop_event is set, at max_run_us, or grace_period after the
        last ingest client has gone. With no client ever connecting, the
        scheduler idles until stopped.

        The end conditions count tick time (tick index times the update
        rate), so a tick that overruns its slot is followed by catch-up
        ticks with no sleep and the run keeps its full tick count. Ticks
        that start more than one tick behind are counted and logged at the end.
        """
        stop_event = stop_event or threading.Event()
        self.start()
        clock = self.clock
        grace = self.config.grace_period
        late = 0
        try:
            while not stop_event.is_set():
                due_us = (clock.tick_index + 1) * clock.tick_us
                if clock.now_us() > due_us + clock.tick_us:
                    late += 1
                clock.sleep_until(due_us)
                self.step()
                tick_us = clock.tick_index * clock.tick_us
                idle_since = self.events.ingest_idle_since
                if idle_since is not None and tick_us >= idle_since + grace and not len(self.events):
                    logger.info("grace period over")
                    break
                if max_run_us is not None and tick_us >= max_run_us:
                    break
        finally:
            self.late_ticks = late
            if late:
                logger.warning(f"{late} of {clock.tick_index} ticks started more than one tick behind the clock")
            transcript = self.close()
        return transcript

    # -------------------------------------------------------------------------
    # Output
    # -------------------------------------------------------------------------

    def close(self) -> RunTranscript:
        """Close every sink, write the manifest and return the transcript."""
        if self._closed:
            return self.transcript
        self._closed = True
        self.transcript.responses = self.responses.records
        self.responses.close()
        if self._ticks_sink is not None:
            self._ticks_sink.close()
        for probe in self.probes:
            if probe.sink is not None:
                probe.sink.close()
        if self.out_dir is not None:
            self._write_manifest()
        logger.info(
            f"run finished after {self.transcript.ticks} ticks with {len(self.transcript.responses)} responses"
        )
        return self.transcript

    def _write_manifest(self) -> None:
        lines = [
            f"algorithm={self.algorithm.name}",
            f"config_sha256={self.config.digest()}",
            f"seed={self.seed}",
            f"input_sha256={self.input_digest or 'none'}",
            f"ticks={self.transcript.ticks}",
            f"files={','.join(sorted(self.transcript.files))}",
        ]
        path = self.out_dir / MANIFEST
        path.write_text("\n".join(lines) + "\n")
        self.transcript.files[MANIFEST] = str(path)


def run_server(
    config: TissueConfig,
    algorithm: Optional[Algorithm] = None,
    *,
    listen: Optional[str] = None,
    clock: Optional[RunClock] = None,
    seed: int = 0,
    out_dir: Optional[str | Path] = None,
    stop_event: Optional[threading.Event] = None,
    on_listening: Optional[Callable[[tuple[str, int]], None]] = None,
    max_run_us: Optional[int] = None,
) -> RunTranscript:
    """Start the client hub and run the scheduler until shutdown.

    Raises:
        StartupError: If the listen endpoint cannot be bound
        RunFatalError: If the run fails
    """
    from pytissue.protocol.server import serve_clients

    server = TissueServer(
        config,
        algorithm,
        clock=clock or RunClock.realtime(config.cell_update_rate),
        seed=seed,
        out_dir=out_dir,
    )
    if server.clock.is_deterministic:
        server.close()
        raise ConfigError("run_server needs a realtime or accelerated clock; use run_offline for deterministic runs")

    server.start()
    try:
        hub = serve_clients(
            listen or config.listen,
            server.events,
            server.feed,
            server.clock.now_us,
            max_cytokines=config.max_cytokines,
        )
    except Exception:
        server.close()
        raise
    if on_listening is not None:
        on_listening(hub.address)
    try:
        return server.run(stop_event, max_run_us=max_run_us)
    except RunFatalError as e:
        logger.error(f"run aborted: {e}")
        raise
    finally:
        hub.shutdown()
