"""Input preprocessing and the cell scheduler.

A tick runs in three phases:
1. receptors of every cell, cells taken in a fresh random order
2. each cell's type-specific cycle callback, same order
3. the tick's responses are committed, then producer effects on the
   compartment (cytokine writes)

Cytokine writes therefore become readable one tick later.
"""

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from pytissue.engine.cellkit import (
    Matcher,
    ResponseSink,
    antigen_receptor_step,
    cell_receptor_step,
    cytokine_producer_step,
    cytokine_receptor_step,
    exact_match,
)
from pytissue.engine.clock import RunClock
from pytissue.engine.sinks import ResponseBuffer
from pytissue.errors import ConfigError, RunFatalError, SignalRangeError, TissueError
from pytissue.models.records import AntigenValue, ReplayEvent, TickReport
from pytissue.models.tissue import Cell, TissueCompartment


logger = logging.getLogger(__name__)


# =============================================================================
# Input preprocessing
# =============================================================================

def ingest_antigen(compartment: TissueCompartment, value: AntigenValue, rng: np.random.Generator) -> None:
    """Place antigen_multiplier copies of value at random tissue slots.

    Copies overwrite whatever occupies their slot.
    """
    store = compartment.antigen_store
    if not store:
        return
    slots = rng.integers(0, len(store), size=compartment.params.antigen_multiplier).tolist()
    for slot in slots:
        if store[slot] is None:
            compartment.occupancy += 1
        store[slot] = value


def set_signal(compartment: TissueCompartment, signal_id: int, level: float) -> None:
    """Replace one tissue signal level.

    Raises:
        SignalRangeError: If signal_id >= max_cytokines
        ConfigError: If level is negative or not finite
    """
    if not 0 <= signal_id < len(compartment.signals):
        raise SignalRangeError(signal_id, len(compartment.signals))
    if not math.isfinite(level) or level < 0:
        raise ConfigError(f"signal level must be finite and >= 0, got {level}")
    compartment.signals[signal_id] = level


def apply_event(compartment: TissueCompartment, event: ReplayEvent, rng: np.random.Generator) -> None:
    """Apply one client event to the compartment."""
    if event.is_antigen:
        ingest_antigen(compartment, event.antigen, rng)
    else:
        set_signal(compartment, event.signal.id, event.signal.level)


# =============================================================================
# Cycle callbacks
# =============================================================================

@dataclass
class CycleContext:
    """What a cycle callback may use during one tick.

    Callbacks write responses to `responses`; they reach the run's sink only
    after every callback of the tick has completed.
    """
    compartment: TissueCompartment
    rng: np.random.Generator
    matcher: Matcher
    responses: ResponseBuffer
    clock: RunClock
    report: TickReport


CycleCallback = Callable[[Cell, CycleContext], None]


class Algorithm(Protocol):
    """An AIS algorithm hosted by the tissue server."""

    name: str

    def populate(self, compartment: TissueCompartment, rng: np.random.Generator) -> None:
        """Create the initial cell population."""
        ...

    def callbacks(self) -> Mapping[int, CycleCallback]:
        """Cycle callback per cell type id."""
        ...


# =============================================================================
# Scheduler
# =============================================================================

def tick(
    compartment: TissueCompartment,
    callbacks: Mapping[int, CycleCallback],
    matcher: Matcher,
    response_sink: ResponseSink,
    rng: np.random.Generator,
    clock: RunClock,
) -> TickReport:
    """Run one scheduler cycle over every cell.

    Raises:
        RunFatalError: If a callback fails, no responses or cytokine writes
            of that tick are committed. If the response sink fails, earlier
            responses of the tick may be written but its cytokine writes are not
    """
    index = clock.tick()
    report = TickReport(tick=index, t_us=clock.now_us())
    cells = compartment.cells

    if cells:
        order = rng.permutation(len(cells)).tolist()

        for position in order:
            cell = cells[position]
            report.transfers += antigen_receptor_step(cell, compartment, rng)
            cytokine_receptor_step(cell, compartment)
            cell_receptor_step(cell, compartment, rng)

        buffer = ResponseBuffer()
        context = CycleContext(compartment, rng, matcher or exact_match, buffer, clock, report)
        for position in order:
            cell = cells[position]
            callback = callbacks.get(cell.type_id)
            if callback is None:
                continue
            try:
                callback(cell, context)
            except TissueError:
                raise
            except Exception as e:
                logger.error(f"cycle callback failed for cell {cell.index} at tick {index}: {e}")
                raise RunFatalError(f"cycle callback failed for cell {cell.index}: {e}") from e

        for record in buffer.records:
            try:
                response_sink.write(record)
            except RunFatalError:
                raise
            except Exception as e:
                raise RunFatalError(f"response sink failed: {e}") from e
        report.responses = len(buffer)

        for position in order:
            cytokine_producer_step(cells[position], compartment)

    report.tissue_occupancy = compartment.occupancy
    if compartment.occupancy > compartment.params.max_antigen:
        raise RunFatalError(f"tissue occupancy {compartment.occupancy} exceeds max_antigen")
    return report
