"""Probes: periodic read-only samplers of a tissue compartment.

A sampler receives a CompartmentView (an immutable snapshot) and returns
rows; each row is prefixed with the sample time before it reaches the sink.
"""

from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Optional, Protocol

from pytissue.errors import RunFatalError
from pytissue.models.tissue import CompartmentView, TissueCompartment, snapshot


Sampler = Callable[[CompartmentView], Iterable[Sequence]]


class RowSink(Protocol):
    def write(self, row: Sequence) -> None: ...
    def close(self) -> None: ...


class _Clock(Protocol):
    def now_us(self) -> int: ...


@dataclass
class Probe:
    """A named sampler run every rate_us of run time.

    Attributes:
        name: Used for the output file name (probe_<name>.csv)
        columns: Sampler columns; the output header is t_us followed by these
        sampler: Callback receiving a read-only compartment view
        rate_us: Sampling period; None uses the compartment's probe_rate
        sink: Row writer; attached by the server when it owns the output
    """
    name: str
    columns: list[str]
    sampler: Sampler
    rate_us: Optional[int] = None
    sink: Optional[RowSink] = None
    next_due_us: int = field(default=0, repr=False)

    @property
    def header(self) -> list[str]:
        return ["t_us", *self.columns]


def run_probe(compartment: TissueCompartment, probe: Probe, clock: _Clock) -> int:
    """Sample the compartment once and append rows to the probe's sink.

    Returns:
        Number of rows written

    Raises:
        RunFatalError: If the sampler or sink fails
    """
    t_us = clock.now_us()
    view = snapshot(compartment, t_us)
    try:
        rows = [[t_us, *row] for row in probe.sampler(view)]
        if probe.sink is not None:
            for row in rows:
                probe.sink.write(row)
    except RunFatalError:
        raise
    except Exception as e:
        raise RunFatalError(f"probe {probe.name!r} failed: {e}") from e
    return len(rows)


# =============================================================================
# Built-in samplers
# =============================================================================

def vr_repertoire_probe(type_id: int = 2, rate_us: Optional[int] = None) -> Probe:
    """One row per cell of type_id with its VR locks, space-separated."""

    def sample(view: CompartmentView) -> Iterable[Sequence]:
        for cell in view.cells:
            if cell.type_id == type_id:
                yield [cell.index, " ".join(str(lock) for lock in cell.vr_locks)]

    return Probe(name="vr_repertoire", columns=["cell", "locks"], sampler=sample, rate_us=rate_us)


def occupancy_probe(rate_us: Optional[int] = None) -> Probe:
    """Antigen held in the tissue, in cell stores and on producers."""

    def sample(view: CompartmentView) -> Iterable[Sequence]:
        cell_antigen = sum(1 for c in view.cells for v in c.antigen_store if v is not None)
        displayed = sum(1 for c in view.cells for v in c.displayed if v is not None)
        yield [view.occupancy, cell_antigen, displayed]

    return Probe(
        name="occupancy",
        columns=["tissue_antigen", "cell_antigen", "displayed"],
        sampler=sample,
        rate_us=rate_us,
    )
