"""Receptor and producer mechanics composed by the scheduler.

Every random choice draws from the run's single numpy Generator, in
receptor/producer index order, so a seeded run is reproducible.
"""

from collections import Counter
from collections.abc import Callable
from typing import Protocol

import numpy as np

from pytissue.errors import RunFatalError
from pytissue.models.records import AntigenValue, ResponseRecord
from pytissue.models.tissue import Cell, TissueCompartment


Matcher = Callable[[AntigenValue, AntigenValue], bool]


def exact_match(lock: AntigenValue, key: AntigenValue) -> bool:
    """Default VR matcher: the key opens the lock only when equal."""
    return lock == key


class ResponseSink(Protocol):
    def write(self, record: ResponseRecord) -> None: ...


class _Clock(Protocol):
    def now_us(self) -> int: ...


# =============================================================================
# Receptors
# =============================================================================

def antigen_receptor_step(cell: Cell, compartment: TissueCompartment, rng: np.random.Generator) -> int:
    """Move antigen from random tissue slots into random cell-store slots.

    Each receptor probes one tissue slot. An occupied slot is emptied and
    its antigen overwrites a random slot of the cell store; an empty slot
    transfers nothing.

    Returns:
        Number of antigen transferred
    """
    count = cell.antigen_receptors
    tissue = compartment.antigen_store
    store = cell.antigen_store
    if count == 0 or not store or compartment.occupancy == 0:
        return 0

    probes = rng.integers(0, len(tissue), size=count).tolist()
    targets = rng.integers(0, len(store), size=count).tolist()

    transfers = 0
    for probe, target in zip(probes, targets):
        value = tissue[probe]
        if value is None:
            continue
        tissue[probe] = None
        compartment.occupancy -= 1
        if store[target] is None:
            cell.stored += 1
        store[target] = value
        transfers += 1
    return transfers


def cytokine_receptor_step(cell: Cell, compartment: TissueCompartment) -> None:
    """Copy each watched tissue signal into its receptor."""
    signals = compartment.signals
    for receptor in cell.cytokine_receptors:
        receptor.level = signals[receptor.signal_id]


def cell_receptor_step(cell: Cell, compartment: TissueCompartment, rng: np.random.Generator) -> None:
    """Re-probe bindings: each receptor checks one random cell-store index.

    The receptor binds when a cell of its target type sits at that index.
    Bindings last one tick.
    """
    receptors = cell.cell_receptors
    if not receptors:
        return
    capacity = compartment.params.max_cells
    if capacity == 0:
        for receptor in receptors:
            receptor.bound = None
    else:
        cells = compartment.cells
        picks = rng.integers(0, capacity, size=len(receptors)).tolist()
        for receptor, index in zip(receptors, picks):
            if index < len(cells) and index != cell.index and cells[index].type_id == receptor.target_type:
                receptor.bound = index
            else:
                receptor.bound = None

    if not cell.is_bound:
        for vr in cell.vr_receptors:
            vr.active = False


def vr_receptor_step(
    cell: Cell,
    compartment: TissueCompartment,
    matcher: Matcher = exact_match,
) -> list[tuple[int, AntigenValue]]:
    """Match VR locks against antigen displayed on the bound cells.

    A cell bound by several cell receptors is matched once.

    Returns:
        (vr_index, antigen) per match, in VR receptor index order
    """
    bound: list[int] = []
    for receptor in cell.cell_receptors:
        if receptor.bound is not None and receptor.bound not in bound:
            bound.append(receptor.bound)

    keys: list[AntigenValue] = []
    for index in bound:
        keys.extend(compartment.cells[index].displayed())

    matches: list[tuple[int, AntigenValue]] = []
    if not keys:
        for vr in cell.vr_receptors:
            vr.active = False
        return matches

    if matcher is exact_match:
        available = Counter(keys)
        for vr_index, vr in enumerate(cell.vr_receptors):
            hits = available.get(vr.lock, 0)
            vr.active = hits > 0
            matches.extend((vr_index, vr.lock) for _ in range(hits))
    else:
        for vr_index, vr in enumerate(cell.vr_receptors):
            hits = [key for key in keys if matcher(vr.lock, key)]
            vr.active = bool(hits)
            matches.extend((vr_index, key) for key in hits)
    return matches


# =============================================================================
# Producers
# =============================================================================

def antigen_producer_step(cell: Cell, rng: np.random.Generator) -> tuple[int, int]:
    """Count down displays and load free producers from the cell store.

    A producer mid-display keeps its antigen. A producer whose countdown
    reaches zero clears its display and is free again. A free producer takes
    one random antigen out of the store and displays it for its action time.

    Returns:
        (presentations, sum of action times assigned to them)
    """
    presentations = 0
    action_time_sum = 0
    occupied: list[int] | None = None
    store = cell.antigen_store

    for producer in cell.antigen_producers:
        if producer.remaining > 0:
            producer.remaining -= 1
            if producer.remaining > 0:
                continue
            producer.displayed = None
        if cell.stored == 0:
            continue
        if occupied is None:
            occupied = [i for i, value in enumerate(store) if value is not None]
        pick = int(rng.integers(len(occupied)))
        slot = occupied[pick]
        occupied[pick] = occupied[-1]
        occupied.pop()

        producer.displayed = store[slot]
        producer.remaining = producer.action_time
        store[slot] = None
        cell.stored -= 1
        presentations += 1
        action_time_sum += producer.action_time

    return presentations, action_time_sum


def cytokine_producer_step(cell: Cell, compartment: TissueCompartment) -> None:
    """Write each producer's level into its tissue signal (last writer wins)."""
    for producer in cell.cytokine_producers:
        compartment.signals[producer.signal_id] = producer.level


def response_producer_step(
    cell: Cell,
    matches: list[tuple[int, AntigenValue]],
    response_sink: ResponseSink,
    clock: _Clock,
) -> int:
    """Write one response per match, stamped with the current run time.

    Cells without a response producer emit nothing.

    Raises:
        RunFatalError: If the sink fails
    """
    if not matches or not cell.response_producers:
        return 0
    t_us = clock.now_us()
    try:
        for _, antigen in matches:
            response_sink.write(ResponseRecord(t_us=t_us, antigen=antigen, cell_type=cell.type_id))
    except RunFatalError:
        raise
    except Exception as e:
        raise RunFatalError(f"response sink failed: {e}") from e
    return len(matches)
