"""twocell: a two-cell-type algorithm for syscall policy generation.

Type 1 cells take antigen from the tissue and present it on their antigen
producers. With the signal enabled, a cytokine receptor reading CPU usage
controls how long antigen stays presented.

Type 2 cells bind Type 1 cells through cell receptors, match the presented
antigen with their VR receptor locks and log a response for each match.
An unmatched Type 2 cell redraws all its locks every cell_lifespan cycles;
after its first match it keeps its locks for the rest of the run.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from pytissue.config import TYPE1, TYPE2, TissueConfig
from pytissue.engine.cellkit import antigen_producer_step, response_producer_step, vr_receptor_step
from pytissue.engine.probes import Probe, occupancy_probe, vr_repertoire_probe
from pytissue.engine.scheduler import CycleCallback, CycleContext
from pytissue.models.tissue import Cell, TissueCompartment, new_cell


logger = logging.getLogger(__name__)


@dataclass
class Type1State:
    """Signal handling state of a Type 1 cell.

    current_action_time never drops below 1.
    """
    signal_enabled: bool
    current_action_time: int
    last_signal_level: float = 0.0
    reset_action_time: int = 100


@dataclass
class Type2State:
    """Matching state of a Type 2 cell.

    match_counter mirrors the cell's internal cytokine and never decreases.
    """
    lifespan: int
    lock_min: int
    lock_max: int
    match_counter: int = 0
    age_since_reset: int = 0


# =============================================================================
# Type 1
# =============================================================================

def update_action_time(state: Type1State, new_level: float) -> int:
    """Adjust the presentation time from a new signal reading.

    Unchanged level keeps the action time, a lower level halves it (floor,
    minimum 1) and a higher level resets it.
    """
    if new_level < state.last_signal_level:
        state.current_action_time = max(1, state.current_action_time // 2)
    elif new_level > state.last_signal_level:
        state.current_action_time = state.reset_action_time
    state.last_signal_level = new_level
    return state.current_action_time


def type1_cycle(cell: Cell, context: CycleContext) -> None:
    """Type 1 cycle: action-time update then the antigen producer step.

    The scheduler has already run this cell's antigen receptors. New action
    times apply to the next presentation; displays in flight keep their
    countdown.
    """
    state: Type1State = cell.state
    if state.signal_enabled and cell.cytokine_receptors:
        action_time = update_action_time(state, cell.cytokine_receptors[0].level)
        for producer in cell.antigen_producers:
            producer.action_time = action_time

    presentations, action_time_sum = antigen_producer_step(cell, context.rng)
    context.report.presentations += presentations
    context.report.action_time_sum += action_time_sum


# =============================================================================
# Type 2
# =============================================================================

def lifespan_rule(cell: Cell, rng: np.random.Generator) -> bool:
    """Age the cell and redraw its locks if it has outlived its lifespan unmatched.

    Returns:
        True if the locks were redrawn
    """
    state: Type2State = cell.state
    state.age_since_reset += 1
    cell.age = state.age_since_reset
    if state.match_counter > 0 or state.age_since_reset < state.lifespan:
        return False

    locks = rng.integers(state.lock_min, state.lock_max + 1, size=len(cell.vr_receptors)).tolist()
    for vr, lock in zip(cell.vr_receptors, locks):
        vr.lock = lock
    state.age_since_reset = 0
    cell.age = 0
    return True


def type2_cycle(cell: Cell, context: CycleContext) -> None:
    """Type 2 cycle: match against bound Type 1 cells, respond, then the lifespan rule."""
    state: Type2State = cell.state
    matches = vr_receptor_step(cell, context.compartment, context.matcher)
    if matches:
        response_producer_step(cell, matches, context.responses, context.clock)
        state.match_counter += len(matches)
        state.age_since_reset = 0
        if cell.internal_cytokines:
            cell.internal_cytokines[0] = state.match_counter
        context.report.matches += len(matches)
    lifespan_rule(cell, context.rng)


# =============================================================================
# Algorithm
# =============================================================================

class TwoCell:
    """The twocell algorithm, configured from a TissueConfig."""

    name = "twocell"

    def __init__(self, config: TissueConfig):
        self.config = config
        self.type1 = config.type1_params()
        self.type2 = config.type2_params()

    @property
    def type1_action_time(self) -> int:
        if self.config.signal_enabled:
            return self.config.initial_action_time
        return self.config.antigen_producer_action_time

    def populate(self, compartment: TissueCompartment, rng: np.random.Generator) -> None:
        cfg = self.config
        tissue = compartment.params

        for _ in range(self.type1.num_cells):
            cell = new_cell(
                self.type1.model_copy(update={"antigen_producer_action_time": self.type1_action_time}),
                tissue,
                cytokine_receptor_ids=[cfg.signal_id] * self.type1.num_cytokine_receptors,
            )
            cell.state = Type1State(
                signal_enabled=cfg.signal_enabled,
                current_action_time=self.type1_action_time,
                reset_action_time=cfg.initial_action_time,
            )
            compartment.add_cell(cell)

        for _ in range(self.type2.num_cells):
            locks = rng.integers(cfg.vr_lock_min, cfg.vr_lock_max + 1, size=self.type2.num_vr_receptors)
            cell = new_cell(
                self.type2,
                tissue,
                cell_receptor_targets=[TYPE1] * self.type2.num_cell_receptors,
                vr_locks=locks.tolist(),
            )
            cell.state = Type2State(
                lifespan=self.type2.cell_lifespan,
                lock_min=cfg.vr_lock_min,
                lock_max=cfg.vr_lock_max,
            )
            compartment.add_cell(cell)

        logger.debug(
            f"populated tissue with {self.type1.num_cells} Type 1 and {self.type2.num_cells} Type 2 cells"
        )

    def callbacks(self) -> Mapping[int, CycleCallback]:
        return {TYPE1: type1_cycle, TYPE2: type2_cycle}

    def default_probes(self) -> list[Probe]:
        return [vr_repertoire_probe(TYPE2), occupancy_probe()]
