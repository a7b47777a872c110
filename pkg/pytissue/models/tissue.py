"""Tissue compartment and cell state.

Antigen stores are fixed arrays of optional slots (None = empty) so that
random-index overwrite keeps stable addressing.
"""

from collections import Counter
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Optional

from pydantic import ValidationError

from pytissue.errors import ConfigError, SignalRangeError
from pytissue.models.params import CellTypeParams, TissueParams
from pytissue.models.records import AntigenValue


# =============================================================================
# Receptors and producers
# =============================================================================

@dataclass(slots=True)
class CytokineReceptor:
    """Watches one tissue signal; level is the value read this tick."""
    signal_id: int
    level: float = 0.0


@dataclass(slots=True)
class CellReceptor:
    """Binds to a cell of target_type; bound is a compartment cell index."""
    target_type: int
    bound: Optional[int] = None


@dataclass(slots=True)
class VRReceptor:
    """Lock half of the lock-and-key match."""
    lock: AntigenValue
    active: bool = False


@dataclass(slots=True)
class AntigenProducer:
    """Displays one antigen for action_time cycles.

    While remaining > 0 the displayed antigen cannot be replaced.
    """
    action_time: int
    displayed: Optional[AntigenValue] = None
    remaining: int = 0


@dataclass(slots=True)
class CytokineProducer:
    """Writes level into a tissue signal when producer effects are applied."""
    signal_id: int
    level: float = 0.0


@dataclass(slots=True)
class ResponseProducer:
    """Emits responses to the named sink."""
    sink: str = "log"


# =============================================================================
# Cells and compartment
# =============================================================================

@dataclass(slots=True)
class Cell:
    """A typed agent with receptor and producer repertoires.

    `stored` counts occupied antigen_store slots. `state` holds
    algorithm-specific data (for example the twocell per-type state).
    """
    type_id: int
    index: int
    antigen_store: list[Optional[AntigenValue]]
    internal_cytokines: list[int]
    antigen_receptors: int
    cytokine_receptors: list[CytokineReceptor]
    cell_receptors: list[CellReceptor]
    vr_receptors: list[VRReceptor]
    antigen_producers: list[AntigenProducer]
    cytokine_producers: list[CytokineProducer]
    response_producers: list[ResponseProducer]
    age: int = 0
    stored: int = 0
    state: Any = None

    @property
    def is_bound(self) -> bool:
        return any(r.bound is not None for r in self.cell_receptors)

    def displayed(self) -> list[AntigenValue]:
        """Antigen currently shown on this cell's producers, in producer order."""
        return [p.displayed for p in self.antigen_producers if p.displayed is not None]


@dataclass
class TissueCompartment:
    """The shared environment: antigen store, signals and cells.

    `occupancy` counts occupied antigen_store slots.
    """
    params: TissueParams
    antigen_store: list[Optional[AntigenValue]]
    signals: list[float]
    cells: list[Cell] = field(default_factory=list)
    occupancy: int = 0

    def add_cell(self, cell: Cell) -> None:
        if len(self.cells) >= self.params.max_cells:
            raise ConfigError(
                f"cell population full (max_cells={self.params.max_cells})"
            )
        cell.index = len(self.cells)
        self.cells.append(cell)


def new_compartment(params: TissueParams | Mapping[str, Any]) -> TissueCompartment:
    """Create an empty compartment.

    Args:
        params: Validated TissueParams or a mapping of parameter values

    Returns:
        Compartment with empty antigen slots, zeroed signals and no cells

    Raises:
        ConfigError: If a parameter is invalid
    """
    if not isinstance(params, TissueParams):
        try:
            params = TissueParams(**dict(params))
        except ValidationError as e:
            raise ConfigError(f"invalid tissue parameters: {e}") from e
    return TissueCompartment(
        params=params,
        antigen_store=[None] * params.max_antigen,
        signals=[0.0] * params.max_cytokines,
    )


def new_cell(
    params: CellTypeParams,
    tissue: TissueParams,
    *,
    cytokine_receptor_ids: Optional[Sequence[int]] = None,
    cell_receptor_targets: Optional[Sequence[int]] = None,
    vr_locks: Optional[Sequence[AntigenValue]] = None,
    cytokine_producer_ids: Optional[Sequence[int]] = None,
) -> Cell:
    """Build a cell with the repertoire sizes of its type.

    Receptor specificities default to signal 0, the cell's own type and
    lock 0; callers normally supply them.

    Raises:
        SignalRangeError: If a cytokine receptor or producer watches a
            signal id outside the compartment's signal array
        ConfigError: If a specificity list has the wrong length
    """
    def _fill(values: Optional[Sequence], count: int, default, name: str) -> list:
        if values is None:
            return [default] * count
        if len(values) != count:
            raise ConfigError(f"{name}: expected {count} values, got {len(values)}")
        return list(values)

    receptor_ids = _fill(cytokine_receptor_ids, params.num_cytokine_receptors, 0, "cytokine receptors")
    producer_ids = _fill(cytokine_producer_ids, params.num_cytokine_producers, 0, "cytokine producers")
    for signal_id in (*receptor_ids, *producer_ids):
        if not 0 <= signal_id < tissue.max_cytokines:
            raise SignalRangeError(signal_id, tissue.max_cytokines)

    targets = _fill(cell_receptor_targets, params.num_cell_receptors, params.type_id, "cell receptors")
    locks = _fill(vr_locks, params.num_vr_receptors, 0, "VR receptors")

    return Cell(
        type_id=params.type_id,
        index=-1,
        antigen_store=[None] * params.num_antigen,
        internal_cytokines=[0] * params.num_cytokines,
        antigen_receptors=params.num_antigen_receptors,
        cytokine_receptors=[CytokineReceptor(i) for i in receptor_ids],
        cell_receptors=[CellReceptor(t) for t in targets],
        vr_receptors=[VRReceptor(lock) for lock in locks],
        antigen_producers=[
            AntigenProducer(params.antigen_producer_action_time)
            for _ in range(params.num_antigen_producers)
        ],
        cytokine_producers=[CytokineProducer(i) for i in producer_ids],
        response_producers=[ResponseProducer() for _ in range(params.num_response_producers)],
    )


# =============================================================================
# Invariant checking
# =============================================================================

def validate_compartment(compartment: TissueCompartment) -> list[str]:
    """Check every structural invariant of a compartment and its cells.

    Returns:
        Human-readable violations; empty when the state is valid
    """
    violations: list[str] = []
    params = compartment.params

    if len(compartment.antigen_store) != params.max_antigen:
        violations.append(
            f"tissue store has {len(compartment.antigen_store)} slots, expected {params.max_antigen}"
        )
    occupied = sum(1 for v in compartment.antigen_store if v is not None)
    if occupied != compartment.occupancy:
        violations.append(f"tissue occupancy counter {compartment.occupancy} != {occupied}")
    if occupied > params.max_antigen:
        violations.append(f"tissue occupancy {occupied} exceeds max_antigen")
    if len(compartment.signals) != params.max_cytokines:
        violations.append("signal array size differs from max_cytokines")
    if any(level < 0 for level in compartment.signals):
        violations.append("negative signal level")
    if len(compartment.cells) > params.max_cells:
        violations.append(f"{len(compartment.cells)} cells exceed max_cells")

    for position, cell in enumerate(compartment.cells):
        tag = f"cell {position} (type {cell.type_id})"
        if cell.index != position:
            violations.append(f"{tag}: index {cell.index} != position")
        stored = sum(1 for v in cell.antigen_store if v is not None)
        if stored != cell.stored:
            violations.append(f"{tag}: store counter {cell.stored} != {stored}")
        for receptor in cell.cytokine_receptors:
            if not 0 <= receptor.signal_id < params.max_cytokines:
                violations.append(f"{tag}: cytokine receptor watches missing signal")
        for receptor in cell.cell_receptors:
            if receptor.bound is not None:
                if not 0 <= receptor.bound < len(compartment.cells):
                    violations.append(f"{tag}: bound to missing cell {receptor.bound}")
                elif compartment.cells[receptor.bound].type_id != receptor.target_type:
                    violations.append(f"{tag}: bound to a cell of the wrong type")
        if not cell.is_bound and any(vr.active for vr in cell.vr_receptors):
            violations.append(f"{tag}: VR receptor active while unbound")
        for i, producer in enumerate(cell.antigen_producers):
            if producer.remaining < 0:
                violations.append(f"{tag}: producer {i} negative countdown")
            if producer.remaining > 0 and producer.displayed is None:
                violations.append(f"{tag}: producer {i} counting down with nothing displayed")
        if any(c < 0 for c in cell.internal_cytokines):
            violations.append(f"{tag}: negative internal cytokine")

    return violations


def antigen_census(compartment: TissueCompartment) -> Counter:
    """Count copies of each antigen value in tissue, cell stores and displays."""
    census: Counter = Counter(v for v in compartment.antigen_store if v is not None)
    for cell in compartment.cells:
        census.update(v for v in cell.antigen_store if v is not None)
        census.update(cell.displayed())
    return census


# =============================================================================
# Read-only snapshots for probes
# =============================================================================

@dataclass(frozen=True, slots=True)
class CellView:
    """Immutable copy of the observable state of one cell."""
    index: int
    type_id: int
    antigen_store: tuple[Optional[AntigenValue], ...]
    internal_cytokines: tuple[int, ...]
    vr_locks: tuple[AntigenValue, ...]
    displayed: tuple[Optional[AntigenValue], ...]
    action_times: tuple[int, ...]
    age: int


@dataclass(frozen=True, slots=True)
class CompartmentView:
    """Immutable copy of a compartment at one instant."""
    t_us: int
    antigen_store: tuple[Optional[AntigenValue], ...]
    signals: tuple[float, ...]
    cells: tuple[CellView, ...]

    @property
    def occupancy(self) -> int:
        return sum(1 for v in self.antigen_store if v is not None)


def snapshot(compartment: TissueCompartment, t_us: int) -> CompartmentView:
    """Take a read-only snapshot; mutating the compartment afterwards leaves it unchanged."""
    return CompartmentView(
        t_us=t_us,
        antigen_store=tuple(compartment.antigen_store),
        signals=tuple(compartment.signals),
        cells=tuple(
            CellView(
                index=cell.index,
                type_id=cell.type_id,
                antigen_store=tuple(cell.antigen_store),
                internal_cytokines=tuple(cell.internal_cytokines),
                vr_locks=tuple(vr.lock for vr in cell.vr_receptors),
                displayed=tuple(p.displayed for p in cell.antigen_producers),
                action_times=tuple(p.action_time for p in cell.antigen_producers),
                age=cell.age,
            )
            for cell in compartment.cells
        ),
    )
