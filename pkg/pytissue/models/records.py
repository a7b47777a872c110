"""Event and record types flowing through a tissue run."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


# An antigen is an opaque unsigned token; in the syscall experiments it is
# the syscall number.
AntigenValue = int


class EventKind(str, Enum):
    """Kind of a replay or client event."""
    ANTIGEN = "ANTIGEN"
    SIGNAL = "SIGNAL"


@dataclass(frozen=True, slots=True)
class SignalLevel:
    """A level for one tissue signal."""
    id: int
    level: float


@dataclass(frozen=True, slots=True)
class ReplayEvent:
    """A timestamped antigen or signal record.

    Attributes:
        t_us: Microseconds from log start
        kind: ANTIGEN or SIGNAL
        antigen: Antigen value (ANTIGEN events)
        signal: Signal id and level (SIGNAL events)
    """
    t_us: int
    kind: EventKind
    antigen: Optional[AntigenValue] = None
    signal: Optional[SignalLevel] = None

    @classmethod
    def antigen_event(cls, t_us: int, value: AntigenValue) -> "ReplayEvent":
        return cls(t_us=t_us, kind=EventKind.ANTIGEN, antigen=value)

    @classmethod
    def signal_event(cls, t_us: int, signal_id: int, level: float) -> "ReplayEvent":
        return cls(t_us=t_us, kind=EventKind.SIGNAL, signal=SignalLevel(signal_id, level))

    @property
    def is_antigen(self) -> bool:
        return self.kind is EventKind.ANTIGEN

    def shifted(self, offset_us: int) -> "ReplayEvent":
        """Return the same event moved by offset_us."""
        return ReplayEvent(self.t_us + offset_us, self.kind, self.antigen, self.signal)


class DatasetGroup(str, Enum):
    """Interaction group a dataset was recorded under."""
    NORMAL = "normal"
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass
class DatasetLabel:
    """Group label plus optional per-event attack flags.

    Attack flags are indexed like the events of the log they label.
    """
    group: DatasetGroup
    attack_flags: Optional[list[bool]] = None

    @property
    def attack_fraction(self) -> float:
        if not self.attack_flags:
            return 0.0
        return sum(self.attack_flags) / len(self.attack_flags)


@dataclass(frozen=True, slots=True)
class ResponseRecord:
    """One response produced by a cell's response producer.

    The antigen always equals the lock of the VR receptor that matched.
    """
    t_us: int
    antigen: AntigenValue
    cell_type: int

    def to_row(self) -> list:
        return [self.t_us, self.antigen, self.cell_type]


@dataclass
class TickReport:
    """Per-tick activity counts."""
    tick: int
    t_us: int
    events_applied: int = 0
    transfers: int = 0
    presentations: int = 0
    matches: int = 0
    responses: int = 0
    tissue_occupancy: int = 0
    action_time_sum: int = 0

    COLUMNS = [
        "tick",
        "t_us",
        "events_applied",
        "transfers",
        "presentations",
        "matches",
        "responses",
        "tissue_occupancy",
        "action_time_sum",
    ]

    def to_row(self) -> list:
        return [getattr(self, name) for name in self.COLUMNS]


@dataclass
class RunTranscript:
    """Everything a finished run produced.

    File paths are set when the run wrote a transcript directory.
    """
    seed: int
    ticks: int = 0
    responses: list[ResponseRecord] = field(default_factory=list)
    reports: list[TickReport] = field(default_factory=list)
    probe_rows: dict[str, list[list]] = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)

    @property
    def responded(self) -> set[AntigenValue]:
        return {r.antigen for r in self.responses}

    def mean_action_time(self) -> Optional[float]:
        """Mean action time assigned at presentation, None if nothing was presented."""
        presentations = sum(r.presentations for r in self.reports)
        if presentations == 0:
            return None
        return sum(r.action_time_sum for r in self.reports) / presentations
