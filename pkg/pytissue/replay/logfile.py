"""The replay log file format and its labels sidecar.

A replay log is text, one event per line, sorted by time:

    # group=success
    # seed=42
    0 ANTIGEN 6
    500000 ANTIGEN 5
    500000 SIGNAL 0 0.25

`#` lines carry `key=value` metadata. The sidecar `<log>.labels` holds one
attack flag (0 or 1) per event line, in the same order, plus a `# group=`
header.
"""

import hashlib
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from pytissue.errors import TraceParseError
from pytissue.models.records import DatasetGroup, DatasetLabel, EventKind, ReplayEvent


logger = logging.getLogger(__name__)


LABELS_SUFFIX = ".labels"


@dataclass
class ReplayLog:
    """Events of a replay log plus its metadata header."""
    events: list[ReplayEvent]
    metadata: dict[str, str] = field(default_factory=dict)
    source_order: Optional[list[int]] = None

    @property
    def duration_us(self) -> int:
        return self.events[-1].t_us if self.events else 0

    @property
    def group(self) -> Optional[DatasetGroup]:
        value = self.metadata.get("group")
        return DatasetGroup(value) if value in DatasetGroup._value2member_map_ else None


# =============================================================================
# Events
# =============================================================================

def format_event(event: ReplayEvent) -> str:
    """One log line, without the newline."""
    if event.is_antigen:
        return f"{event.t_us} ANTIGEN {event.antigen}"
    return f"{event.t_us} SIGNAL {event.signal.id} {event.signal.level!r}"


def parse_event(line: str, number: int = 0) -> ReplayEvent:
    """Parse one event line.

    Raises:
        TraceParseError: If the line is not a valid event
    """
    parts = line.split()
    try:
        t_us = int(parts[0])
        kind = EventKind(parts[1])
        if t_us < 0:
            raise ValueError("negative time")
        if kind is EventKind.ANTIGEN and len(parts) == 3:
            value = int(parts[2])
            if value < 0:
                raise ValueError("negative antigen")
            return ReplayEvent.antigen_event(t_us, value)
        if kind is EventKind.SIGNAL and len(parts) == 4:
            signal_id, level = int(parts[2]), float(parts[3])
            if signal_id < 0 or level < 0 or not math.isfinite(level):
                raise ValueError("bad signal")
            return ReplayEvent.signal_event(t_us, signal_id, level)
        raise ValueError("wrong number of fields")
    except (IndexError, ValueError) as e:
        raise TraceParseError(f"replay log line {number}: {line!r} ({e})", skipped=1, total=number) from None


def log_digest(events: Iterable[ReplayEvent]) -> str:
    """sha256 over the canonical event lines, recorded in run manifests."""
    digest = hashlib.sha256()
    for event in events:
        digest.update(format_event(event).encode())
        digest.update(b"\n")
    return digest.hexdigest()


def merge_logs(
    syscalls: Iterable[tuple[int, int]],
    cpu_samples: Iterable[Sequence] = (),
    signal_id: int = 0,
) -> list[ReplayEvent]:
    """Merge syscall and CPU series into one time-sorted event list.

    Each cpu sample is (t_us, level, ...). At equal times ANTIGEN events
    come before SIGNAL events; each input keeps its own order.
    """
    events = [ReplayEvent.antigen_event(t_us, value) for t_us, value in syscalls]
    events += [ReplayEvent.signal_event(sample[0], signal_id, float(sample[1])) for sample in cpu_samples]
    # sort is stable, so ties keep input order within each kind
    events.sort(key=lambda e: (e.t_us, 0 if e.is_antigen else 1))
    return events


# =============================================================================
# Files
# =============================================================================

def write_log(path: str | Path, events: Sequence[ReplayEvent], metadata: Optional[Mapping[str, object]] = None) -> None:
    """Write a replay log; metadata goes into `# key=value` header lines."""
    lines = [f"# {key}={value}" for key, value in (metadata or {}).items()]
    lines += [format_event(event) for event in events]
    Path(path).write_text("\n".join(lines) + "\n" if lines else "")


def read_log(path: str | Path) -> ReplayLog:
    """Read a replay log.

    Raises:
        TraceParseError: On a malformed event line
    """
    path = Path(path)
    if not path.exists():
        raise TraceParseError(f"replay log not found: {path}")
    return loads_log(path.read_text())


def loads_log(text: str) -> ReplayLog:
    events: list[ReplayEvent] = []
    metadata: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if sep:
                metadata[key.strip()] = value.strip()
            continue
        events.append(parse_event(line, number))

    if any(a.t_us > b.t_us for a, b in zip(events, events[1:])):
        logger.warning("replay log is not time-sorted; sorting it")
        order = sorted(range(len(events)), key=lambda i: events[i].t_us)
        return ReplayLog([events[i] for i in order], metadata, source_order=order)
    return ReplayLog(events, metadata)


def labels_path(log_path: str | Path) -> Path:
    log_path = Path(log_path)
    return log_path.with_name(log_path.name + LABELS_SUFFIX)


def write_labels(log_path: str | Path, label: DatasetLabel) -> Path:
    """Write the labels sidecar next to log_path and return its path."""
    path = labels_path(log_path)
    lines = [f"# group={label.group.value}"]
    lines += ["1" if flag else "0" for flag in (label.attack_flags or [])]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_labels(log_path: str | Path) -> Optional[DatasetLabel]:
    """Read the labels sidecar of log_path, None if there is none.

    Raises:
        TraceParseError: On a malformed flag line
    """
    path = labels_path(log_path)
    if not path.exists():
        return None
    group = DatasetGroup.NORMAL
    flags: list[bool] = []
    for number, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            if key.strip() == "group":
                group = DatasetGroup(value.strip())
            continue
        if line not in ("0", "1"):
            raise TraceParseError(f"{path} line {number}: expected 0 or 1, got {line!r}")
        flags.append(line == "1")
    return DatasetLabel(group, flags or None)


def read_labeled_log(path: str | Path) -> tuple[ReplayLog, Optional[DatasetLabel]]:
    """Read a replay log and its labels sidecar with flags aligned to the events.

    Flags follow the file's line order; when the log had to be sorted they
    are permuted the same way as the events.

    Raises:
        TraceParseError: On a malformed log or sidecar, or when the sidecar
            holds a different number of flags than the log holds events
    """
    log = read_log(path)
    label = read_labels(path)
    if label is None or label.attack_flags is None:
        return log, label
    flags = label.attack_flags
    if len(flags) != len(log.events):
        raise TraceParseError(f"{labels_path(path)}: {len(flags)} flags for {len(log.events)} events")
    if log.source_order is not None:
        flags = [flags[i] for i in log.source_order]
    return log, DatasetLabel(label.group, flags)
