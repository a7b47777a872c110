"""Parsers for recorded traces: strace syscall logs and process-monitor logs.

strace logs are expected with absolute timestamps (`strace -ttt`), with or
without pid prefixes (`strace -f`):

    1100000000.000000 close(3) = 0
    [pid  4242] 1100000000.500000 open("/etc", O_RDONLY) = 3
    4242  1100000000.700000 read(3, ...) = 12

Process-monitor logs hold one sample per line:

    1100000000.000000 cpu=0.25 mem=1048576
"""

import logging
import re
from collections.abc import Iterable
from decimal import Decimal, InvalidOperation
from typing import NamedTuple, Optional

from pytissue.errors import TraceParseError
from pytissue.replay.syscalls import syscall_number


logger = logging.getLogger(__name__)


MAX_SKIPPED_FRACTION = 0.10
MAX_LOGGED_SKIPS = 10

_STRACE_LINE = re.compile(
    r"^(?:\[pid\s+\d+\]\s+|\d+\s+)?"  # Optional pid prefix
    r"(?P<ts>\d+(?:\.\d+)?)\s+"
    r"(?:<\.\.\.\s+(?P<resumed>\w+)\s+resumed>|(?P<name>\w+)\()"
)
# Signal deliveries and exit notices carry no syscall.
_STRACE_NOTICE = re.compile(r"^(?:\[pid\s+\d+\]\s+|\d+\s+)?(?:\d+(?:\.\d+)?\s+)?(?:---|\+\+\+)")
_PROCMON_LINE = re.compile(
    r"^(?P<ts>\d+(?:\.\d+)?)\s+cpu=(?P<cpu>\d+(?:\.\d+)?)(?:\s+mem=(?P<mem>\d+))?\s*$"
)


class ProcessSample(NamedTuple):
    """One process-monitor reading, time rebased to the trace origin."""
    t_us: int
    cpu: float
    mem: Optional[int] = None


def _lines(text: str | Iterable[str]) -> Iterable[str]:
    return text.splitlines() if isinstance(text, str) else text


def _rebase(ts: Decimal, origin: Decimal) -> int:
    return int((ts - origin) * 1_000_000)


def _check_skipped(source: str, skipped: int, total: int) -> None:
    if skipped > MAX_LOGGED_SKIPS:
        logger.warning(f"{source}: {skipped - MAX_LOGGED_SKIPS} more lines skipped")
    if total and skipped / total > MAX_SKIPPED_FRACTION:
        raise TraceParseError(
            f"{source}: skipped {skipped} of {total} lines (more than {MAX_SKIPPED_FRACTION:.0%})",
            skipped=skipped,
            total=total,
        )


def first_timestamp(text: str | Iterable[str]) -> Optional[Decimal]:
    """Timestamp of the first timestamped line, for a shared rebase origin."""
    for raw in _lines(text):
        match = re.match(r"^(?:\[pid\s+\d+\]\s+|\d+\s+)?(\d+(?:\.\d+)?)\s", raw.strip() + " ")
        if match:
            return Decimal(match.group(1))
    return None


def parse_strace(
    text: str | Iterable[str],
    origin: Optional[Decimal] = None,
) -> list[tuple[int, int]]:
    """Parse an strace log into (t_us, syscall_number) pairs.

    Times are rebased to origin (default: the first line's timestamp). A call
    split into `<unfinished ...>` and `<... resumed>` lines counts once, at
    the time it started.

    Raises:
        TraceParseError: If more than 10% of the syscall lines were skipped
    """
    calls: list[tuple[int, int]] = []
    skipped = 0
    total = 0
    for number, raw in enumerate(_lines(text), start=1):
        line = raw.strip()
        if not line or _STRACE_NOTICE.match(line):
            continue
        match = _STRACE_LINE.match(line)
        if match and match.group("resumed"):
            continue
        total += 1
        if match is None:
            skipped += 1
            if skipped <= MAX_LOGGED_SKIPS:
                logger.warning(f"strace line {number}: cannot parse {line[:60]!r}")
            continue
        name = match.group("name")
        value = syscall_number(name)
        if value is None:
            skipped += 1
            if skipped <= MAX_LOGGED_SKIPS:
                logger.warning(f"strace line {number}: unknown syscall {name!r}")
            continue
        ts = Decimal(match.group("ts"))
        if origin is None:
            origin = ts
        calls.append((_rebase(ts, origin), value))

    _check_skipped("strace log", skipped, total)
    calls.sort(key=lambda call: call[0])
    logger.debug(f"parsed {len(calls)} syscalls from {total} strace lines")
    return calls


def parse_process_monitor(
    text: str | Iterable[str],
    origin: Optional[Decimal] = None,
) -> list[ProcessSample]:
    """Parse a process-monitor log into samples rebased to origin.

    Raises:
        TraceParseError: If more than 10% of the lines were skipped
    """
    samples: list[ProcessSample] = []
    skipped = 0
    total = 0
    for number, raw in enumerate(_lines(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        total += 1
        match = _PROCMON_LINE.match(line)
        if match is None:
            skipped += 1
            if skipped <= MAX_LOGGED_SKIPS:
                logger.warning(f"process monitor line {number}: cannot parse {line[:60]!r}")
            continue
        try:
            ts = Decimal(match.group("ts"))
        except InvalidOperation:
            skipped += 1
            continue
        if origin is None:
            origin = ts
        mem = match.group("mem")
        samples.append(
            ProcessSample(_rebase(ts, origin), float(match.group("cpu")), int(mem) if mem else None)
        )

    _check_skipped("process monitor log", skipped, total)
    samples.sort(key=lambda sample: sample.t_us)
    return samples
