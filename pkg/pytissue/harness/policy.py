"""Syscall policies: naive baseline, generation from responses, aggregation
over runs, evaluation on labeled datasets and the policy file format.

Policy files list one rule per line and end with the default:

    permit 5
    permit 6
    default deny
"""

import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Optional

import numpy as np

from pytissue.errors import TissueError
from pytissue.models.policy import EvaluationRow, Policy, PolicyStats, Provenance, SyscallStats
from pytissue.models.records import AntigenValue, DatasetLabel, ReplayEvent, ResponseRecord
from pytissue.replay.syscalls import syscall_name


logger = logging.getLogger(__name__)


class PolicyFileError(TissueError):
    """A policy file that does not follow the permit/default format."""
    pass


def antigen_values(events: Iterable[ReplayEvent]) -> list[AntigenValue]:
    return [event.antigen for event in events if event.is_antigen]


def naive_policy(datasets: Iterable[Iterable[ReplayEvent]]) -> Policy:
    """Permit every syscall seen in any of the datasets."""
    permitted: set[AntigenValue] = set()
    for events in datasets:
        permitted.update(antigen_values(events))
    return Policy(permitted=frozenset(permitted), provenance=Provenance.NAIVE)


def policy_from_responses(responses: Iterable[ResponseRecord], run_id: Optional[int] = None) -> Policy:
    """Permit exactly the syscalls that were responded to."""
    return Policy(
        permitted=frozenset(r.antigen for r in responses),
        provenance=Provenance.GENERATED,
        run_ids=[run_id] if run_id is not None else [],
    )


def aggregate_policies(
    policies: Sequence[Policy],
    response_logs: Sequence[Sequence[ResponseRecord]],
    dataset: Iterable[ReplayEvent],
) -> tuple[Policy, PolicyStats]:
    """Union of the run policies plus per-syscall response statistics.

    Statistics cover every syscall in the dataset or the union. mean and sd
    (sample, ddof=1) of the per-run response counts are rounded to two
    places. Rows are ordered by dataset frequency, then mean.
    """
    permitted: set[AntigenValue] = set()
    run_ids: list[int] = []
    for policy in policies:
        permitted |= policy.permitted
        run_ids += policy.run_ids
    union = Policy(permitted=frozenset(permitted), provenance=Provenance.GENERATED, run_ids=run_ids)

    freq = Counter(antigen_values(dataset))
    per_run = [Counter(r.antigen for r in log) for log in response_logs]
    rows = []
    for syscall in sorted(set(freq) | permitted):
        counts = np.array([run[syscall] for run in per_run], dtype=float)
        mean = float(counts.mean()) if len(counts) else 0.0
        sd = float(counts.std(ddof=1)) if len(counts) > 1 else 0.0
        rows.append(
            SyscallStats(
                syscall=syscall,
                name=syscall_name(syscall),
                freq=freq[syscall],
                mean=round(mean, 2),
                sd=round(sd, 2),
            )
        )
    rows.sort(key=lambda row: (row.freq, row.mean, row.syscall))
    return union, PolicyStats(runs=len(response_logs), rows=rows)


def evaluate_policy(
    policy: Policy,
    events: Sequence[ReplayEvent],
    label: DatasetLabel,
    dataset: str = "",
) -> EvaluationRow:
    """Apply a policy to every syscall of a labeled dataset.

    Percentages are of syscall events and truncated to integers, so permit
    and deny may sum to 99.
    """
    flags = label.attack_flags or [False] * len(events)
    if len(flags) != len(events):
        raise ValueError(f"{len(flags)} attack flags for {len(events)} events")

    total = attacks = permits = 0
    for event, flag in zip(events, flags):
        if not event.is_antigen:
            continue
        total += 1
        attacks += flag
        permits += policy.permits(event.antigen)

    def pct(count: int) -> int:
        return count * 100 // total if total else 0

    return EvaluationRow(
        dataset=dataset or label.group.value,
        events=total,
        normal_pct=pct(total - attacks),
        attack_pct=pct(attacks),
        permit_pct=pct(permits),
        deny_pct=pct(total - permits),
    )


# =============================================================================
# Policy files
# =============================================================================

def format_policy(policy: Policy) -> str:
    lines = [f"permit {value}" for value in sorted(policy.permitted)]
    lines.append(f"default {policy.default_action}")
    return "\n".join(lines) + "\n"


def write_policy(path: str | Path, policy: Policy) -> None:
    Path(path).write_text(format_policy(policy))


def read_policy(path: str | Path) -> Policy:
    """Read a policy file.

    Raises:
        PolicyFileError: On anything but permit rules followed by `default deny`
    """
    path = Path(path)
    if not path.exists():
        raise PolicyFileError(f"policy file not found: {path}")
    permitted: set[AntigenValue] = set()
    saw_default = False
    for number, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if saw_default:
            raise PolicyFileError(f"{path} line {number}: rule after the default")
        match line.split():
            case ["permit", value] if value.isdigit():
                permitted.add(int(value))
            case ["default", "deny"]:
                saw_default = True
            case _:
                raise PolicyFileError(f"{path} line {number}: cannot parse {line!r}")
    if not saw_default:
        raise PolicyFileError(f"{path}: missing `default deny`")
    return Policy(permitted=frozenset(permitted))
