"""Synthetic labeled datasets with the shape of recorded syscall sessions.

A session is a set of activity bursts. Each syscall occurs a Poisson number
of times (mean = its expected count) at uniform times inside the bursts. An
optional attack segment adds its own syscall repertoire inside its window,
flagged as attack events. A CPU signal is sampled every cpu_period_s: an
exponentially smoothed load that follows event density, so it climbs during
activity and decays while the process is idle.

Specs are JSON files:

    {"group": "normal", "duration_s": 60, "counts": {"6": 557, "5": 30},
     "bursts": [{"start_s": 5, "duration_s": 3}]}
"""

import logging
from pathlib import Path
from typing import Annotated, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from pytissue.engine.clock import make_rng
from pytissue.errors import SynthSpecError
from pytissue.models.records import DatasetGroup, DatasetLabel, ReplayEvent
from pytissue.replay.logfile import merge_logs


logger = logging.getLogger(__name__)


Count = Annotated[float, Field(ge=0)]


class Window(BaseModel):
    """A span of session time, in seconds."""
    model_config = ConfigDict(extra="forbid")

    start_s: float = Field(ge=0)
    duration_s: float = Field(gt=0)

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


class AttackSpec(Window):
    """Attack segment: its own syscall repertoire inside its window."""

    counts: dict[int, Count] = Field(default_factory=dict, description="expected occurrences per syscall")
    cpu_burst: float = Field(default=0.3, ge=0, description="extra CPU activity while the attack runs")


class SynthSpec(BaseModel):
    """Parameters of one synthetic dataset.

    Attributes:
        counts: Expected occurrences of each syscall over the session
        bursts: Activity windows; empty means the whole session is active
        cpu_period_s: CPU sampling period; 0 produces an antigen-only log
        cpu_full_scale: Event rate (per second) that counts as full activity
    """
    model_config = ConfigDict(extra="forbid")

    group: DatasetGroup = DatasetGroup.NORMAL
    duration_s: float = Field(default=60.0, ge=0)
    counts: dict[int, Count] = Field(default_factory=dict)
    bursts: list[Window] = Field(default_factory=list)
    attack: Optional[AttackSpec] = None
    cpu_period_s: float = Field(default=1.0, ge=0)
    signal_id: int = Field(default=0, ge=0)
    cpu_baseline: float = Field(default=0.02, ge=0)
    cpu_gain: float = Field(default=0.6, ge=0)
    cpu_decay: float = Field(default=0.7, ge=0, lt=1)
    cpu_noise: float = Field(default=0.002, ge=0)
    cpu_full_scale: float = Field(default=100.0, gt=0)

    @model_validator(mode="after")
    def _check_windows(self) -> "SynthSpec":
        for window in [*self.bursts, *([self.attack] if self.attack else [])]:
            if window.end_s > self.duration_s:
                raise ValueError(f"window {window.start_s}+{window.duration_s}s ends after the session")
        return self

    @property
    def active_windows(self) -> list[Window]:
        if self.bursts:
            return list(self.bursts)
        if self.duration_s == 0:
            return []
        return [Window(start_s=0, duration_s=self.duration_s)]

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise SynthSpecError(f"invalid synthetic spec: {e}") from e

    @classmethod
    def load(cls, path: str | Path) -> "SynthSpec":
        path = Path(path)
        if not path.exists():
            raise SynthSpecError(f"spec file not found: {path}")
        try:
            return cls.model_validate_json(path.read_text())
        except ValidationError as e:
            raise SynthSpecError(f"invalid synthetic spec {path}: {e}") from e

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.model_dump_json(indent=2))


def _times_in(windows: list[Window], n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform times (µs) over the union of windows."""
    if n == 0 or not windows:
        return np.empty(0, dtype=np.int64)
    lengths = np.array([w.duration_s for w in windows])
    offsets = rng.uniform(0.0, lengths.sum(), size=n)
    edges = np.cumsum(lengths)
    which = np.searchsorted(edges, offsets, side="right").clip(max=len(windows) - 1)
    starts = np.array([w.start_s for w in windows])
    before = edges - lengths
    seconds = starts[which] + (offsets - before[which])
    return (seconds * 1_000_000).astype(np.int64)


def _cpu_series(spec: SynthSpec, times_us: np.ndarray, rng: np.random.Generator) -> list[tuple[int, float]]:
    if spec.cpu_period_s == 0 or spec.duration_s == 0:
        return []
    period_us = int(spec.cpu_period_s * 1_000_000)
    sample_times = np.arange(0, int(spec.duration_s * 1_000_000) + 1, period_us, dtype=np.int64)
    # events in (previous sample, this sample]
    counts = np.diff(np.searchsorted(np.sort(times_us), sample_times, side="right"), prepend=0)
    activity = np.minimum(1.0, counts / spec.cpu_period_s / spec.cpu_full_scale)
    if spec.attack is not None and spec.attack.cpu_burst:
        seconds = sample_times / 1_000_000
        inside = (seconds > spec.attack.start_s) & (seconds <= spec.attack.end_s)
        activity = np.minimum(1.0, activity + inside * spec.attack.cpu_burst)

    noise = rng.normal(0.0, spec.cpu_noise, size=len(sample_times)) if spec.cpu_noise else np.zeros(len(sample_times))
    samples: list[tuple[int, float]] = []
    load = 0.0
    for t_us, level, jitter in zip(sample_times.tolist(), activity.tolist(), noise.tolist()):
        load = spec.cpu_decay * load + (1 - spec.cpu_decay) * level
        cpu = round(max(0.0, spec.cpu_baseline + spec.cpu_gain * load + jitter), 4)
        samples.append((t_us, cpu))
    return samples


def generate_synthetic(spec: SynthSpec | dict, seed: int) -> tuple[list[ReplayEvent], DatasetLabel]:
    """Generate a replay log and its labels; a pure function of (spec, seed).

    Raises:
        SynthSpecError: If spec is a dict that does not validate
    """
    if not isinstance(spec, SynthSpec):
        spec = SynthSpec.from_dict(spec)
    rng = make_rng(seed)

    calls: list[tuple[int, int, bool]] = []
    windows = spec.active_windows
    for syscall in sorted(spec.counts):
        n = int(rng.poisson(spec.counts[syscall]))
        calls += [(t, syscall, False) for t in _times_in(windows, n, rng).tolist()]
    if spec.attack is not None:
        for syscall in sorted(spec.attack.counts):
            n = int(rng.poisson(spec.attack.counts[syscall]))
            calls += [(t, syscall, True) for t in _times_in([spec.attack], n, rng).tolist()]
    calls.sort(key=lambda call: call[0])

    times = np.array([t for t, _, _ in calls], dtype=np.int64)
    cpu = _cpu_series(spec, times, rng)
    events = merge_logs([(t, v) for t, v, _ in calls], cpu, signal_id=spec.signal_id)

    # merge_logs keeps antigen order, so flags line up with the antigen events
    attack_flags = iter([flag for _, _, flag in calls])
    flags = [next(attack_flags) if event.is_antigen else False for event in events]
    label = DatasetLabel(spec.group, flags)
    logger.debug(f"generated {len(calls)} syscalls and {len(cpu)} cpu samples (seed {seed})")
    return events, label


# =============================================================================
# Presets
# =============================================================================

# Occurrences per syscall in a normal session (syscall number -> count).
NORMAL_COUNTS: dict[int, float] = {
    12: 2, 11: 2, 136: 2, 66: 2, 2: 2, 4: 2, 309: 2, 13: 2, 197: 2, 19: 2, 118: 2, 191: 2, 304: 2,
    142: 3, 78: 4, 306: 4, 1: 4, 122: 4, 106: 4, 303: 5,
    141: 8, 125: 8, 168: 8, 311: 9, 312: 9, 174: 10, 20: 10, 55: 12, 302: 12,
    91: 15, 45: 16, 108: 23, 54: 24, 301: 25, 90: 27, 3: 27, 5: 30, 6: 557,
}

# Exploit activity: mostly syscalls a normal session makes rarely, plus a
# few it never makes (dup2, setuid, getuid).
SUCCESS_ATTACK_COUNTS: dict[int, float] = {
    11: 100, 2: 60, 66: 40, 12: 60, 136: 40, 4: 120, 13: 30, 19: 40, 197: 40, 122: 30, 106: 30, 1: 20,
    63: 40, 23: 30, 24: 20,
}

FAILURE_ATTACK_COUNTS: dict[int, float] = {11: 30, 2: 20, 12: 20, 4: 17, 63: 10}

NORMAL_BURSTS = [(5, 3), (25, 2), (45, 4)]


def _bursts(spans: list[tuple[float, float]]) -> list[Window]:
    return [Window(start_s=start, duration_s=duration) for start, duration in spans]


def _scaled(counts: dict[int, float], factor: float) -> dict[int, float]:
    return {syscall: count * factor for syscall, count in counts.items()}


def normal_preset() -> SynthSpec:
    """Normal usage: 38 syscalls in three bursts over 60 s."""
    return SynthSpec(group=DatasetGroup.NORMAL, counts=dict(NORMAL_COUNTS), bursts=_bursts(NORMAL_BURSTS))


def success_preset() -> SynthSpec:
    """Successful attack: about 76% of syscalls come from the exploit."""
    return SynthSpec(
        group=DatasetGroup.SUCCESS,
        counts=_scaled(NORMAL_COUNTS, 0.25),
        bursts=_bursts([(5, 3), (20, 20), (45, 4)]),
        attack=AttackSpec(start_s=20, duration_s=20, counts=dict(SUCCESS_ATTACK_COUNTS), cpu_burst=0.3),
    )


def failure_preset() -> SynthSpec:
    """Failed attack: about 18% of syscalls come from the exploit."""
    return SynthSpec(
        group=DatasetGroup.FAILURE,
        counts=_scaled(NORMAL_COUNTS, 0.5),
        bursts=_bursts(NORMAL_BURSTS),
        attack=AttackSpec(start_s=25, duration_s=2, counts=dict(FAILURE_ATTACK_COUNTS), cpu_burst=0.2),
    )


PRESETS = {
    "normal": normal_preset,
    "success": success_preset,
    "failure": failure_preset,
}


def preset(name: str) -> SynthSpec:
    """Look up a preset by name.

    Raises:
        SynthSpecError: If no preset has that name
    """
    try:
        return PRESETS[name]()
    except KeyError:
        raise SynthSpecError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})") from None
