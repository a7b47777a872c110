"""Experiment plans and the datasets they name.

A plan is `key=value` text like a config file, except that the dataset keys
may repeat:

    name=normal-policy
    config=../configs/twocell-selective.conf
    config.grace_period=30000000
    train=preset:normal@1
    train=preset:normal@2
    evaluate=data/success1.log
    signal_arm=preset:success@7
    repeats=20
    seed=42
    mode=deterministic

Dataset references are either a replay log path (labels are read from its
`.labels` sidecar) or `preset:<name>@<seed>` for a synthetic dataset.
Relative paths resolve against the plan file's directory.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from pytissue.config import TissueConfig
from pytissue.errors import PlanError, TissueError
from pytissue.models.records import DatasetGroup, DatasetLabel, ReplayEvent
from pytissue.replay.logfile import read_labeled_log
from pytissue.replay.synth import generate_synthetic, preset


PRESET_PREFIX = "preset:"
LIST_KEYS = ("train", "evaluate", "signal_arm")
CONFIG_PREFIX = "config."


class RunMode(str, Enum):
    """How each run's clock advances."""
    DETERMINISTIC = "deterministic"
    REALTIME = "realtime"
    ACCELERATED = "accelerated"


@dataclass
class Dataset:
    """A named replay log with its labels."""
    name: str
    events: list[ReplayEvent]
    label: DatasetLabel

    @property
    def syscalls(self) -> set[int]:
        return {e.antigen for e in self.events if e.is_antigen}


def load_dataset(ref: str, base_dir: Optional[Path] = None) -> Dataset:
    """Resolve a dataset reference.

    Raises:
        PlanError: If the reference cannot be resolved or loaded
    """
    try:
        if ref.startswith(PRESET_PREFIX):
            name, _, seed = ref[len(PRESET_PREFIX):].partition("@")
            if seed and not seed.isdigit():
                raise PlanError(f"bad preset seed in {ref!r}")
            events, label = generate_synthetic(preset(name), int(seed or 0))
            return Dataset(name=f"{name}@{seed or 0}", events=events, label=label)

        path = Path(ref)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        log, label = read_labeled_log(path)
        label = label or DatasetLabel(log.group or DatasetGroup.NORMAL)
        return Dataset(name=path.stem, events=log.events, label=label)
    except PlanError:
        raise
    except TissueError as e:
        raise PlanError(f"dataset {ref!r}: {e}") from e


class ExperimentPlan(BaseModel):
    """What to run: config, datasets, repeat count, seeds and clock mode.

    Attributes:
        config_path: Config file; None uses the built-in defaults
        overrides: Config keys set on top of the config file
        train: Datasets replayed `repeats` times each to generate policies
        evaluate: Labeled datasets the policies are applied to
        signal_arm: Datasets for the signal-vs-fixed action time comparison
        seed: Base seed; training run i uses seed + i
        rate: Replay rate factor in realtime and accelerated modes
    """
    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    config_path: Optional[Path] = None
    overrides: dict[str, str] = Field(default_factory=dict)
    train: list[str] = Field(default_factory=list)
    evaluate: list[str] = Field(default_factory=list)
    signal_arm: list[str] = Field(default_factory=list)
    repeats: int = Field(default=20, ge=1)
    signal_repeats: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    mode: RunMode = RunMode.DETERMINISTIC
    rate: float = Field(default=1.0, gt=0)
    base_dir: Optional[Path] = None

    @model_validator(mode="after")
    def _check_datasets(self) -> "ExperimentPlan":
        if not self.train and not self.signal_arm:
            raise ValueError("a plan needs at least one train or signal_arm dataset")
        if self.mode is RunMode.REALTIME and self.rate != 1.0:
            raise ValueError("realtime mode replays at rate 1; use mode=accelerated")
        return self

    @property
    def arm_repeats(self) -> int:
        return self.signal_repeats or self.repeats

    def resolve_config(self) -> TissueConfig:
        """The plan's config: the config file plus overrides.

        Raises:
            ConfigError: If the file or an override is invalid
        """
        base = TissueConfig()
        if self.config_path is not None:
            path = self.config_path
            if self.base_dir is not None and not path.is_absolute():
                path = self.base_dir / path
            base = TissueConfig.load(path)
        if not self.overrides:
            return base
        return TissueConfig.from_dict({**base.to_dict(), **self.overrides})

    def load_datasets(self, refs: list[str]) -> list[Dataset]:
        return [load_dataset(ref, self.base_dir) for ref in refs]

    @classmethod
    def loads(cls, text: str, base_dir: Optional[Path] = None) -> "ExperimentPlan":
        """Parse plan text.

        Raises:
            PlanError: On malformed lines, unknown or duplicate keys, or
                invalid values
        """
        data: dict = {"base_dir": base_dir, "overrides": {}}
        for key in LIST_KEYS:
            data[key] = []
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise PlanError(f"line {number}: expected key=value, got {raw!r}")
            if key in LIST_KEYS:
                data[key].append(value)
            elif key.startswith(CONFIG_PREFIX):
                data["overrides"][key[len(CONFIG_PREFIX):]] = value
            else:
                field = "config_path" if key == "config" else key
                if field in data:
                    raise PlanError(f"line {number}: duplicate key {key!r}")
                if field not in cls.model_fields or field in ("base_dir", "overrides"):
                    raise PlanError(f"line {number}: unknown key {key!r}")
                data[field] = value
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise PlanError(f"invalid plan: {e}") from e

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentPlan":
        path = Path(path)
        if not path.exists():
            raise PlanError(f"plan file not found: {path}")
        return cls.loads(path.read_text(), base_dir=path.parent)
