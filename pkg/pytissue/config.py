"""Configuration for one tissue experiment.

A config file is flat `key=value` text. The keys are the tissue and
twocell parameter names:

- tissue: max_antigen, max_cytokines, max_cells, cell_update_rate,
  antigen_multiplier, probe_rate
- Type 1 cells: num_cells_1, num_antigen_1, num_antigen_receptors_1,
  num_antigen_producers_1, antigen_producer_action_time
- Type 2 cells: num_cells_2, cell_lifespan_2, num_cell_receptors_2,
  num_vr_receptors_2, num_response_producers_2

plus algorithm and server keys (signal_enabled, initial_action_time,
signal_id, vr_lock_min, vr_lock_max, grace_period, replay_delay, listen,
event_queue_size). Unknown keys are rejected. `#` starts a comment line.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from pytissue.errors import ConfigError
from pytissue.models.params import CellTypeParams, TissueParams


TYPE1 = 1
TYPE2 = 2

# Written first, in this order, by dumps().
TABLE_KEYS = [
    "max_antigen",
    "max_cytokines",
    "max_cells",
    "cell_update_rate",
    "antigen_multiplier",
    "num_cells_1",
    "num_antigen_1",
    "num_antigen_receptors_1",
    "num_antigen_producers_1",
    "antigen_producer_action_time",
    "num_cells_2",
    "cell_lifespan_2",
    "num_cell_receptors_2",
    "num_vr_receptors_2",
    "num_response_producers_2",
    "probe_rate",
]

DEFAULT_LISTEN = "127.0.0.1:7777"


class TissueConfig(BaseModel):
    """All parameters of one experiment."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # Tissue compartment
    max_antigen: int = Field(default=1000, ge=0)
    max_cytokines: int = Field(default=0, ge=0)
    max_cells: int = Field(default=100, ge=0)
    cell_update_rate: int = Field(default=100000, gt=0, description="µs")
    antigen_multiplier: int = Field(default=10, ge=1)
    probe_rate: int = Field(default=1000000, gt=0, description="µs")

    # Type 1 (antigen presenting) cells
    num_cells_1: int = Field(default=50, ge=0)
    num_antigen_1: int = Field(default=100, ge=0)
    num_antigen_receptors_1: int = Field(default=10, ge=0)
    num_antigen_producers_1: int = Field(default=10, ge=0)
    antigen_producer_action_time: int = Field(default=10, ge=1)

    # Type 2 (matching) cells
    num_cells_2: int = Field(default=50, ge=0)
    cell_lifespan_2: int = Field(default=100, ge=1)
    num_cell_receptors_2: int = Field(default=2, ge=0)
    num_vr_receptors_2: int = Field(default=20, ge=0)
    num_response_producers_2: int = Field(default=1, ge=0)

    # Algorithm
    signal_enabled: bool = False
    initial_action_time: int = Field(default=100, ge=1)
    signal_id: int = Field(default=0, ge=0)
    vr_lock_min: int = Field(default=0, ge=0)
    vr_lock_max: int = Field(default=340, ge=0)

    # Server
    grace_period: int = Field(default=60_000_000, ge=0, description="µs after replay ends")
    replay_delay: int = Field(default=10_000_000, ge=0, description="µs before replay starts")
    listen: str = DEFAULT_LISTEN
    event_queue_size: int = Field(default=65536, ge=1)

    @model_validator(mode="after")
    def _check_combinations(self) -> "TissueConfig":
        if self.num_cells_1 + self.num_cells_2 > self.max_cells:
            raise ValueError(
                f"num_cells_1 + num_cells_2 = {self.num_cells_1 + self.num_cells_2} "
                f"exceeds max_cells={self.max_cells}"
            )
        if self.signal_enabled and self.signal_id >= self.max_cytokines:
            raise ValueError(
                f"signal_enabled needs signal_id < max_cytokines (max_cytokines={self.max_cytokines})"
            )
        if self.vr_lock_max < self.vr_lock_min:
            raise ValueError("vr_lock_max must be >= vr_lock_min")
        host, _, port = self.listen.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"listen must be HOST:PORT, got {self.listen!r}")
        return self

    # -------------------------------------------------------------------------
    # Derived parameter objects
    # -------------------------------------------------------------------------

    def tissue_params(self) -> TissueParams:
        return TissueParams(
            max_antigen=self.max_antigen,
            max_cytokines=self.max_cytokines,
            max_cells=self.max_cells,
            cell_update_rate=self.cell_update_rate,
            antigen_multiplier=self.antigen_multiplier,
            probe_rate=self.probe_rate,
        )

    def type1_params(self) -> CellTypeParams:
        return CellTypeParams(
            type_id=TYPE1,
            num_cells=self.num_cells_1,
            num_antigen=self.num_antigen_1,
            num_antigen_receptors=self.num_antigen_receptors_1,
            num_antigen_producers=self.num_antigen_producers_1,
            num_cytokine_receptors=1 if self.signal_enabled else 0,
            antigen_producer_action_time=self.antigen_producer_action_time,
        )

    def type2_params(self) -> CellTypeParams:
        return CellTypeParams(
            type_id=TYPE2,
            num_cells=self.num_cells_2,
            num_antigen=0,
            num_cytokines=1,
            num_cell_receptors=self.num_cell_receptors_2,
            num_vr_receptors=self.num_vr_receptors_2,
            num_response_producers=self.num_response_producers_2,
            cell_lifespan=self.cell_lifespan_2,
        )

    @property
    def host(self) -> str:
        return self.listen.rpartition(":")[0]

    @property
    def port(self) -> int:
        return int(self.listen.rpartition(":")[2])

    # -------------------------------------------------------------------------
    # Serialization
    # -------------------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        """Convert to dictionary."""
        return self.model_dump()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TissueConfig":
        """Create from dictionary, wrapping validation failures in ConfigError."""
        try:
            return cls(**data)
        except ValidationError as e:
            raise ConfigError(_summarize(e)) from e

    def dumps(self) -> str:
        """Serialize to key=value text.

        Table keys always come first in their fixed order; other keys are
        written only when they differ from their defaults.
        """
        defaults = type(self)()
        lines = [f"{key}={_format_value(getattr(self, key))}" for key in TABLE_KEYS]
        for key in sorted(type(self).model_fields):
            if key in TABLE_KEYS:
                continue
            value = getattr(self, key)
            if value != getattr(defaults, key):
                lines.append(f"{key}={_format_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "TissueConfig":
        """Parse key=value text.

        Raises:
            ConfigError: On unknown or duplicate keys, malformed lines or
                invalid values
        """
        fields = cls.model_fields
        data: dict[str, Any] = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ConfigError(f"expected key=value, got {raw!r}", line=number)
            if key not in fields:
                raise ConfigError(f"unknown key {key!r}", line=number)
            if key in data:
                raise ConfigError(f"duplicate key {key!r}", line=number)
            data[key] = _parse_value(key, value, fields[key].annotation, number)
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        """Save configuration to file."""
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "TissueConfig":
        """Load configuration from file."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        return cls.loads(path.read_text())

    def digest(self) -> str:
        """sha256 of the canonical serialization, recorded in run manifests."""
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _parse_value(key: str, value: str, annotation: Any, line: int) -> Any:
    if annotation is bool:
        lowered = value.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected true or false, got {value!r}", line=line)
    if annotation is int:
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}", line=line) from None
    return value


def _summarize(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)
