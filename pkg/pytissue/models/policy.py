"""Syscall policy data models."""

from enum import Enum
from typing import Literal

from pydantic import BaseModel, Field, computed_field

from pytissue.models.records import AntigenValue


class Provenance(str, Enum):
    """Where a policy came from."""
    NAIVE = "naive"
    GENERATED = "generated"


class Policy(BaseModel):
    """A permit-set over antigen values; everything else is denied."""

    permitted: frozenset[AntigenValue] = Field(default_factory=frozenset)
    provenance: Provenance = Field(default=Provenance.GENERATED)
    run_ids: list[int] = Field(default_factory=list, description="Runs a generated policy came from")
    default_action: Literal["deny"] = "deny"

    def permits(self, value: AntigenValue) -> bool:
        return value in self.permitted

    def decide(self, value: AntigenValue) -> Literal["permit", "deny"]:
        return "permit" if value in self.permitted else "deny"


class SyscallStats(BaseModel):
    """One row of the policy statistics table.

    mean and sd are rounded to two places and cv is computed from those
    rounded values, truncated to an integer.
    """

    syscall: AntigenValue
    name: str = ""
    freq: int = Field(ge=0, description="Occurrences in the dataset")
    mean: float = Field(ge=0.0, description="Mean response count over runs")
    sd: float = Field(ge=0.0, description="Sample standard deviation of response counts")

    @computed_field
    @property
    def cv(self) -> int | None:
        if self.mean <= 0:
            return None
        # round away float noise first: 0.37 / 0.10 must give 370, not 369
        return int(round(self.sd * 100 / self.mean, 6))


class PolicyStats(BaseModel):
    """Per-syscall statistics across repeated runs."""

    runs: int = Field(ge=0)
    rows: list[SyscallStats] = Field(default_factory=list)

    def row(self, syscall: AntigenValue) -> SyscallStats | None:
        for row in self.rows:
            if row.syscall == syscall:
                return row
        return None


class EvaluationRow(BaseModel):
    """Integer-truncated percentages for one policy on one dataset."""

    dataset: str
    events: int = Field(ge=0)
    normal_pct: int
    attack_pct: int
    permit_pct: int
    deny_pct: int
