"""Tissue and cell-type parameter models.

Defaults are the settings used for the twocell experiments.
"""

from pydantic import BaseModel, ConfigDict, Field


class TissueParams(BaseModel):
    """Parameters of one tissue compartment and its scheduler."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    max_antigen: int = Field(default=1000, ge=0, description="Tissue antigen store capacity")
    max_cytokines: int = Field(default=0, ge=0, description="Number of tissue signals")
    max_cells: int = Field(default=100, ge=0, description="Maximum cell population")
    cell_update_rate: int = Field(default=100000, gt=0, description="Scheduler period (µs)")
    antigen_multiplier: int = Field(default=10, ge=1, description="Copies made of each incoming antigen")
    probe_rate: int = Field(default=1000000, gt=0, description="Probe sampling period (µs)")


class CellTypeParams(BaseModel):
    """Repertoire sizes and timings shared by every cell of one type.

    Repertoire capacities are fixed for the lifetime of a cell.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    type_id: int = Field(ge=0, description="Cell type tag")
    num_cells: int = Field(default=0, ge=0, description="Cells of this type in the compartment")
    num_antigen: int = Field(default=0, ge=0, description="Internal antigen store capacity")
    num_cytokines: int = Field(default=0, ge=0, description="Internal cytokine count")
    num_antigen_receptors: int = Field(default=0, ge=0)
    num_antigen_producers: int = Field(default=0, ge=0)
    num_cytokine_receptors: int = Field(default=0, ge=0)
    num_cell_receptors: int = Field(default=0, ge=0)
    num_vr_receptors: int = Field(default=0, ge=0)
    num_response_producers: int = Field(default=0, ge=0)
    num_cytokine_producers: int = Field(default=0, ge=0)
    antigen_producer_action_time: int = Field(default=10, ge=1, description="Display time (cell cycles)")
    cell_lifespan: int = Field(default=0, ge=0, description="Cycles before an unmatched cell resets (0 = never)")
