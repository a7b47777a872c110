"""Tests for the tissue compartment and cell models."""

import pytest

from pytissue.errors import ConfigError, SignalRangeError
from pytissue.models.params import CellTypeParams, TissueParams
from pytissue.models.tissue import (
    antigen_census,
    new_cell,
    new_compartment,
    snapshot,
    validate_compartment,
)


def type1_params(**overrides) -> CellTypeParams:
    values = dict(type_id=1, num_antigen=4, num_antigen_receptors=2, num_antigen_producers=2)
    values.update(overrides)
    return CellTypeParams(**values)


class TestNewCompartment:
    """Tests for new_compartment."""

    def test_empty_compartment(self):
        compartment = new_compartment(TissueParams())
        assert len(compartment.antigen_store) == 1000
        assert compartment.occupancy == 0
        assert compartment.signals == []
        assert compartment.cells == []
        assert validate_compartment(compartment) == []

    def test_accepts_mapping(self):
        compartment = new_compartment({"max_antigen": 5, "max_cytokines": 2})
        assert compartment.antigen_store == [None] * 5
        assert compartment.signals == [0.0, 0.0]

    def test_zero_capacities_are_valid(self):
        compartment = new_compartment({"max_antigen": 0, "max_cells": 0})
        assert validate_compartment(compartment) == []

    def test_negative_parameter_rejected(self):
        with pytest.raises(ConfigError):
            new_compartment({"max_antigen": -1})

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ConfigError):
            new_compartment({"max_antigens": 10})

    def test_cell_population_is_bounded(self):
        tissue = TissueParams(max_cells=1)
        compartment = new_compartment(tissue)
        compartment.add_cell(new_cell(type1_params(), tissue))
        with pytest.raises(ConfigError, match="max_cells"):
            compartment.add_cell(new_cell(type1_params(), tissue))


class TestNewCell:
    """Tests for new_cell."""

    def test_repertoire_sizes(self):
        params = type1_params(num_cytokines=1, num_response_producers=1, num_vr_receptors=3)
        cell = new_cell(params, TissueParams(), vr_locks=[1, 2, 3])
        assert cell.antigen_store == [None] * 4
        assert len(cell.antigen_producers) == 2
        assert [vr.lock for vr in cell.vr_receptors] == [1, 2, 3]
        assert cell.internal_cytokines == [0]
        assert all(p.action_time == 10 for p in cell.antigen_producers)

    def test_cytokine_receptor_out_of_range(self):
        params = type1_params(num_cytokine_receptors=1)
        with pytest.raises(SignalRangeError) as exc_info:
            new_cell(params, TissueParams(max_cytokines=0), cytokine_receptor_ids=[0])
        assert exc_info.value.signal_id == 0

    def test_specificity_length_checked(self):
        params = type1_params(num_vr_receptors=2)
        with pytest.raises(ConfigError, match="VR receptors"):
            new_cell(params, TissueParams(), vr_locks=[1])


class TestInvariantChecks:
    """Tests for validate_compartment and antigen_census."""

    def test_detects_counter_drift(self):
        compartment = new_compartment({"max_antigen": 3})
        compartment.antigen_store[0] = 7
        violations = validate_compartment(compartment)
        assert any("occupancy" in v for v in violations)

    def test_detects_countdown_without_display(self):
        tissue = TissueParams()
        compartment = new_compartment(tissue)
        cell = new_cell(type1_params(), tissue)
        cell.antigen_producers[0].remaining = 3
        compartment.add_cell(cell)
        assert any("nothing displayed" in v for v in validate_compartment(compartment))

    def test_census_counts_every_location(self):
        tissue = TissueParams(max_antigen=4)
        compartment = new_compartment(tissue)
        compartment.antigen_store[:2] = [5, 6]
        compartment.occupancy = 2
        cell = new_cell(type1_params(), tissue)
        cell.antigen_store[0] = 5
        cell.stored = 1
        cell.antigen_producers[0].displayed = 6
        cell.antigen_producers[0].remaining = 2
        compartment.add_cell(cell)
        assert antigen_census(compartment) == {5: 2, 6: 2}
        assert validate_compartment(compartment) == []


class TestSnapshot:
    """Tests for read-only snapshots."""

    def test_snapshot_is_detached(self):
        tissue = TissueParams(max_antigen=2)
        compartment = new_compartment(tissue)
        compartment.add_cell(new_cell(type1_params(), tissue))
        view = snapshot(compartment, 1_000_000)
        compartment.antigen_store[0] = 9
        compartment.cells[0].antigen_store[0] = 9
        assert view.antigen_store == (None, None)
        assert view.cells[0].antigen_store == (None,) * 4
        assert view.t_us == 1_000_000
