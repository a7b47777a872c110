"""Tests for receptor and producer mechanics, including Monte-Carlo oracles."""

import numpy as np
import pytest
from scipy import stats

from pytissue.engine.cellkit import (
    antigen_producer_step,
    antigen_receptor_step,
    cell_receptor_step,
    cytokine_producer_step,
    cytokine_receptor_step,
    response_producer_step,
    vr_receptor_step,
)
from pytissue.engine.clock import RunClock, make_rng
from pytissue.engine.sinks import ResponseBuffer
from pytissue.errors import RunFatalError
from pytissue.models.params import CellTypeParams, TissueParams
from pytissue.models.tissue import new_cell, new_compartment, validate_compartment


def presenter(tissue: TissueParams, **overrides):
    values = dict(type_id=1, num_antigen=10, num_antigen_receptors=1, num_antigen_producers=2)
    values.update(overrides)
    return new_cell(CellTypeParams(**values), tissue)


def matcher_cell(tissue: TissueParams, locks, receptors: int = 1):
    params = CellTypeParams(
        type_id=2,
        num_cell_receptors=receptors,
        num_vr_receptors=len(locks),
        num_response_producers=1,
    )
    return new_cell(params, tissue, cell_receptor_targets=[1] * receptors, vr_locks=locks)


class TestAntigenReceptors:
    """Tests for antigen_receptor_step."""

    @pytest.mark.parametrize("occupancy", [10, 100, 500])
    def test_transfer_probability_matches_occupancy(self, occupancy: int):
        """A single receptor transfers with probability occupancy / max_antigen."""
        tissue = TissueParams(max_antigen=1000)
        compartment = new_compartment(tissue)
        # each antigen value is its own slot index, so a transfer can be undone
        for slot in range(occupancy):
            compartment.antigen_store[slot] = slot
        compartment.occupancy = occupancy
        cell = presenter(tissue, num_antigen=1)
        rng = make_rng(occupancy)

        trials = 100_000
        transfers = 0
        for _ in range(trials):
            if antigen_receptor_step(cell, compartment, rng):
                transfers += 1
                value = cell.antigen_store[0]
                compartment.antigen_store[value] = value
                compartment.occupancy += 1
                cell.antigen_store[0] = None
                cell.stored = 0

        low, high = stats.binom.interval(0.9973, trials, occupancy / 1000)
        assert low <= transfers <= high

    def test_moves_antigen_and_keeps_counters(self):
        tissue = TissueParams(max_antigen=1)
        compartment = new_compartment(tissue)
        compartment.antigen_store[0] = 42
        compartment.occupancy = 1
        cell = presenter(tissue, num_antigen=3)
        compartment.add_cell(cell)

        assert antigen_receptor_step(cell, compartment, make_rng(1)) == 1
        assert compartment.antigen_store == [None]
        assert cell.stored == 1
        assert 42 in cell.antigen_store
        assert validate_compartment(compartment) == []

    def test_empty_tissue_transfers_nothing(self):
        tissue = TissueParams(max_antigen=10)
        compartment = new_compartment(tissue)
        cell = presenter(tissue, num_antigen_receptors=5)
        assert antigen_receptor_step(cell, compartment, make_rng(0)) == 0

    def test_zero_capacity_store_transfers_nothing(self):
        tissue = TissueParams(max_antigen=1)
        compartment = new_compartment(tissue)
        compartment.antigen_store[0] = 3
        compartment.occupancy = 1
        cell = presenter(tissue, num_antigen=0)
        assert antigen_receptor_step(cell, compartment, make_rng(0)) == 0
        assert compartment.occupancy == 1


class TestCellReceptors:
    """Tests for cell_receptor_step."""

    def test_binding_probability_matches_population(self):
        """A receptor binds with probability (target cells) / max_cells."""
        tissue = TissueParams(max_cells=10)
        compartment = new_compartment(tissue)
        for _ in range(4):
            compartment.add_cell(presenter(tissue))
        cell = matcher_cell(tissue, [1])
        compartment.add_cell(cell)
        rng = make_rng(7)

        trials = 20_000
        bound = 0
        for _ in range(trials):
            cell_receptor_step(cell, compartment, rng)
            if cell.is_bound:
                bound += 1
                assert compartment.cells[cell.cell_receptors[0].bound].type_id == 1

        low, high = stats.binom.interval(0.9973, trials, 4 / 10)
        assert low <= bound <= high

    def test_unbound_cell_deactivates_vr_receptors(self):
        tissue = TissueParams(max_cells=5)
        compartment = new_compartment(tissue)
        cell = matcher_cell(tissue, [1, 2])
        compartment.add_cell(cell)
        cell.vr_receptors[0].active = True
        cell_receptor_step(cell, compartment, make_rng(0))
        assert not cell.is_bound
        assert not any(vr.active for vr in cell.vr_receptors)


class TestVRReceptors:
    """Tests for vr_receptor_step."""

    def _bound_pair(self, displayed, locks):
        tissue = TissueParams(max_cells=2)
        compartment = new_compartment(tissue)
        type1 = presenter(tissue, num_antigen_producers=len(displayed))
        for producer, value in zip(type1.antigen_producers, displayed):
            producer.displayed = value
            producer.remaining = 5
        compartment.add_cell(type1)
        type2 = matcher_cell(tissue, locks)
        compartment.add_cell(type2)
        type2.cell_receptors[0].bound = type1.index
        return compartment, type2

    def test_match_per_displayed_copy(self):
        compartment, cell = self._bound_pair([5, 6, 5], [5, 9])
        matches = vr_receptor_step(cell, compartment)
        assert matches == [(0, 5), (0, 5)]
        assert cell.vr_receptors[0].active
        assert not cell.vr_receptors[1].active

    def test_doubly_bound_cell_matched_once(self):
        tissue = TissueParams(max_cells=2)
        compartment = new_compartment(tissue)
        type1 = presenter(tissue, num_antigen_producers=2)
        for producer, value in zip(type1.antigen_producers, [5, 6]):
            producer.displayed = value
            producer.remaining = 5
        compartment.add_cell(type1)
        type2 = matcher_cell(tissue, [5, 6], receptors=2)
        compartment.add_cell(type2)
        for receptor in type2.cell_receptors:
            receptor.bound = type1.index
        assert vr_receptor_step(type2, compartment) == [(0, 5), (1, 6)]

    def test_custom_matcher(self):
        compartment, cell = self._bound_pair([7], [6])
        matches = vr_receptor_step(cell, compartment, lambda lock, key: abs(lock - key) <= 1)
        assert matches == [(0, 7)]

    def test_no_display_no_match(self):
        compartment, cell = self._bound_pair([], [5])
        assert vr_receptor_step(cell, compartment) == []


class TestProducers:
    """Tests for antigen, cytokine and response producers."""

    def test_presentation_lasts_action_time(self):
        tissue = TissueParams()
        cell = presenter(tissue, num_antigen_producers=1, antigen_producer_action_time=3)
        cell.antigen_store[0] = 11
        cell.stored = 1
        rng = make_rng(0)

        assert antigen_producer_step(cell, rng) == (1, 3)
        shown = []
        for _ in range(4):
            antigen_producer_step(cell, rng)
            shown.append(cell.antigen_producers[0].displayed)
        # displayed for the presenting cycle plus two more, then cleared
        assert shown == [11, 11, None, None]
        assert cell.stored == 0

    def test_display_not_replaced_while_counting(self):
        tissue = TissueParams()
        cell = presenter(tissue, num_antigen_producers=1, antigen_producer_action_time=5)
        cell.antigen_store[:2] = [1, 2]
        cell.stored = 2
        rng = make_rng(3)
        antigen_producer_step(cell, rng)
        first = cell.antigen_producers[0].displayed
        for _ in range(4):
            antigen_producer_step(cell, rng)
            assert cell.antigen_producers[0].displayed == first
        antigen_producer_step(cell, rng)
        assert cell.antigen_producers[0].displayed not in (None, first)

    def test_presentation_picks_are_uniform(self):
        """Each stored antigen is equally likely to be presented."""
        tissue = TissueParams()
        rng = make_rng(11)
        picks = []
        for _ in range(6000):
            cell = presenter(tissue, num_antigen=3, num_antigen_producers=1)
            cell.antigen_store[:] = [0, 1, 2]
            cell.stored = 3
            antigen_producer_step(cell, rng)
            picks.append(cell.antigen_producers[0].displayed)
        counts = np.bincount(picks, minlength=3)
        assert stats.chisquare(counts).pvalue > 0.001

    def test_cytokine_round_trip(self):
        tissue = TissueParams(max_cytokines=2)
        compartment = new_compartment(tissue)
        params = CellTypeParams(type_id=1, num_cytokine_receptors=1, num_cytokine_producers=1)
        cell = new_cell(params, tissue, cytokine_receptor_ids=[1], cytokine_producer_ids=[1])
        cell.cytokine_producers[0].level = 0.75
        cytokine_producer_step(cell, compartment)
        cytokine_receptor_step(cell, compartment)
        assert compartment.signals == [0.0, 0.75]
        assert cell.cytokine_receptors[0].level == 0.75

    def test_responses_stamped_with_run_time(self):
        tissue = TissueParams()
        cell = matcher_cell(tissue, [5])
        clock = RunClock.deterministic(100_000)
        clock.start()
        clock.tick()
        buffer = ResponseBuffer()
        assert response_producer_step(cell, [(0, 5), (0, 5)], buffer, clock) == 2
        assert [(r.t_us, r.antigen, r.cell_type) for r in buffer.records] == [(100_000, 5, 2)] * 2

    def test_failing_sink_is_fatal(self):
        class BrokenSink:
            def write(self, record):
                raise OSError("disk full")

        cell = matcher_cell(TissueParams(), [5])
        clock = RunClock.deterministic()
        with pytest.raises(RunFatalError, match="disk full"):
            response_producer_step(cell, [(0, 5)], BrokenSink(), clock)
