"""Shared fixtures and builders for the pytissue tests."""

import pytest

from pytissue.config import TissueConfig
from pytissue.models.records import ReplayEvent
from pytissue.replay.synth import SynthSpec, Window


# The sixteen table keys at their experiment values.
TABLE_CONFIG_TEXT = """\
max_antigen=1000
max_cytokines=0
max_cells=100
cell_update_rate=100000
antigen_multiplier=10
num_cells_1=50
num_antigen_1=100
num_antigen_receptors_1=10
num_antigen_producers_1=10
antigen_producer_action_time=10
num_cells_2=50
cell_lifespan_2=100
num_cell_receptors_2=2
num_vr_receptors_2=20
num_response_producers_2=1
probe_rate=1000000
"""

WIDE_LOCKS = 32767

# Short-lived repertoires over 2**14 locks: policy inclusion grows with
# syscall frequency.
SELECTIVE = {"cell_lifespan_2": 10, "vr_lock_max": 16383}


def make_config(**overrides) -> TissueConfig:
    return TissueConfig.from_dict({**TissueConfig().to_dict(), **overrides})


def desk_config(**overrides) -> TissueConfig:
    """Experiment values with the selective repertoire and short idle phases."""
    values = {**SELECTIVE, "replay_delay": 0, "grace_period": 10_000_000}
    values.update(overrides)
    return make_config(**values)


def tiny_config(**overrides) -> TissueConfig:
    """A small tissue for fast property tests."""
    values = {
        "max_antigen": 100,
        "max_cells": 10,
        "num_cells_1": 5,
        "num_antigen_1": 20,
        "num_antigen_receptors_1": 5,
        "num_antigen_producers_1": 3,
        "num_cells_2": 5,
        "num_vr_receptors_2": 5,
        "vr_lock_max": 20,
        "replay_delay": 0,
        "grace_period": 1_000_000,
    }
    values.update(overrides)
    return make_config(**values)


def antigen_events(pairs) -> list[ReplayEvent]:
    return [ReplayEvent.antigen_event(t_us, value) for t_us, value in pairs]


def spread_spec(duration_s: float = 10.0) -> SynthSpec:
    """20 syscalls whose expected counts span 2 to 500."""
    counts = [2, 3, 4, 6, 8, 11, 15, 20, 27, 36, 48, 64, 85, 110, 150, 200, 260, 330, 410, 500]
    return SynthSpec(
        duration_s=duration_s,
        counts={100 + i: count for i, count in enumerate(counts)},
        bursts=[Window(start_s=0, duration_s=duration_s)],
        cpu_period_s=0,
    )


@pytest.fixture
def table_config() -> TissueConfig:
    return TissueConfig.loads(TABLE_CONFIG_TEXT)
