"""Tests for experiment plans and the experiment runner.

Tests marked slow replay whole datasets through the full tissue many times.
"""

import time
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pytissue.errors import PlanError, RunFatalError
from pytissue.harness.experiment import run_experiment, run_once, run_signal_comparison
from pytissue.harness.plan import ExperimentPlan, RunMode, load_dataset
from pytissue.harness.policy import policy_from_responses
from pytissue.models.records import DatasetGroup, DatasetLabel
from pytissue.replay.logfile import write_labels, write_log
from pytissue.replay.synth import SynthSpec, Window, generate_synthetic

from tests.conftest import antigen_events, desk_config, make_config, spread_spec, tiny_config


REPO_ROOT = Path(__file__).resolve().parent.parent


def write_dataset(path: Path, spec, seed: int = 1) -> Path:
    events, label = generate_synthetic(spec, seed)
    write_log(path, events, {"group": label.group.value, "seed": seed})
    write_labels(path, label)
    return path


def plan_text(config_path: Path, *lines: str) -> str:
    return "\n".join([f"config={config_path}", *lines]) + "\n"


class TestExperimentPlan:
    """Tests for plan parsing."""

    def test_loads(self, tmp_path):
        plan = ExperimentPlan.loads(
            "# comment\n"
            "name=trial\n"
            "config=twocell.conf\n"
            "config.grace_period=2000000\n"
            "train=preset:normal@1\n"
            "train=preset:normal@2\n"
            "evaluate=data/success.log\n"
            "repeats=3\n"
            "seed=7\n"
            "mode=accelerated\n"
            "rate=5\n",
            base_dir=tmp_path,
        )
        assert plan.name == "trial"
        assert plan.train == ["preset:normal@1", "preset:normal@2"]
        assert plan.evaluate == ["data/success.log"]
        assert plan.overrides == {"grace_period": "2000000"}
        assert (plan.repeats, plan.seed, plan.rate) == (3, 7, 5.0)
        assert plan.mode is RunMode.ACCELERATED
        assert plan.arm_repeats == 3

    @pytest.mark.parametrize(
        "text, message",
        [
            ("train\n", "expected key=value"),
            ("train=preset:normal@1\nseed=1\nseed=2\n", "duplicate"),
            ("train=preset:normal@1\ncolour=blue\n", "unknown key"),
            ("train=preset:normal@1\nbase_dir=/tmp\n", "unknown key"),
            ("repeats=3\n", "invalid plan"),
            ("train=preset:normal@1\nrepeats=0\n", "invalid plan"),
            ("train=preset:normal@1\nmode=realtime\nrate=4\n", "invalid plan"),
        ],
    )
    def test_bad_plans(self, text: str, message: str):
        with pytest.raises(PlanError, match=message):
            ExperimentPlan.loads(text)

    def test_missing_plan_file(self, tmp_path):
        with pytest.raises(PlanError, match="not found"):
            ExperimentPlan.load(tmp_path / "none.plan")

    def test_overrides_apply_on_top_of_config(self, tmp_path):
        config_path = tmp_path / "desk.conf"
        desk_config().save(config_path)
        plan = ExperimentPlan.loads(
            plan_text(config_path, "config.max_cytokines=1", "train=preset:normal@1")
        )
        config = plan.resolve_config()
        assert config.max_cytokines == 1
        assert config.cell_lifespan_2 == 10

    def test_shipped_plans_resolve(self):
        for path in sorted((REPO_ROOT / "plans").glob("*.plan")):
            plan = ExperimentPlan.load(path)
            config = plan.resolve_config()
            if path.name == "trace.plan":
                assert (config.cell_lifespan_2, config.vr_lock_max) == (100, 340)
            else:
                assert (config.cell_lifespan_2, config.vr_lock_max) == (10, 16383), path.name


class TestLoadDataset:
    """Tests for dataset references."""

    def test_preset(self):
        dataset = load_dataset("preset:failure@3")
        assert dataset.name == "failure@3"
        assert dataset.label.group is DatasetGroup.FAILURE
        assert dataset.events == load_dataset("preset:failure@3").events

    def test_log_with_labels(self, tmp_path):
        write_dataset(tmp_path / "spread.log", spread_spec(duration_s=1.0))
        dataset = load_dataset("spread.log", base_dir=tmp_path)
        assert dataset.name == "spread"
        assert dataset.label.group is DatasetGroup.NORMAL
        assert dataset.syscalls <= set(range(100, 120))

    def test_log_without_labels_uses_group_metadata(self, tmp_path):
        events, _ = generate_synthetic(spread_spec(duration_s=1.0), 1)
        write_log(tmp_path / "bare.log", events, {"group": "success"})
        assert load_dataset(str(tmp_path / "bare.log")).label == DatasetLabel(DatasetGroup.SUCCESS)

    @pytest.mark.parametrize("ref", ["preset:normal@x", "preset:heist@1", "missing.log"])
    def test_bad_references(self, tmp_path, ref: str):
        with pytest.raises(PlanError):
            load_dataset(ref, base_dir=tmp_path)


class TestPolicyContainment:
    """A generated policy never permits a syscall the dataset lacks."""

    @settings(max_examples=100, deadline=None)
    @given(
        calls=st.lists(
            st.tuples(st.integers(0, 2_000_000), st.integers(0, 20)),
            max_size=40,
        ),
        seed=st.integers(0, 2**16),
    )
    def test_policy_within_dataset(self, calls, seed):
        transcript = run_once(tiny_config(cell_lifespan_2=3), antigen_events(sorted(calls)), seed)
        policy = policy_from_responses(transcript.responses)
        assert policy.permitted <= {value for _, value in calls}


class TestExperimentOutputs:
    """Tests for run_experiment bookkeeping on a small tissue."""

    def _plan(self, tmp_path: Path, *lines: str) -> ExperimentPlan:
        config_path = tmp_path / "tiny.conf"
        tiny_config(vr_lock_max=127).save(config_path)
        spec = SynthSpec(
            duration_s=2,
            counts={100: 40, 101: 10, 102: 2},
            bursts=[Window(start_s=0, duration_s=2)],
            cpu_period_s=0.5,
        )
        write_dataset(tmp_path / "train.log", spec)
        write_dataset(tmp_path / "eval.log", spec, seed=2)
        return ExperimentPlan.loads(plan_text(config_path, *lines), base_dir=tmp_path)

    def test_outputs_written(self, tmp_path):
        plan = self._plan(tmp_path, "train=train.log", "evaluate=eval.log", "repeats=3", "seed=5")
        seen = []
        report = run_experiment(plan, tmp_path / "out", on_run=seen.append)

        assert [r.seed for r in report.runs] == [5, 6, 7]
        assert [r.run_id for r in seen] == ["train-00", "train-01", "train-02"]
        assert report.union.permitted == set().union(*(r.policy.permitted for r in report.runs))
        assert report.naive.permitted <= {100, 101, 102}
        assert [name for name, _ in report.evaluations] == ["naive", "twocell", "twocell-union"]

        out = tmp_path / "out"
        for name in ["runs.csv", "policy.txt", "stats.csv", "eval.csv", "rates.csv", "repertoire.csv"]:
            assert name in report.files
            assert (out / name).exists()
        assert len((out / "runs.csv").read_text().splitlines()) == 4
        assert (out / "policy.txt").read_text().endswith("default deny\n")
        assert (out / "runs" / "train-00" / "responses.csv").exists()

    def test_interrupt_writes_partial_report(self, tmp_path):
        plan = self._plan(tmp_path, "train=train.log", "repeats=5")
        finished = []
        with pytest.raises(RunFatalError, match="interrupted"):
            run_experiment(plan, tmp_path / "out", on_run=finished.append, stop=lambda: len(finished) >= 2)
        assert len((tmp_path / "out" / "runs.csv").read_text().splitlines()) == 3
        assert not (tmp_path / "out" / "policy.txt").exists()

    def test_signal_comparison_outputs(self, tmp_path):
        plan = self._plan(tmp_path, "signal_arm=train.log", "signal_repeats=2", "config.max_cytokines=1")
        report = run_experiment(plan, tmp_path / "out")
        assert report.runs == []
        (comparison,) = report.comparisons
        assert comparison.fixed_action_time >= 1
        assert (comparison.signal.runs, comparison.fixed.runs) == (2, 2)
        rows = (tmp_path / "out" / "signal.csv").read_text().splitlines()
        assert len(rows) == 3
        assert rows[0].endswith("burst_end_s")


@pytest.fixture(scope="module")
def selectivity_report(tmp_path_factory):
    base = tmp_path_factory.mktemp("selectivity")
    config_path = base / "desk.conf"
    desk_config().save(config_path)
    write_dataset(base / "spread.log", spread_spec(duration_s=10.0), seed=11)
    plan = ExperimentPlan.loads(plan_text(config_path, "train=spread.log", "repeats=20", "seed=42"), base_dir=base)
    return run_experiment(plan, base / "out")


@pytest.fixture(scope="module")
def policy_report(tmp_path_factory):
    base = tmp_path_factory.mktemp("policy")
    config_path = base / "desk.conf"
    desk_config().save(config_path)
    plan = ExperimentPlan.loads(
        plan_text(
            config_path,
            "train=preset:normal@1",
            "train=preset:normal@2",
            "train=preset:normal@3",
            "evaluate=preset:success@11",
            "evaluate=preset:success@12",
            "evaluate=preset:failure@21",
            "evaluate=preset:failure@22",
            "repeats=1",
            "seed=42",
        )
    )
    return run_experiment(plan, base / "out")


def rows_for(report, policy: str, group: str):
    return [row for name, row in report.evaluations if name == policy and row.dataset.startswith(group)]


@pytest.mark.slow
class TestFrequencySelectivity:
    """Frequent syscalls make it into policies more often than rare ones."""

    def test_inclusion_tracks_frequency(self, selectivity_report):
        assert selectivity_report.selectivity() >= 0.7

    def test_rare_syscalls_vary_more(self, selectivity_report):
        low, high = selectivity_report.cv_medians()
        assert low > high

    def test_most_frequent_syscall_usually_included(self, selectivity_report):
        top = max(selectivity_report.stats.rows, key=lambda row: row.freq)
        assert selectivity_report.inclusion_counts()[top.syscall] >= 10


@pytest.mark.slow
class TestPolicyEvaluation:
    """Naive and twocell policies on attack datasets."""

    def test_naive_permits_successful_attacks(self, policy_report):
        for row in rows_for(policy_report, "naive", "success"):
            assert row.permit_pct > 85, row

    def test_twocell_denies_successful_attacks(self, policy_report):
        for row in rows_for(policy_report, "twocell", "success"):
            assert row.deny_pct >= 40, row

    def test_twocell_permits_failed_attacks(self, policy_report):
        for row in rows_for(policy_report, "twocell", "failure"):
            assert row.permit_pct > row.deny_pct, row

    def test_responses_track_input(self, policy_report):
        assert 0 <= policy_report.tracking_lag_s <= 5
        first = policy_report.runs[0]
        dataset = load_dataset("preset:normal@1")
        last_arrival = max(e.t_us for e in dataset.events if e.is_antigen)
        assert first.response_times
        assert max(first.response_times) <= last_arrival + 60_000_000


@pytest.mark.slow
class TestSignalComparison:
    """CPU-driven action times against the fixed mean action time."""

    def test_signal_arm_bursts_are_sharper(self):
        comparison = run_signal_comparison(
            desk_config(max_cytokines=1), load_dataset("preset:success@7"), repeats=20, seed=42
        )
        assert comparison.fixed_action_time == max(1, round(comparison.mean_action_time))
        assert comparison.signal.burst_duration_s < comparison.fixed.burst_duration_s
        assert comparison.signal.time_to_peak_s < comparison.fixed.time_to_peak_s
        assert comparison.sharper


@pytest.mark.slow
class TestAcceleratedRun:
    """A served run at 100x over a 60 s log."""

    def test_full_run_fits_wall_budget(self):
        config = make_config()
        events = load_dataset("preset:normal@1").events
        started = time.monotonic()
        transcript = run_once(config, events, 42, mode=RunMode.ACCELERATED, rate=100.0)
        elapsed = time.monotonic() - started

        assert elapsed < 10
        expected = (config.replay_delay + events[-1].t_us + config.grace_period) // config.cell_update_rate
        assert transcript.ticks >= expected
