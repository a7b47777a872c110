"""Experiment runner: repeated twocell runs, policies, evaluation and the
signal-vs-fixed action time comparison.

Each run starts a fresh server on one dataset. In deterministic mode the
server replays the log itself; in realtime and accelerated modes it listens
on an ephemeral port and a replay client thread plays the log to it after
replay_delay. Runs are sequential.

Outputs (when an output directory is given):
    policy.txt      union policy over every training run
    stats.csv       per-syscall freq, mean, sd, cv
    eval.csv        naive, single-run and union policies on each evaluate dataset
    rates.csv       incoming antigen and response rates of the first run
    repertoire.csv  VR locks of every Type 2 cell of the first run, per probe sample
    runs.csv        one row per run
    signal.csv      both arms of each signal comparison
    runs/<id>/      per-run transcripts
"""

import logging
import math
import threading
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from pytissue.config import TissueConfig
from pytissue.engine.clock import RunClock
from pytissue.engine.server import TissueServer, run_server
from pytissue.engine.sinks import CsvSink
from pytissue.errors import RunFatalError, TissueError
from pytissue.harness.plan import Dataset, ExperimentPlan, RunMode
from pytissue.harness.policy import (
    aggregate_policies,
    evaluate_policy,
    naive_policy,
    policy_from_responses,
    write_policy,
)
from pytissue.harness.series import (
    burst_summary,
    lagged_cross_correlation,
    rank_correlation,
    rate_series,
    split_medians,
)
from pytissue.models.policy import EvaluationRow, Policy, PolicyStats
from pytissue.models.records import ReplayEvent, RunTranscript


logger = logging.getLogger(__name__)


# Realtime runs are cut off this long after they should have ended.
OVERRUN_US = 10_000_000

MAX_TRACKING_LAG_S = 10


# =============================================================================
# Single runs
# =============================================================================

def run_once(
    config: TissueConfig,
    events: Sequence[ReplayEvent],
    seed: int,
    *,
    mode: RunMode = RunMode.DETERMINISTIC,
    rate: float = 1.0,
    out_dir: Optional[Path] = None,
) -> RunTranscript:
    """One server run over one dataset.

    Raises:
        RunFatalError: If the run or its replay client fails
    """
    if mode is RunMode.DETERMINISTIC:
        return TissueServer(config, seed=seed, out_dir=out_dir).run_offline(events)
    return _run_served(config, events, seed, mode, rate, out_dir)


def _run_served(
    config: TissueConfig,
    events: Sequence[ReplayEvent],
    seed: int,
    mode: RunMode,
    rate: float,
    out_dir: Optional[Path],
) -> RunTranscript:
    from pytissue.replay.player import replay_to_server

    if mode is RunMode.REALTIME:
        clock = RunClock.realtime(config.cell_update_rate)
    else:
        clock = RunClock.accelerated(rate, config.cell_update_rate)
    stop = threading.Event()
    failures: list[TissueError] = []
    players: list[threading.Thread] = []

    def play(endpoint: str) -> None:
        if stop.wait(clock.wall_seconds(config.replay_delay)):
            return
        try:
            replay_to_server(events, clock.factor, endpoint, stop)
        except TissueError as e:
            failures.append(e)
            stop.set()

    def start_player(address: tuple[str, int]) -> None:
        player = threading.Thread(target=play, args=(f"{address[0]}:{address[1]}",), name="replay", daemon=True)
        player.start()
        players.append(player)

    last_us = events[-1].t_us if events else 0
    transcript = run_server(
        config,
        listen="127.0.0.1:0",
        clock=clock,
        seed=seed,
        out_dir=out_dir,
        stop_event=stop,
        on_listening=start_player,
        max_run_us=config.replay_delay + last_us + config.grace_period + OVERRUN_US,
    )
    stop.set()
    for player in players:
        player.join()
    if failures:
        raise RunFatalError(f"replay failed: {failures[0]}") from failures[0]
    return transcript


@dataclass
class RunResult:
    """One finished run."""
    run_id: str
    dataset: str
    seed: int
    transcript: RunTranscript
    policy: Policy

    @property
    def response_times(self) -> list[int]:
        return [r.t_us for r in self.transcript.responses]


def _run_dir(out_dir: Optional[Path], run_id: str) -> Optional[Path]:
    return out_dir / "runs" / run_id if out_dir is not None else None


# =============================================================================
# Signal comparison
# =============================================================================

@dataclass
class ArmSummary:
    """Averages over the runs of one arm.

    Burst figures average over runs that responded at all; nan when none did.
    """
    arm: str
    action_time: float
    runs: int
    responses: float
    burst_duration_s: float
    time_to_peak_s: float
    burst_end_s: float


@dataclass
class SignalComparison:
    """Signal-enabled arm against a fixed action time arm on one dataset."""
    dataset: str
    mean_action_time: float
    fixed_action_time: int
    signal: ArmSummary
    fixed: ArmSummary

    @property
    def sharper(self) -> bool:
        """Signal arm bursts are shorter and peak earlier."""
        return (
            self.signal.burst_duration_s < self.fixed.burst_duration_s
            and self.signal.time_to_peak_s < self.fixed.time_to_peak_s
        )


def _summarize_arm(arm: str, action_time: float, results: list[RunResult], origin_us: int) -> ArmSummary:
    bursts = [b for b in (burst_summary(r.response_times) for r in results) if b is not None]

    def mean(values: list[float]) -> float:
        return float(np.mean(values)) if values else math.nan

    return ArmSummary(
        arm=arm,
        action_time=action_time,
        runs=len(results),
        responses=mean([len(r.transcript.responses) for r in results]),
        burst_duration_s=mean([b.duration_us / 1_000_000 for b in bursts]),
        time_to_peak_s=mean([(b.peak_us - origin_us) / 1_000_000 for b in bursts]),
        burst_end_s=mean([(b.last_us - origin_us) / 1_000_000 for b in bursts]),
    )


def run_signal_comparison(
    config: TissueConfig,
    dataset: Dataset,
    repeats: int,
    seed: int = 0,
    *,
    mode: RunMode = RunMode.DETERMINISTIC,
    rate: float = 1.0,
    out_dir: Optional[Path] = None,
) -> SignalComparison:
    """Signal-enabled runs, then fixed runs at the rounded mean action time.

    Both arms use seeds seed .. seed + repeats - 1. Time to peak is measured
    from the start of replay.
    """
    signal_config = TissueConfig.from_dict(
        {
            **config.to_dict(),
            "signal_enabled": True,
            "max_cytokines": max(config.max_cytokines, config.signal_id + 1),
        }
    )
    signal_runs: list[RunResult] = []
    for i in range(repeats):
        run_id = f"signal-{dataset.name}-{i:02d}"
        transcript = run_once(
            signal_config, dataset.events, seed + i, mode=mode, rate=rate, out_dir=_run_dir(out_dir, run_id)
        )
        signal_runs.append(RunResult(run_id, dataset.name, seed + i, transcript, policy_from_responses(transcript.responses)))

    observed = [m for m in (r.transcript.mean_action_time() for r in signal_runs) if m is not None]
    if observed:
        mean_action_time = float(np.mean(observed))
    else:
        mean_action_time = float(config.antigen_producer_action_time)
        logger.warning(f"{dataset.name}: nothing was presented in the signal arm; using the configured action time")
    fixed_action_time = max(1, round(mean_action_time))
    logger.info(f"{dataset.name}: mean action time {mean_action_time:.2f}, fixed arm uses {fixed_action_time}")

    fixed_config = TissueConfig.from_dict(
        {**config.to_dict(), "signal_enabled": False, "antigen_producer_action_time": fixed_action_time}
    )
    fixed_runs: list[RunResult] = []
    for i in range(repeats):
        run_id = f"fixed-{dataset.name}-{i:02d}"
        transcript = run_once(
            fixed_config, dataset.events, seed + i, mode=mode, rate=rate, out_dir=_run_dir(out_dir, run_id)
        )
        fixed_runs.append(RunResult(run_id, dataset.name, seed + i, transcript, policy_from_responses(transcript.responses)))

    origin = config.replay_delay
    return SignalComparison(
        dataset=dataset.name,
        mean_action_time=mean_action_time,
        fixed_action_time=fixed_action_time,
        signal=_summarize_arm("signal", mean_action_time, signal_runs, origin),
        fixed=_summarize_arm("fixed", fixed_action_time, fixed_runs, origin),
    )


# =============================================================================
# Experiments
# =============================================================================

@dataclass
class ExperimentReport:
    """Everything an experiment produced."""
    plan: ExperimentPlan
    config: TissueConfig
    runs: list[RunResult] = field(default_factory=list)
    naive: Optional[Policy] = None
    union: Optional[Policy] = None
    stats: Optional[PolicyStats] = None
    evaluations: list[tuple[str, EvaluationRow]] = field(default_factory=list)
    rates: Optional[np.ndarray] = None
    tracking_lag_s: Optional[int] = None
    comparisons: list[SignalComparison] = field(default_factory=list)
    files: dict[str, str] = field(default_factory=dict)

    @property
    def single(self) -> Optional[Policy]:
        """The first run's policy."""
        return self.runs[0].policy if self.runs else None

    def inclusion_counts(self) -> Counter:
        """Number of runs whose policy permits each syscall."""
        counts: Counter = Counter()
        for run in self.runs:
            counts.update(run.policy.permitted)
        return counts

    def selectivity(self) -> float:
        """Rank correlation between dataset frequency and policy inclusion."""
        if self.stats is None:
            return 0.0
        included = self.inclusion_counts()
        return rank_correlation([r.freq for r in self.stats.rows], [included[r.syscall] for r in self.stats.rows])

    def cv_medians(self) -> tuple[float, float]:
        """Median cv of the lower-frequency and the higher-frequency half of syscalls."""
        if self.stats is None:
            return math.nan, math.nan
        return split_medians([r.freq for r in self.stats.rows], [r.cv for r in self.stats.rows])


def run_experiment(
    plan: ExperimentPlan,
    out_dir: Optional[str | Path] = None,
    *,
    on_run: Optional[Callable[[RunResult], None]] = None,
    stop: Optional[Callable[[], bool]] = None,
) -> ExperimentReport:
    """Run a plan and write its outputs.

    Training runs go first (every train dataset `repeats` times), then the
    signal comparisons. A failed run aborts the plan; whatever finished is
    still written.

    Raises:
        PlanError: If the plan's datasets cannot be loaded
        ConfigError: If the plan's config is invalid
        RunFatalError: If a run fails
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    config = plan.resolve_config()
    train = plan.load_datasets(plan.train)
    evaluate = plan.load_datasets(plan.evaluate)
    arms = plan.load_datasets(plan.signal_arm)
    report = ExperimentReport(plan=plan, config=config)
    logger.info(
        f"experiment {plan.name!r}: {len(train)} training datasets x {plan.repeats} runs, "
        f"{len(arms)} signal comparisons, {plan.mode.value} mode"
    )

    try:
        index = 0
        for dataset in train:
            for repeat in range(plan.repeats):
                if stop is not None and stop():
                    raise RunFatalError("experiment interrupted")
                seed = plan.seed + index
                run_id = f"{dataset.name}-{repeat:02d}"
                transcript = run_once(
                    config, dataset.events, seed, mode=plan.mode, rate=plan.rate, out_dir=_run_dir(out, run_id)
                )
                result = RunResult(run_id, dataset.name, seed, transcript, policy_from_responses(transcript.responses, index))
                report.runs.append(result)
                index += 1
                if on_run is not None:
                    on_run(result)

        if train:
            _summarize_training(report, config, train, evaluate)
        for dataset in arms:
            report.comparisons.append(
                run_signal_comparison(
                    config, dataset, plan.arm_repeats, plan.seed, mode=plan.mode, rate=plan.rate, out_dir=out
                )
            )
    except TissueError as e:
        logger.error(f"experiment aborted after {len(report.runs)} runs: {e}")
        raise
    finally:
        if out is not None:
            write_report(report, out)
    return report


def _summarize_training(
    report: ExperimentReport,
    config: TissueConfig,
    train: list[Dataset],
    evaluate: list[Dataset],
) -> None:
    training_events = [event for dataset in train for event in dataset.events]
    report.naive = naive_policy(dataset.events for dataset in train)
    report.union, report.stats = aggregate_policies(
        [run.policy for run in report.runs],
        [run.transcript.responses for run in report.runs],
        training_events,
    )
    for dataset in evaluate:
        for name, policy in (("naive", report.naive), ("twocell", report.single), ("twocell-union", report.union)):
            report.evaluations.append((name, evaluate_policy(policy, dataset.events, dataset.label, dataset.name)))

    first = report.runs[0]
    dataset = next(d for d in train if d.name == first.dataset)
    arrivals = [e.t_us + config.replay_delay for e in dataset.events if e.is_antigen]
    span = first.transcript.reports[-1].t_us if first.transcript.reports else 0
    antigen_rate = rate_series(arrivals, span_us=span)
    response_rate = rate_series(first.response_times, span_us=span)
    report.rates = np.column_stack([np.arange(len(antigen_rate)), antigen_rate, response_rate])
    report.tracking_lag_s = lagged_cross_correlation(antigen_rate, response_rate, MAX_TRACKING_LAG_S)
    logger.info(
        f"union policy permits {len(report.union.permitted)} of {len(report.naive.permitted)} syscalls; "
        f"selectivity {report.selectivity():.2f}"
    )


# =============================================================================
# Output
# =============================================================================

def _write_csv(report: ExperimentReport, out: Path, name: str, header: list[str], rows) -> None:
    sink = CsvSink(out / name, header)
    try:
        for row in rows:
            sink.write(row)
    finally:
        sink.close()
    report.files[name] = str(out / name)


def write_report(report: ExperimentReport, out: Path) -> None:
    """Write whatever the report holds so far."""
    _write_csv(
        report,
        out,
        "runs.csv",
        ["run", "dataset", "seed", "responses", "permitted", "mean_action_time"],
        (
            [
                r.run_id,
                r.dataset,
                r.seed,
                len(r.transcript.responses),
                len(r.policy.permitted),
                _fmt(r.transcript.mean_action_time()),
            ]
            for r in report.runs
        ),
    )
    if report.union is not None:
        write_policy(out / "policy.txt", report.union)
        report.files["policy.txt"] = str(out / "policy.txt")
    if report.stats is not None:
        _write_csv(
            report,
            out,
            "stats.csv",
            ["syscall", "name", "freq", "mean", "sd", "cv"],
            ([r.syscall, r.name, r.freq, f"{r.mean:.2f}", f"{r.sd:.2f}", _fmt(r.cv)] for r in report.stats.rows),
        )
    if report.evaluations:
        _write_csv(
            report,
            out,
            "eval.csv",
            ["policy", "dataset", "events", "normal_pct", "attack_pct", "permit_pct", "deny_pct"],
            (
                [name, e.dataset, e.events, e.normal_pct, e.attack_pct, e.permit_pct, e.deny_pct]
                for name, e in report.evaluations
            ),
        )
    if report.rates is not None:
        _write_csv(report, out, "rates.csv", ["t_s", "antigen_rate", "response_rate"], report.rates.tolist())
    if report.runs:
        rows = report.runs[0].transcript.probe_rows.get("vr_repertoire", [])
        _write_csv(report, out, "repertoire.csv", ["t_us", "cell", "locks"], rows)
    if report.comparisons:
        _write_csv(
            report,
            out,
            "signal.csv",
            ["dataset", "arm", "action_time", "runs", "responses", "burst_duration_s", "time_to_peak_s", "burst_end_s"],
            (
                [c.dataset, arm.arm, _fmt(arm.action_time), arm.runs, _fmt(arm.responses),
                 _fmt(arm.burst_duration_s), _fmt(arm.time_to_peak_s), _fmt(arm.burst_end_s)]
                for c in report.comparisons
                for arm in (c.signal, c.fixed)
            ),
        )


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, float):
        return f"{value:.2f}"
    return str(value)
