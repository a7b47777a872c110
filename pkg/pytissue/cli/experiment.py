"""CLI command for running experiment plans."""

import click

from pytissue.cli.common import (
    _get_console,
    display_evaluation,
    display_policy_stats,
    display_run_summary,
    fail,
    graceful_shutdown,
    setup_logging,
)


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}


@click.command(context_settings=CONTEXT_SETTINGS)
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True), help="Experiment plan file")
@click.option("-o", "--out", "out_dir", required=True, type=click.Path(), help="Output directory")
@click.option("--repeats", type=int, help="Override the plan's repeat count")
@click.option("--seed", type=int, help="Override the plan's base seed")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
def experiment(plan_path: str, out_dir: str, repeats: int | None, seed: int | None, verbose: bool):
    """Run an experiment plan.

    Trains policies over repeated runs, evaluates them against labeled
    datasets and runs the signal-vs-fixed action time comparisons. Exits
    non-zero if any run fails; finished results are still written.

    \b
    Examples:
        tissue experiment --plan plans/policy.plan --out results/policy
        tissue experiment --plan plans/signal.plan --out results/signal --repeats 5
    """
    from pytissue.errors import TissueError
    from pytissue.harness.experiment import run_experiment
    from pytissue.harness.plan import ExperimentPlan

    setup_logging(verbose)
    console = _get_console()

    try:
        plan = ExperimentPlan.load(plan_path)
        updates = {k: v for k, v in (("repeats", repeats), ("seed", seed)) if v is not None}
        if updates:
            plan = ExperimentPlan.model_validate({**plan.model_dump(), **updates})

        with graceful_shutdown(console, "Stopping after the current run...") as stop:
            def progress(result) -> None:
                console.print(
                    f"  [dim]{result.run_id}[/dim] seed {result.seed}: "
                    f"{len(result.transcript.responses)} responses, {len(result.policy.permitted)} syscalls permitted"
                )

            report = run_experiment(plan, out_dir, on_run=progress, stop=stop.is_set)
    except TissueError as e:
        fail(console, "Experiment failed", e)

    if report.stats is not None:
        display_policy_stats(report.stats, console, included=dict(report.inclusion_counts()))
    if report.evaluations:
        display_evaluation(report.evaluations, console)
    for comparison in report.comparisons:
        display_run_summary(
            {
                "mean_action_time": f"{comparison.mean_action_time:.2f}",
                "fixed_action_time": comparison.fixed_action_time,
                "signal_burst": f"{comparison.signal.burst_duration_s:.1f}s",
                "fixed_burst": f"{comparison.fixed.burst_duration_s:.1f}s",
                "signal_time_to_peak": f"{comparison.signal.time_to_peak_s:.1f}s",
                "fixed_time_to_peak": f"{comparison.fixed.time_to_peak_s:.1f}s",
            },
            console,
            title=f"Signal comparison: {comparison.dataset}",
        )

    summary = {"runs": len(report.runs), "output": out_dir}
    if report.union is not None:
        summary["union_policy"] = f"{len(report.union.permitted)} of {len(report.naive.permitted)} syscalls"
        summary["frequency_selectivity"] = f"{report.selectivity():.2f}"
        summary["tracking_lag"] = f"{report.tracking_lag_s}s"
    display_run_summary(summary, console, title="Experiment Summary")
