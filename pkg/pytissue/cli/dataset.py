"""CLI commands for building replay logs: from traces, or synthetic."""

from pathlib import Path

import click

from pytissue.cli.common import _get_console, display_run_summary, fail, setup_logging


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}


@click.command(context_settings=CONTEXT_SETTINGS)
@click.option("--strace", "strace_path", required=True, type=click.Path(exists=True), help="strace -tt/-ttt log")
@click.option("--procmon", "procmon_path", type=click.Path(exists=True), help="Process-monitor log (CPU samples)")
@click.option("-o", "--out", required=True, type=click.Path(), help="Replay log to write")
@click.option("--signal-id", default=0, show_default=True, help="Signal id for the CPU samples")
@click.option(
    "--group",
    type=click.Choice(["normal", "success", "failure"]),
    help="Write a labels sidecar for this group",
)
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
def ingest(
    strace_path: str,
    procmon_path: str | None,
    out: str,
    signal_id: int,
    group: str | None,
    verbose: bool,
):
    """Parse an strace log (and optionally a process-monitor log) into a replay log.

    Both logs are rebased to the earlier of their first timestamps.

    \b
    Examples:
        tissue ingest --strace ftpd.strace --out data/normal1.log
        tissue ingest --strace ftpd.strace --procmon ftpd.cpu --out data/normal1.log --group normal
    """
    from pytissue.errors import TissueError
    from pytissue.models.records import DatasetGroup, DatasetLabel
    from pytissue.replay.logfile import merge_logs, write_labels, write_log
    from pytissue.replay.traces import first_timestamp, parse_process_monitor, parse_strace

    setup_logging(verbose)
    console = _get_console()
    try:
        strace_text = Path(strace_path).read_text()
        procmon_text = Path(procmon_path).read_text() if procmon_path else ""
        starts = [ts for ts in (first_timestamp(strace_text), first_timestamp(procmon_text)) if ts is not None]
        origin = min(starts) if starts else None

        syscalls = parse_strace(strace_text, origin)
        samples = parse_process_monitor(procmon_text, origin) if procmon_path else []
        events = merge_logs(syscalls, samples, signal_id=signal_id)

        metadata = {"source": Path(strace_path).name}
        if group:
            metadata["group"] = group
        write_log(out, events, metadata)
        if group:
            write_labels(out, DatasetLabel(DatasetGroup(group)))
    except (TissueError, OSError) as e:
        fail(console, "Ingest failed", e)

    display_run_summary(
        {"syscalls": len(syscalls), "cpu_samples": len(samples), "replay_log": out},
        console,
        title="Ingest Summary",
    )


@click.command(context_settings=CONTEXT_SETTINGS)
@click.option("-p", "--preset", "preset_name", type=click.Choice(["normal", "success", "failure"]), help="Built-in dataset shape")
@click.option("--spec", "spec_path", type=click.Path(exists=True), help="JSON synthetic dataset spec")
@click.option("--seed", default=0, show_default=True, help="Generator seed")
@click.option("-o", "--out", required=True, type=click.Path(), help="Replay log to write (labels go next to it)")
@click.option("--save-spec", type=click.Path(), help="Also write the spec that was used as JSON")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
def synth(preset_name: str | None, spec_path: str | None, seed: int, out: str, save_spec: str | None, verbose: bool):
    """Generate a labeled synthetic dataset.

    \b
    Examples:
        tissue synth --preset normal --seed 1 --out data/normal1.log
        tissue synth --preset success --seed 7 --out data/success1.log
        tissue synth --spec my-spec.json --out data/custom.log
    """
    from pytissue.errors import TissueError
    from pytissue.replay.logfile import write_labels, write_log
    from pytissue.replay.synth import SynthSpec, generate_synthetic, preset

    setup_logging(verbose)
    console = _get_console()
    if bool(preset_name) == bool(spec_path):
        fail(console, "give exactly one of --preset and --spec")

    try:
        spec = preset(preset_name) if preset_name else SynthSpec.load(spec_path)
        events, label = generate_synthetic(spec, seed)
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        write_log(out, events, {"group": spec.group.value, "seed": seed, "generator": preset_name or Path(spec_path).name})
        labels = write_labels(out, label)
        if save_spec:
            spec.save(save_spec)
    except (TissueError, OSError) as e:
        fail(console, "Synthesis failed", e)

    syscalls = sum(1 for e in events if e.is_antigen)
    attacks = sum(label.attack_flags or [])
    display_run_summary(
        {
            "group": spec.group.value,
            "syscalls": syscalls,
            "attack_syscalls": f"{attacks} ({attacks * 100 // syscalls if syscalls else 0}%)",
            "cpu_samples": len(events) - syscalls,
            "replay_log": out,
            "labels": str(labels),
        },
        console,
        title="Synthetic Dataset",
    )
