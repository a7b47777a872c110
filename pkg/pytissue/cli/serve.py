"""CLI command for running a tissue server."""

from pathlib import Path

import click

from pytissue.cli.common import _get_console, display_run_summary, fail, graceful_shutdown, setup_logging


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}


@click.command(context_settings=CONTEXT_SETTINGS)
@click.option("-c", "--config", "config_path", type=click.Path(exists=True), help="Config file (key=value)")
@click.option("-l", "--listen", help="HOST:PORT to listen on (default from config)")
@click.option("-o", "--out", "out_dir", type=click.Path(), help="Directory for the run transcript")
@click.option("--seed", default=0, show_default=True, help="Seed of the run's random stream")
@click.option("--accelerate", type=float, help="Run this many times faster than realtime")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
def serve(
    config_path: str | None,
    listen: str | None,
    out_dir: str | None,
    seed: int,
    accelerate: float | None,
    verbose: bool,
):
    """Run a twocell tissue server.

    Antigen, signal and response clients connect over TCP. The server keeps
    running until interrupted, or until the grace period has passed after
    the last antigen or signal client left.

    \b
    Examples:
        tissue serve -c configs/twocell.conf -o runs/live
        tissue serve --listen 0.0.0.0:7777 --seed 42
        tissue serve -c configs/twocell.conf --accelerate 10
    """
    from pytissue.config import TissueConfig
    from pytissue.engine.clock import RunClock
    from pytissue.engine.server import run_server
    from pytissue.errors import TissueError

    setup_logging(verbose)
    console = _get_console()

    try:
        config = TissueConfig.load(config_path) if config_path else TissueConfig()
        if accelerate:
            clock = RunClock.accelerated(accelerate, config.cell_update_rate)
        else:
            clock = RunClock.realtime(config.cell_update_rate)

        def announce(address: tuple[str, int]) -> None:
            console.print(f"[green]Listening on[/green] {address[0]}:{address[1]}")

        with graceful_shutdown(console, "Stopping server...") as stop:
            transcript = run_server(
                config,
                listen=listen,
                clock=clock,
                seed=seed,
                out_dir=Path(out_dir) if out_dir else None,
                stop_event=stop,
                on_listening=announce,
            )
    except (TissueError, ValueError) as e:
        fail(console, "Server failed", e)

    display_run_summary(
        {
            "ticks": transcript.ticks,
            "responses": len(transcript.responses),
            "syscalls_responded_to": len(transcript.responded),
            "transcript": out_dir or "-",
        },
        console,
    )
