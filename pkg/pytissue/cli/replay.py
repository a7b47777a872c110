"""CLI command for the replay client."""

import click

from pytissue.cli.common import _get_console, display_run_summary, fail, graceful_shutdown, setup_logging


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}


@click.command(context_settings=CONTEXT_SETTINGS)
@click.option("-l", "--log", "log", required=True, type=click.Path(exists=True, dir_okay=False), help="Replay log to play")
@click.option("-s", "--server", "endpoint", default="127.0.0.1:7777", show_default=True, help="Server HOST:PORT")
@click.option("-r", "--rate", default=1.0, show_default=True, help="Replay speed (2.0 plays twice as fast)")
@click.option("--delay", default=0.0, show_default=True, help="Seconds to wait before replaying")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
def replay(log: str, endpoint: str, rate: float, delay: float, verbose: bool):
    """Play a replay log to a running server.

    Syscalls are sent on an antigen connection and CPU samples on a signal
    connection, each at its recorded time divided by the rate.

    \b
    Examples:
        tissue replay --log data/normal1.log
        tissue replay --log data/success1.log --rate 10 --server 127.0.0.1:7777
        tissue replay --log data/normal1.log --delay 10
    """
    from pytissue.errors import TissueError
    from pytissue.replay.logfile import read_log
    from pytissue.replay.player import replay_to_server

    setup_logging(verbose)
    console = _get_console()
    if rate <= 0:
        fail(console, f"rate must be positive, got {rate}")

    try:
        replay_log = read_log(log)
        with graceful_shutdown(console, "Stopping replay...") as stop:
            if delay > 0 and stop.wait(delay):
                raise SystemExit(1)
            sent = replay_to_server(replay_log.events, rate, endpoint, stop)
    except TissueError as e:
        fail(console, "Replay failed", e)

    display_run_summary(
        {
            "events_sent": sent,
            "log_duration": f"{replay_log.duration_us / 1_000_000:.1f}s",
            "rate": rate,
        },
        console,
        title="Replay Summary",
    )
