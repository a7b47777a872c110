"""CLI command for the logging response client."""

import logging
from pathlib import Path

import click

from pytissue.cli.common import _get_console, fail, graceful_shutdown, setup_logging


logger = logging.getLogger(__name__)


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}


@click.command(context_settings=CONTEXT_SETTINGS)
@click.option("-s", "--server", "endpoint", default="127.0.0.1:7777", show_default=True, help="Server HOST:PORT")
@click.option("-o", "--out", type=click.Path(), help="Append t_us,antigen rows to this CSV")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
def watch(endpoint: str, out: str | None, verbose: bool):
    """Log every response a server makes.

    \b
    Examples:
        tissue watch
        tissue watch --server 127.0.0.1:7777 --out responses.csv
    """
    from pytissue.engine.sinks import CsvSink
    from pytissue.errors import TissueError
    from pytissue.protocol.client import TissueClient
    from pytissue.protocol.wire import ClientKind
    from pytissue.replay.syscalls import describe

    setup_logging(verbose)
    console = _get_console()
    handle = None
    sink = None
    count = 0
    try:
        if out:
            path = Path(out)
            fresh = not path.exists() or not path.stat().st_size
            handle = path.open("a", newline="")
            sink = CsvSink(handle, ["t_us", "antigen"] if fresh else [])
        with graceful_shutdown(console, "Disconnecting...") as stop:
            with TissueClient.connect(endpoint, ClientKind.RESPONSE) as client:
                console.print(f"[green]Watching[/green] {endpoint}")
                while not stop.is_set():
                    for message in client.responses(timeout=0.5):
                        count += 1
                        logger.info(f"response at {message.t_us}us: {describe(message.antigen)}")
                        if sink is not None:
                            sink.write([message.t_us, message.antigen])
                        if stop.is_set():
                            break
                    else:
                        if client.closed:
                            break
    except TissueError as e:
        fail(console, "Watch failed", e)
    finally:
        if handle is not None:
            handle.close()
    console.print(f"{count} responses")
