"""Common CLI utilities.

Provides shared functionality for:
- Logging through rich
- Run summaries and policy tables
- Signal handling for graceful shutdown
"""

from __future__ import annotations

import logging
import signal
import sys
import threading
from collections.abc import Iterable
from contextlib import contextmanager
from typing import TYPE_CHECKING, NoReturn

if TYPE_CHECKING:
    from rich.console import Console

    from pytissue.models.policy import EvaluationRow, PolicyStats


# =============================================================================
# Lazy Rich imports
# =============================================================================

def _get_console():
    """Lazy import of rich Console."""
    from rich.console import Console
    return Console()


def _get_table(*args, **kwargs):
    """Lazy import of rich Table."""
    from rich.table import Table
    return Table(*args, **kwargs)


# =============================================================================
# Logging and errors
# =============================================================================

def setup_logging(verbose: bool = False) -> None:
    """Send library logs through a RichHandler; DEBUG when verbose."""
    from rich.logging import RichHandler

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=verbose, show_path=verbose)],
        force=True,
    )


def fail(console: "Console", message: str, error: BaseException | None = None) -> NoReturn:
    """Print an error and exit with status 1."""
    if error is not None:
        console.print(f"[red]{message}:[/red] {error}")
    else:
        console.print(f"[red]Error:[/red] {message}")
    raise SystemExit(1)


# =============================================================================
# Summaries
# =============================================================================

def display_run_summary(data: dict, console: "Console", title: str = "Run Summary") -> None:
    """Print key/value metrics of a run or experiment."""
    console.print(f"\n[bold]═══ {title} ═══[/bold]")

    table = _get_table(show_header=False, box=None)
    table.add_column("Metric", style="dim")
    table.add_column("Value", justify="right")
    for key, value in data.items():
        label = key.replace("_", " ").capitalize()
        table.add_row(label, str(value))
    console.print(table)


def display_policy_stats(stats: "PolicyStats", console: "Console", included: dict[int, int] | None = None) -> None:
    """Per-syscall statistics, lowest frequency first."""
    table = _get_table(title=f"Policy statistics ({stats.runs} runs)")
    table.add_column("Syscall", style="cyan")
    table.add_column("Freq", justify="right")
    table.add_column("Mean", justify="right")
    table.add_column("SD", justify="right")
    table.add_column("CV", justify="right")
    if included is not None:
        table.add_column("Runs", justify="right", style="green")
    for row in stats.rows:
        cells = [
            f"{row.name}({row.syscall})",
            str(row.freq),
            f"{row.mean:.2f}",
            f"{row.sd:.2f}",
            "-" if row.cv is None else str(row.cv),
        ]
        if included is not None:
            cells.append(str(included.get(row.syscall, 0)))
        table.add_row(*cells)
    console.print(table)


def display_evaluation(rows: Iterable[tuple[str, "EvaluationRow"]], console: "Console") -> None:
    """Permit and deny percentages of each policy on each dataset."""
    table = _get_table(title="Policy evaluation")
    table.add_column("Policy", style="cyan")
    table.add_column("Dataset")
    table.add_column("Events", justify="right")
    table.add_column("Attack %", justify="right")
    table.add_column("Permit %", justify="right", style="green")
    table.add_column("Deny %", justify="right", style="red")
    for policy, row in rows:
        table.add_row(policy, row.dataset, str(row.events), str(row.attack_pct), str(row.permit_pct), str(row.deny_pct))
    console.print(table)


# =============================================================================
# Signal Handling
# =============================================================================

@contextmanager
def graceful_shutdown(console: "Console", message: str = "Shutdown requested."):
    """Context manager turning SIGINT/SIGTERM into a stop event.

    Yields:
        A threading.Event that is set when shutdown was requested

    Example:
        with graceful_shutdown(console) as stop:
            run_server(config, stop_event=stop)
    """
    stop = threading.Event()

    def signal_handler(signum, frame):
        stop.set()
        console.print(f"\n[yellow]{message}[/yellow]")

    original_sigint = signal.signal(signal.SIGINT, signal_handler)
    # SIGTERM is not available on Windows
    original_sigterm = None
    if sys.platform != "win32":
        original_sigterm = signal.signal(signal.SIGTERM, signal_handler)

    try:
        yield stop
    finally:
        signal.signal(signal.SIGINT, original_sigint)
        if original_sigterm is not None:
            signal.signal(signal.SIGTERM, original_sigterm)
