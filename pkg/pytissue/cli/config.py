"""CLI commands for tissue configuration files."""

from pathlib import Path

import click

from pytissue.cli.common import _get_console, _get_table, fail


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}


@click.group(context_settings=CONTEXT_SETTINGS)
def config():
    """Show and write tissue configuration files.

    \b
    Examples:
        tissue config show
        tissue config show configs/twocell.conf
        tissue config init my.conf --set signal_enabled=true --set max_cytokines=1
    """
    pass


@config.command()
@click.argument("path", required=False, type=click.Path(exists=True))
def show(path: str | None):
    """Show a config file, or the defaults when no file is given."""
    from pytissue.config import TABLE_KEYS, TissueConfig
    from pytissue.errors import ConfigError

    console = _get_console()
    try:
        cfg = TissueConfig.load(path) if path else TissueConfig()
    except ConfigError as e:
        fail(console, "Invalid config", e)

    defaults = TissueConfig()
    table = _get_table(title=f"Configuration: {path or 'defaults'}")
    table.add_column("Key", style="cyan")
    table.add_column("Value", style="green")
    table.add_column("Default", style="dim")
    for key in [*TABLE_KEYS, *sorted(k for k in TissueConfig.model_fields if k not in TABLE_KEYS)]:
        value, default = getattr(cfg, key), getattr(defaults, key)
        table.add_row(key, str(value), "" if value == default else str(default))
    console.print(table)
    console.print(f"\n[dim]sha256 {cfg.digest()}[/dim]")


@config.command()
@click.argument("path", type=click.Path())
@click.option("--set", "-s", "assignments", multiple=True, metavar="KEY=VALUE", help="Override a key")
@click.option("--force", is_flag=True, help="Overwrite an existing file")
def init(path: str, assignments: tuple[str, ...], force: bool):
    """Write a config file with the defaults plus any --set overrides."""
    from pytissue.config import TissueConfig
    from pytissue.errors import ConfigError

    console = _get_console()
    target = Path(path)
    if target.exists() and not force:
        fail(console, f"{target} exists (use --force to overwrite)")

    overrides = {}
    for assignment in assignments:
        key, sep, value = assignment.partition("=")
        if not sep:
            fail(console, f"expected KEY=VALUE, got {assignment!r}")
        overrides[key.strip()] = value.strip()
    try:
        cfg = TissueConfig.from_dict({**TissueConfig().to_dict(), **overrides})
    except ConfigError as e:
        fail(console, "Invalid config", e)

    target.parent.mkdir(parents=True, exist_ok=True)
    cfg.save(target)
    console.print(f"[green]✓[/green] Wrote {target}")
