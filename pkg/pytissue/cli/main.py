"""Main CLI entry point for pytissue.

Uses lazy loading so `tissue --help` does not import numpy, scipy or the
engine until a command actually runs.
"""

import click


class LazyGroup(click.Group):
    """A click Group that imports each subcommand's module on first use."""

    def __init__(self, *args, lazy_subcommands: dict[str, str] | None = None, **kwargs):
        super().__init__(*args, **kwargs)
        # Map of command name -> module path
        self._lazy_subcommands = lazy_subcommands or {}

    def list_commands(self, ctx: click.Context) -> list[str]:
        base = super().list_commands(ctx)
        lazy = sorted(self._lazy_subcommands.keys())
        return base + lazy

    def get_command(self, ctx: click.Context, cmd_name: str) -> click.Command | None:
        if cmd_name in self._lazy_subcommands:
            return self._lazy_load(cmd_name)
        return super().get_command(ctx, cmd_name)

    def _lazy_load(self, cmd_name: str) -> click.Command:
        import importlib
        module_path = self._lazy_subcommands[cmd_name]
        module = importlib.import_module(module_path)
        return getattr(module, cmd_name)


# command_name -> module_path
LAZY_SUBCOMMANDS = {
    "serve": "pytissue.cli.serve",
    "watch": "pytissue.cli.watch",
    "replay": "pytissue.cli.replay",
    "ingest": "pytissue.cli.dataset",
    "synth": "pytissue.cli.dataset",
    "experiment": "pytissue.cli.experiment",
    "config": "pytissue.cli.config",
}


CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}


@click.group(cls=LazyGroup, lazy_subcommands=LAZY_SUBCOMMANDS, context_settings=CONTEXT_SETTINGS)
@click.version_option(version="0.1.0", prog_name="tissue")
def main():
    """tissue - immune-inspired multi-agent algorithms over event streams.

    Runs the twocell algorithm as a server that antigen and signal clients
    feed, and drives the syscall-policy experiments.

    \b
    Commands:
        serve      - Run a tissue server
        watch      - Log the responses of a running server
        replay     - Play a replay log to a server
        ingest     - Build a replay log from strace and process-monitor logs
        synth      - Generate a labeled synthetic dataset
        experiment - Run an experiment plan
        config     - Show or write configuration files
    """
    pass


if __name__ == "__main__":
    main()
