"""Bundled syscall name/number table.

The table ships as `pytissue/data/syscalls.csv` (`number,name` rows). Numbers
follow the Linux i386 table, with two local conventions:

- socket operations (multiplexed through socketcall on i386) get their own
  numbers 301-317, socketcall sub-call + 300
- a few syscalls are named the way strace prints them on i386 (`_exit`,
  `old_mmap`, `select` for _newselect, `getrlimit` for ugetrlimit); the
  kernel names follow as alias rows that repeat an earlier number
"""

import csv
from functools import cache
from importlib.resources import files
from typing import Optional

from pytissue.errors import ConfigError


TABLE_RESOURCE = "data/syscalls.csv"


@cache
def load_table() -> tuple[dict[int, str], dict[str, int]]:
    """Read the bundled table into (number -> display name, name -> number).

    Raises:
        ConfigError: If the bundled table is malformed
    """
    text = files("pytissue").joinpath(TABLE_RESOURCE).read_text()
    names: dict[int, str] = {}
    numbers: dict[str, int] = {}
    rows = csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))
    for row in rows:
        try:
            number, name = int(row["number"]), row["name"].strip()
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"bad row in {TABLE_RESOURCE}: {row} ({e})") from e
        names.setdefault(number, name)
        numbers[name] = number
    return names, numbers


def syscall_number(name: str) -> Optional[int]:
    """Number for a syscall name, None if the name is not in the table."""
    return load_table()[1].get(name)


def syscall_name(number: int) -> str:
    """Display name for a syscall number; unknown numbers print as `sys_<n>`."""
    return load_table()[0].get(number, f"sys_{number}")


def describe(number: int) -> str:
    """`name(number)`, the form used in policy and statistics tables."""
    return f"{syscall_name(number)}({number})"
