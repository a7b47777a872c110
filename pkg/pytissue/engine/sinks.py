"""Record sinks: CSV files, in-memory buffers and the response log."""

import csv
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import IO, Optional

from pytissue.errors import RunFatalError
from pytissue.models.records import ResponseRecord


RESPONSE_COLUMNS = ["t_us", "antigen", "cell_type"]


class CsvSink:
    """Writes rows to a CSV file with a fixed header.

    The header is written on open, so a sink that never receives a row
    still produces a header-only file. An empty header writes nothing, for
    appending to an existing file.
    """

    def __init__(self, target: str | Path | IO[str], header: Sequence[str]):
        if isinstance(target, (str, Path)):
            self.path: Optional[Path] = Path(target)
            self._file = open(self.path, "w", newline="")
            self._owns_file = True
        else:
            self.path = None
            self._file = target
            self._owns_file = False
        self._writer = csv.writer(self._file, lineterminator="\n")
        if header:
            self._writer.writerow(header)
        self.rows_written = 0

    def write(self, row: Sequence) -> None:
        try:
            self._writer.writerow(row)
        except (OSError, ValueError) as e:
            raise RunFatalError(f"cannot write to {self.path or 'stream'}: {e}") from e
        self.rows_written += 1

    def close(self) -> None:
        if self._owns_file and not self._file.closed:
            self._file.close()


class MemorySink:
    """Keeps rows in a list."""

    def __init__(self):
        self.rows: list[list] = []

    def write(self, row: Sequence) -> None:
        self.rows.append(list(row))

    def close(self) -> None:
        pass


class ResponseBuffer:
    """Collects one tick's responses until the tick commits."""

    def __init__(self):
        self.records: list[ResponseRecord] = []

    def write(self, record: ResponseRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)


class ResponseLog:
    """The run's response sink.

    Keeps every record, mirrors rows to an optional CSV sink and notifies
    listeners (for example the protocol's response feed).
    """

    def __init__(
        self,
        csv_sink: Optional[CsvSink] = None,
        listeners: Optional[list[Callable[[ResponseRecord], None]]] = None,
    ):
        self.records: list[ResponseRecord] = []
        self._csv = csv_sink
        self.listeners = list(listeners or [])

    def write(self, record: ResponseRecord) -> None:
        self.records.append(record)
        if self._csv is not None:
            self._csv.write(record.to_row())
        for listener in self.listeners:
            listener(record)

    def close(self) -> None:
        if self._csv is not None:
            self._csv.close()


class TeeSink:
    """Writes every row to each of its sinks."""

    def __init__(self, *sinks):
        self.sinks = sinks

    def write(self, row: Sequence) -> None:
        for sink in self.sinks:
            sink.write(row)

    def close(self) -> None:
        for sink in self.sinks:
            sink.close()
