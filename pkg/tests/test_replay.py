"""Tests for trace parsing, replay log files and the replay client."""

import threading
import time
from decimal import Decimal

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from pytissue.errors import ReplayAbortedError, TraceParseError
from pytissue.models.records import DatasetGroup, DatasetLabel, ReplayEvent
from pytissue.protocol.channels import EventQueue, ResponseFeed
from pytissue.protocol.server import Hub
from pytissue.replay.logfile import (
    format_event,
    labels_path,
    loads_log,
    log_digest,
    merge_logs,
    parse_event,
    read_labeled_log,
    read_labels,
    read_log,
    write_labels,
    write_log,
)
from pytissue.replay.player import replay, replay_to_server
from pytissue.replay.syscalls import describe, load_table, syscall_name, syscall_number
from pytissue.replay.traces import first_timestamp, parse_process_monitor, parse_strace


class TestSyscallTable:
    """Tests for the syscall name table."""

    @pytest.mark.parametrize(
        "name, number",
        [("close", 6), ("open", 5), ("_exit", 1), ("exit", 1), ("socket", 301), ("recvfrom", 312)],
    )
    def test_numbers(self, name: str, number: int):
        assert syscall_number(name) == number

    def test_bundled_table(self):
        names, numbers = load_table()
        assert len(names) == 314
        assert set(range(318)) - set(names) == {222, 223, 251, 285}
        # alias rows keep the strace display name
        assert names[1] == "_exit"
        assert names[142] == "select"
        assert numbers["_newselect"] == 142

    def test_unknown(self):
        assert syscall_number("frobnicate") is None
        assert syscall_name(9999) == "sys_9999"
        assert describe(6) == "close(6)"


class TestParseStrace:
    """Tests for parse_strace."""

    def test_rebases_to_first_line(self):
        text = (
            '1100000000.000000 close(3) = 0\n'
            '1100000000.500000 open("/etc/passwd", O_RDONLY) = 3\n'
        )
        assert parse_strace(text) == [(0, 6), (500000, 5)]

    def test_pid_prefixes_and_notices(self):
        text = "\n".join([
            "[pid  4242] 1100000000.000000 read(3, \"x\", 1) = 1",
            "4243  1100000000.100000 write(1, \"x\", 1) = 1",
            "1100000000.200000 --- SIGCHLD {si_signo=SIGCHLD} ---",
            "1100000000.300000 +++ exited with 0 +++",
        ])
        assert parse_strace(text) == [(0, 3), (100000, 4)]

    def test_unfinished_call_counted_once(self):
        text = "\n".join([
            "[pid  1] 1100000000.000000 wait4(-1, <unfinished ...>",
            "[pid  2] 1100000000.100000 close(4) = 0",
            "[pid  1] 1100000000.200000 <... wait4 resumed> NULL, 0, NULL) = 2",
        ])
        assert parse_strace(text) == [(0, 114), (100000, 6)]

    def test_explicit_origin(self):
        calls = parse_strace("1100000001.000000 close(3) = 0", origin=Decimal("1100000000"))
        assert calls == [(1_000_000, 6)]

    def test_tolerates_a_few_bad_lines(self):
        lines = [f"11000000{i:02d}.000000 close(3) = 0" for i in range(9)] + ["garbage"]
        assert len(parse_strace(lines)) == 9

    def test_too_many_bad_lines(self):
        text = "\n".join([
            "1100000000.000000 close(3) = 0",
            "garbage",
            "1100000000.100000 frobnicate(1) = 0",
            "1100000000.200000 close(3) = 0",
        ])
        with pytest.raises(TraceParseError) as exc_info:
            parse_strace(text)
        assert (exc_info.value.skipped, exc_info.value.total) == (2, 4)

    def test_first_timestamp(self):
        assert first_timestamp("\n[pid  9] 1100000000.250000 close(3) = 0\n") == Decimal("1100000000.250000")
        assert first_timestamp("no times here") is None


class TestParseProcessMonitor:
    """Tests for parse_process_monitor."""

    def test_samples(self):
        text = "# pid 4242\n1100000000.000000 cpu=0.25 mem=1048576\n1100000001.000000 cpu=0.5\n"
        samples = parse_process_monitor(text)
        assert [(s.t_us, s.cpu, s.mem) for s in samples] == [(0, 0.25, 1048576), (1_000_000, 0.5, None)]

    def test_bad_lines_rejected(self):
        with pytest.raises(TraceParseError):
            parse_process_monitor("1100000000.0 cpu=high\n1100000001.0 cpu=0.1\n")


class TestLogFile:
    """Tests for the replay log format."""

    def test_merge_puts_antigen_first_on_ties(self):
        events = merge_logs([(0, 6), (100, 5), (100, 3)], [(0, 0.1), (100, 0.2)], signal_id=0)
        assert [format_event(e) for e in events] == [
            "0 ANTIGEN 6",
            "0 SIGNAL 0 0.1",
            "100 ANTIGEN 5",
            "100 ANTIGEN 3",
            "100 SIGNAL 0 0.2",
        ]

    def test_write_and_read(self, tmp_path):
        events = [ReplayEvent.antigen_event(0, 6), ReplayEvent.signal_event(500000, 0, 0.25)]
        path = tmp_path / "session.log"
        write_log(path, events, {"group": "success", "seed": 42})
        log = read_log(path)
        assert log.events == events
        assert log.metadata == {"group": "success", "seed": "42"}
        assert log.group is DatasetGroup.SUCCESS
        assert log.duration_us == 500000

    def test_unsorted_log_is_sorted(self):
        log = loads_log("200 ANTIGEN 1\n100 ANTIGEN 2\n")
        assert [e.t_us for e in log.events] == [100, 200]

    @pytest.mark.parametrize(
        "line",
        ["x ANTIGEN 1", "0 PING 1", "0 ANTIGEN", "0 ANTIGEN -1", "-5 ANTIGEN 1", "0 SIGNAL 0", "0 SIGNAL 0 -1.0"],
    )
    def test_bad_event_line(self, line: str):
        with pytest.raises(TraceParseError):
            parse_event(line, 3)

    def test_missing_log(self, tmp_path):
        with pytest.raises(TraceParseError, match="not found"):
            read_log(tmp_path / "missing.log")

    def test_labels_round_trip(self, tmp_path):
        log_path = tmp_path / "session.log"
        label = DatasetLabel(DatasetGroup.FAILURE, [False, True, True, False])
        assert write_labels(log_path, label) == labels_path(log_path)
        assert read_labels(log_path) == label
        assert read_labels(tmp_path / "other.log") is None

    def test_bad_labels(self, tmp_path):
        log_path = tmp_path / "session.log"
        labels_path(log_path).write_text("# group=normal\n0\nyes\n")
        with pytest.raises(TraceParseError):
            read_labels(log_path)

    def test_unsorted_log_keeps_flags_with_their_events(self, tmp_path):
        log_path = tmp_path / "session.log"
        log_path.write_text("300 ANTIGEN 9\n100 ANTIGEN 2\n200 ANTIGEN 5\n")
        write_labels(log_path, DatasetLabel(DatasetGroup.SUCCESS, [True, False, False]))
        log, label = read_labeled_log(log_path)
        assert [e.antigen for e in log.events] == [2, 5, 9]
        assert label.attack_flags == [False, False, True]

    def test_flag_count_must_match_events(self, tmp_path):
        log_path = tmp_path / "session.log"
        write_log(log_path, [ReplayEvent.antigen_event(0, 6), ReplayEvent.antigen_event(1, 5)])
        write_labels(log_path, DatasetLabel(DatasetGroup.SUCCESS, [True]))
        with pytest.raises(TraceParseError, match="1 flags for 2 events"):
            read_labeled_log(log_path)

    @settings(max_examples=100, suppress_health_check=[HealthCheck.function_scoped_fixture])
    @given(
        rows=st.lists(
            st.tuples(st.integers(0, 50), st.integers(0, 340), st.booleans()),
            min_size=1,
            max_size=30,
        )
    )
    def test_flags_follow_sorted_events(self, tmp_path, rows):
        log_path = tmp_path / "shuffled.log"
        log_path.write_text("".join(f"{t} ANTIGEN {value}\n" for t, value, _ in rows))
        write_labels(log_path, DatasetLabel(DatasetGroup.SUCCESS, [flag for _, _, flag in rows]))
        log, label = read_labeled_log(log_path)
        expected = sorted(rows, key=lambda row: row[0])
        assert [(e.t_us, e.antigen, flag) for e, flag in zip(log.events, label.attack_flags)] == expected

    def test_digest_depends_on_events(self):
        a = [ReplayEvent.antigen_event(0, 6)]
        b = [ReplayEvent.antigen_event(0, 5)]
        assert log_digest(a) == log_digest(list(a))
        assert log_digest(a) != log_digest(b)


class FakeTime:
    """A clock that only moves when someone sleeps."""

    def __init__(self):
        self.t = 100.0

    def now(self) -> float:
        return self.t

    def sleep(self, seconds: float) -> None:
        self.t += seconds


class RecordingClient:
    def __init__(self, clock: FakeTime, fail_after: int = -1):
        self.clock = clock
        self.sent: list[tuple[float, object]] = []
        self.fail_after = fail_after

    def _record(self, payload) -> None:
        if len(self.sent) == self.fail_after:
            raise ConnectionResetError("peer went away")
        self.sent.append((round(self.clock.now() - 100.0, 6), payload))

    def send_antigen(self, value: int) -> None:
        self._record(value)

    def send_signal(self, signal_id: int, level: float) -> None:
        self._record((signal_id, level))


EVENTS = [
    ReplayEvent.antigen_event(0, 6),
    ReplayEvent.signal_event(1_000_000, 0, 0.5),
    ReplayEvent.antigen_event(2_000_000, 5),
]


class TestReplay:
    """Tests for the replay client."""

    def test_rate_scales_send_times(self):
        clock = FakeTime()
        antigen, signal = RecordingClient(clock), RecordingClient(clock)
        sent = replay(EVENTS, 2.0, antigen, signal, now=clock.now, sleep=clock.sleep)
        assert sent == 3
        assert antigen.sent == [(0.0, 6), (1.0, 5)]
        assert signal.sent == [(0.5, (0, 0.5))]

    def test_signals_skipped_without_signal_client(self):
        clock = FakeTime()
        antigen = RecordingClient(clock)
        assert replay(EVENTS, 1.0, antigen, now=clock.now, sleep=clock.sleep) == 2

    @pytest.mark.parametrize("rate", [0, -1.0])
    def test_rate_must_be_positive(self, rate: float):
        with pytest.raises(ValueError):
            replay(EVENTS, rate, RecordingClient(FakeTime()))

    def test_stop_aborts(self):
        stop = threading.Event()
        stop.set()
        clock = FakeTime()
        with pytest.raises(ReplayAbortedError) as exc_info:
            replay(EVENTS, 1.0, RecordingClient(clock), now=clock.now, sleep=clock.sleep, stop=stop)
        assert exc_info.value.unsent == 3

    def test_lost_connection_aborts(self):
        clock = FakeTime()
        antigen = RecordingClient(clock, fail_after=1)
        with pytest.raises(ReplayAbortedError) as exc_info:
            replay(EVENTS, 1.0, antigen, RecordingClient(clock), now=clock.now, sleep=clock.sleep)
        assert exc_info.value.unsent == 1

    def test_replay_to_server(self):
        hub = Hub(EventQueue(), ResponseFeed(), now_us=lambda: 0, max_cytokines=1)
        host, port = hub.listen("127.0.0.1:0")
        try:
            assert replay_to_server(EVENTS, 100.0, f"{host}:{port}") == 3
            deadline = time.monotonic() + 3.0
            received = []
            while len(received) < 3 and time.monotonic() < deadline:
                received += [q.event for q in hub.events.drain()]
                time.sleep(0.01)
        finally:
            hub.shutdown()
        assert sorted(e.antigen for e in received if e.is_antigen) == [5, 6]
        assert [e.signal.level for e in received if not e.is_antigen] == [0.5]
