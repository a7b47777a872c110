"""Run clocks and the seeded random stream.

Three clock modes:
- realtime: run time follows the wall clock
- accelerated: run time is wall time multiplied by a factor
- deterministic: run time advances only through tick(); the wall clock is
  never consulted
"""

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ClockMode(str, Enum):
    """How run time relates to wall time."""
    REALTIME = "realtime"
    ACCELERATED = "accelerated"
    DETERMINISTIC = "deterministic"


@dataclass
class RunClock:
    """Run time source for the scheduler, probes and response timestamps.

    Attributes:
        mode: Clock mode
        factor: Speed-up over wall time (1.0 in realtime mode)
        tick_us: Run time added by each tick() in deterministic mode
        tick_index: Ticks completed so far
    """
    mode: ClockMode = ClockMode.DETERMINISTIC
    factor: float = 1.0
    tick_us: int = 100000
    tick_index: int = 0
    _start: float = field(default=0.0, repr=False)

    @classmethod
    def realtime(cls, tick_us: int = 100000) -> "RunClock":
        return cls(mode=ClockMode.REALTIME, factor=1.0, tick_us=tick_us)

    @classmethod
    def accelerated(cls, factor: float, tick_us: int = 100000) -> "RunClock":
        if factor <= 0:
            raise ValueError(f"acceleration factor must be positive, got {factor}")
        return cls(mode=ClockMode.ACCELERATED, factor=factor, tick_us=tick_us)

    @classmethod
    def deterministic(cls, tick_us: int = 100000) -> "RunClock":
        return cls(mode=ClockMode.DETERMINISTIC, tick_us=tick_us)

    @property
    def is_deterministic(self) -> bool:
        return self.mode is ClockMode.DETERMINISTIC

    def start(self) -> None:
        """Mark run start; resets the tick index."""
        self.tick_index = 0
        if not self.is_deterministic:
            self._start = time.monotonic()

    def now_us(self) -> int:
        """Microseconds of run time since start()."""
        if self.is_deterministic:
            return self.tick_index * self.tick_us
        return int((time.monotonic() - self._start) * self.factor * 1_000_000)

    def tick(self) -> int:
        """Advance to the next tick and return its index."""
        self.tick_index += 1
        return self.tick_index

    def wall_seconds(self, run_us: int) -> float:
        """Wall-clock seconds corresponding to run_us of run time."""
        return run_us / 1_000_000 / self.factor

    def sleep_until(self, run_us: int) -> None:
        """Block until run time reaches run_us; a no-op in deterministic mode."""
        if self.is_deterministic:
            return
        delay = self.wall_seconds(run_us - self.now_us())
        if delay > 0:
            time.sleep(delay)


def make_rng(seed: int) -> np.random.Generator:
    """The run's single random stream: numpy's PCG64 seeded with a 64-bit value."""
    return np.random.Generator(np.random.PCG64(seed & 0xFFFF_FFFF_FFFF_FFFF))
