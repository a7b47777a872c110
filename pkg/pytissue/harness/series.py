"""Time series and summary statistics over run outputs.

All times are run-time microseconds. Rate series are counts per bucket
(1 s buckets by default, matching probe_rate).
"""

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal, stats


SECOND_US = 1_000_000


def rate_series(times_us: Sequence[int], bucket_us: int = SECOND_US, span_us: Optional[int] = None) -> np.ndarray:
    """Count of times in each bucket [k*bucket_us, (k+1)*bucket_us).

    The series covers span_us when given (times past it are dropped),
    otherwise up to the last time.
    """
    if bucket_us <= 0:
        raise ValueError(f"bucket width must be positive, got {bucket_us}")
    times = np.asarray(times_us, dtype=np.int64)
    if span_us is None:
        span_us = int(times.max()) + 1 if len(times) else 0
    buckets = -(-span_us // bucket_us)
    times = times[(times >= 0) & (times < buckets * bucket_us)]
    return np.bincount(times // bucket_us, minlength=buckets)[:buckets]


def lagged_cross_correlation(a: Sequence[float], b: Sequence[float], max_lag: int) -> int:
    """Lag (in buckets) at which b best follows a.

    A positive lag means b's pattern appears that many buckets after a's.
    Only lags in [-max_lag, max_lag] are considered; flat series give 0.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if len(x) == 0 or len(y) == 0 or not x.std() or not y.std():
        return 0
    x = (x - x.mean()) / x.std()
    y = (y - y.mean()) / y.std()
    corr = signal.correlate(y, x, mode="full")
    lags = signal.correlation_lags(len(y), len(x), mode="full")
    window = np.abs(lags) <= max_lag
    return int(lags[window][np.argmax(corr[window])])


@dataclass(frozen=True)
class BurstSummary:
    """Shape of one response burst.

    Attributes:
        first_us: Time of the first response
        last_us: Time of the last response
        peak_us: Start of the bucket with the most responses (earliest on ties)
        peak_rate: Responses in that bucket
    """
    first_us: int
    last_us: int
    peak_us: int
    peak_rate: int

    @property
    def duration_us(self) -> int:
        return self.last_us - self.first_us


def burst_summary(times_us: Sequence[int], bucket_us: int = SECOND_US) -> Optional[BurstSummary]:
    """Summarize a response burst; None when there were no responses."""
    if len(times_us) == 0:
        return None
    series = rate_series(times_us, bucket_us)
    peak = int(np.argmax(series))
    return BurstSummary(
        first_us=int(min(times_us)),
        last_us=int(max(times_us)),
        peak_us=peak * bucket_us,
        peak_rate=int(series[peak]),
    )


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation; 0.0 when either side is constant."""
    if len(x) < 2 or len(set(x)) < 2 or len(set(y)) < 2:
        return 0.0
    rho = stats.spearmanr(x, y).statistic
    return float(rho)


def split_medians(keys: Sequence[float], values: Sequence[Optional[float]]) -> tuple[float, float]:
    """Median of values for the lower and upper half of keys.

    Items are ordered by key; None values are left out after the split. An
    odd middle item goes to the upper half. Empty halves give nan.
    """
    order = np.argsort(np.asarray(keys, dtype=float), kind="stable")
    half = len(order) // 2

    def median(indices) -> float:
        picked = [values[i] for i in indices if values[i] is not None]
        return float(np.median(picked)) if picked else float("nan")

    return median(order[:half]), median(order[half:])
