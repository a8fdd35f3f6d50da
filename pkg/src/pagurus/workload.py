"""Arrival-process generation and the RNG stream discipline.

Every random stream in a simulation derives from one master seed plus a stable
string key (hashed with crc32, never Python's salted hash), so two runs with
the same seed share per-action, per-purpose streams even when policies differ.
That is what makes paired-policy replays comparable query by query.
"""

import math
import zlib

import numpy as np

from .errors import InvalidParamError


def stream_rng(master_seed, *keys):
    """Independent generator for (master seed, purpose key...) — reproducible."""
    entropy = [int(master_seed) & 0xFFFFFFFF]
    for key in keys:
        entropy.append(zlib.crc32(str(key).encode("utf-8")))
    return np.random.default_rng(np.random.SeedSequence(entropy))


def sample_duration(rng, dist, mean):
    """One positive duration from the named distribution with the given mean."""
    if dist == "exponential":
        return float(rng.exponential(mean))
    if dist == "fixed":
        return float(mean)
    if dist == "lognormal":
        sigma = 0.5
        return float(rng.lognormal(math.log(mean) - sigma * sigma / 2.0, sigma))
    raise InvalidParamError(f"unknown distribution {dist!r}")


class PoissonArrivals:
    """Memoryless arrivals at a constant rate."""

    def __init__(self, rate):
        if not (math.isfinite(rate) and rate > 0):
            raise InvalidParamError(f"rate must be positive, got {rate}")
        self.rate = float(rate)

    def peak_rate(self):
        return self.rate

    def rate_at(self, t):
        return self.rate

    def __repr__(self):
        return f"PoissonArrivals(rate={self.rate})"


class DiurnalArrivals:
    """Rate oscillating sinusoidally between a low and a peak over one period."""

    def __init__(self, low_rate, peak_rate, period):
        if not (0 < low_rate <= peak_rate):
            raise InvalidParamError(
                f"need 0 < low_rate <= peak_rate, got {low_rate}, {peak_rate}")
        if period <= 0:
            raise InvalidParamError(f"period must be positive, got {period}")
        self.low_rate = float(low_rate)
        self.high_rate = float(peak_rate)
        self.period = float(period)

    def peak_rate(self):
        return self.high_rate

    def rate_at(self, t):
        # starts at the low point, peaks half a period in
        phase = (1.0 - math.cos(2.0 * math.pi * t / self.period)) / 2.0
        return self.low_rate + (self.high_rate - self.low_rate) * phase

    def __repr__(self):
        return (f"DiurnalArrivals(low={self.low_rate}, peak={self.high_rate}, "
                f"period={self.period})")


class BurstArrivals:
    """Constant base rate, multiplied inside one burst window."""

    def __init__(self, base_rate, multiplier, window):
        if not (math.isfinite(base_rate) and base_rate > 0):
            raise InvalidParamError(f"base_rate must be positive, got {base_rate}")
        if multiplier < 1.0:
            raise InvalidParamError(f"multiplier must be >= 1, got {multiplier}")
        start, end = window
        if not 0 <= start < end:
            raise InvalidParamError(f"window must satisfy 0 <= start < end, got {window}")
        self.base_rate = float(base_rate)
        self.multiplier = float(multiplier)
        self.window = (float(start), float(end))

    def peak_rate(self):
        return self.base_rate * self.multiplier

    def rate_at(self, t):
        lo, hi = self.window
        if lo <= t < hi:
            return self.base_rate * self.multiplier
        return self.base_rate

    def __repr__(self):
        return (f"BurstArrivals(base={self.base_rate}, x{self.multiplier}, "
                f"window={self.window})")


class FixedIntervalArrivals:
    """Deterministic arrivals every ``period`` seconds, starting after ``offset``.

    The first arrival lands at offset + period; an arrival exactly at the
    workload duration is included.  ``count`` optionally truncates the train.
    """

    def __init__(self, period, offset=0.0, count=None):
        if period <= 0:
            raise InvalidParamError(f"period must be positive, got {period}")
        if offset < 0:
            raise InvalidParamError(f"offset must be nonnegative, got {offset}")
        if count is not None and count < 1:
            raise InvalidParamError(f"count must be positive when given, got {count}")
        self.period = float(period)
        self.offset = float(offset)
        self.count = count

    def __repr__(self):
        return (f"FixedIntervalArrivals(period={self.period}, offset={self.offset}, "
                f"count={self.count})")


class BatchArrivals:
    """``size`` simultaneous arrivals every ``period`` seconds — fan-out calls.

    Deterministic, like the fixed-interval train: batches land at offset,
    offset + period, and so on.  This is the shape of map-style invocations
    where one trigger fans out to several parallel queries, and it is the
    regime that leaves a pool of same-action containers idle between batches.
    """

    def __init__(self, period, size, offset=0.0):
        if period <= 0:
            raise InvalidParamError(f"period must be positive, got {period}")
        if size < 1:
            raise InvalidParamError(f"size must be at least 1, got {size}")
        if offset < 0:
            raise InvalidParamError(f"offset must be nonnegative, got {offset}")
        self.period = float(period)
        self.size = int(size)
        self.offset = float(offset)

    def __repr__(self):
        return (f"BatchArrivals(period={self.period}, size={self.size}, "
                f"offset={self.offset})")


class WorkloadSpec:
    """Per-action arrival processes over a common duration."""

    def __init__(self, processes, duration, seed=None):
        if duration <= 0:
            raise InvalidParamError(f"duration must be positive, got {duration}")
        self.processes = dict(processes)
        self.duration = float(duration)
        self.seed = seed

    def __repr__(self):
        return f"WorkloadSpec({len(self.processes)} actions, duration={self.duration})"


def sample_arrivals(process, duration, rng):
    """Arrival times in (0, duration] for one action's process.

    Random processes are sampled by thinning against the peak rate, so any
    rate shape supported by ``rate_at`` works unchanged; the fixed-interval
    train is deterministic and ignores the generator.
    """
    if duration <= 0:
        raise InvalidParamError(f"duration must be positive, got {duration}")
    if isinstance(process, FixedIntervalArrivals):
        times = []
        k = 1
        while True:
            t = process.offset + k * process.period
            if t > duration or (process.count is not None and len(times) >= process.count):
                break
            times.append(t)
            k += 1
        return np.asarray(times, dtype=np.float64)

    if isinstance(process, BatchArrivals):
        times = []
        t = process.offset
        while t <= duration:
            if t > 0:
                times.extend([t] * process.size)
            t += process.period
        return np.asarray(times, dtype=np.float64)

    peak = process.peak_rate()
    times = []
    t = 0.0
    # draw exponentials in blocks to keep the generator call count low
    block = max(64, int(peak * duration * 0.25) + 1)
    pending = []
    while True:
        if not pending:
            pending = list(rng.exponential(1.0 / peak, size=block))
        t += pending.pop(0)
        if t > duration:
            break
        if rng.random() * peak <= process.rate_at(t):
            times.append(t)
    return np.asarray(times, dtype=np.float64)
