"""Trace accounting: latency distributions, startup paths, memory, reports.

Every completed query is classified by how its container was obtained —
``warm`` (an already-owned idle container, including reclaimed and prewarmed
ones), ``rent`` (a container borrowed through the sharing broker), ``restore``
(a checkpoint-restored boot), or ``cold`` (a full boot).  Reports keep the
per-query path sequence in arrival order so paired runs with the same seed can
be compared query by query.
"""

import hashlib
import json
import math

import numpy as np

from .errors import (
    EmptyHistogramError,
    EmptyWindowError,
    InvalidParamError,
    MismatchedRunsError,
    MissingBaselineError,
)

PATHS = ("warm", "rent", "restore", "cold")

#: histogram range: 100 microseconds to 100 seconds, 100 log-spaced buckets
HIST_LOW = 1e-4
HIST_HIGH = 100.0
HIST_BUCKETS = 100

CONTAINER_MEMORY_MB = 256


class Histogram:
    """Log-spaced latency histogram with an optional exact raw-sample mode."""

    def __init__(self, low=HIST_LOW, high=HIST_HIGH, buckets=HIST_BUCKETS, raw=True):
        if not 0 < low < high or buckets < 1:
            raise InvalidParamError(f"bad histogram shape ({low}, {high}, {buckets})")
        self.edges = np.logspace(math.log10(low), math.log10(high), buckets + 1)
        self.counts = np.zeros(buckets, dtype=np.int64)
        self.raw = [] if raw else None

    @property
    def total(self):
        return int(self.counts.sum())

    def add(self, value):
        idx = int(np.searchsorted(self.edges, value, side="right")) - 1
        idx = min(max(idx, 0), len(self.counts) - 1)
        self.counts[idx] += 1
        if self.raw is not None:
            self.raw.append(float(value))

    def add_many(self, values):
        for v in values:
            self.add(v)

    def percentile(self, q):
        """The q-quantile; exact in raw mode, interpolated within a bucket else.

        Raw mode returns the smallest sample with at least a q-fraction of the
        data at or below it.
        """
        if not 0.0 < q < 1.0:
            raise InvalidParamError(f"q must lie in (0, 1), got {q}")
        if self.total == 0:
            raise EmptyHistogramError("no samples recorded")
        if self.raw is not None:
            ordered = sorted(self.raw)
            idx = max(math.ceil(q * len(ordered)) - 1, 0)
            return ordered[idx]
        target = q * self.total
        cum = 0
        for i, c in enumerate(self.counts):
            if cum + c >= target and c > 0:
                frac = (target - cum) / c
                return float(self.edges[i] + frac * (self.edges[i + 1] - self.edges[i]))
            cum += c
        return float(self.edges[-1])

    def to_dict(self):
        return {
            "low": float(self.edges[0]),
            "high": float(self.edges[-1]),
            "counts": self.counts.tolist(),
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, data):
        hist = cls(low=data["low"], high=data["high"], buckets=len(data["counts"]),
                   raw=data["raw"] is not None)
        hist.counts = np.asarray(data["counts"], dtype=np.int64)
        if data["raw"] is not None:
            hist.raw = list(data["raw"])
        return hist


def percentile(histogram, q):
    """Quantile of a histogram; see Histogram.percentile."""
    return histogram.percentile(q)


class MetricsCollector:
    """Accumulates one run's events; finalize() freezes them into a report."""

    def __init__(self, policy, seed, duration, raw=True):
        self.policy = policy
        self.seed = seed
        self.duration = float(duration)
        self.raw = raw
        self.arrivals = {}
        self.paths = {}
        self.latencies = {}
        self.met = {}
        self.path_seq = {}
        self.query_lines = []
        self.live_containers = 0
        self.peak_containers = 0
        self.memory_mb_s = 0.0
        self._last_change = 0.0
        self.launches = {"cold": 0, "prewarm": 0}
        self.rented_now = {}
        self.peak_rented = {}
        self.global_rented = 0
        self.peak_global_rented = 0

    def _action_slot(self, action):
        if action not in self.paths:
            self.paths[action] = {p: 0 for p in PATHS}
            self.latencies[action] = []
            self.met[action] = 0
            self.path_seq[action] = {}
        return self.paths[action]

    def record_arrival(self, action):
        self.arrivals[action] = self.arrivals.get(action, 0) + 1

    def observe(self, action, index, path, arrival, end_to_end, met_target):
        if path not in PATHS:
            raise InvalidParamError(f"unknown startup path {path!r}")
        slot = self._action_slot(action)
        slot[path] += 1
        self.latencies[action].append((path, float(end_to_end)))
        self.met[action] += 1 if met_target else 0
        self.path_seq[action][index] = (float(arrival), path, float(end_to_end),
                                        1 if met_target else 0)
        self.query_lines.append(f"{action} {arrival:.9f} {path} {end_to_end:.9f}")

    def _roll_memory(self, now):
        if now > self._last_change:
            self.memory_mb_s += (self.live_containers * CONTAINER_MEMORY_MB
                                 * (now - self._last_change))
            self._last_change = now

    def container_launched(self, now, kind):
        self._roll_memory(now)
        self.launches[kind] = self.launches.get(kind, 0) + 1
        self.live_containers += 1
        self.peak_containers = max(self.peak_containers, self.live_containers)

    def container_recycled(self, now):
        self._roll_memory(now)
        self.live_containers -= 1

    def rented_delta(self, action, delta, now=None):
        held = self.rented_now.get(action, 0) + delta
        self.rented_now[action] = held
        self.peak_rented[action] = max(self.peak_rented.get(action, 0), held)
        self.global_rented += delta
        self.peak_global_rented = max(self.peak_global_rented, self.global_rented)

    def finalize(self, audit_lines, isolation_violations, end_time=None):
        self._roll_memory(max(self.duration, end_time or 0.0))
        per_action = {}
        for action, pairs in self.latencies.items():
            seq = self.path_seq[action]
            queries = [list(seq[i]) for i in sorted(seq)]
            stats = {
                "paths": dict(self.paths[action]),
                "arrivals": self.arrivals.get(action, 0),
                "completed": len(pairs),
                "r_real": (self.met[action] / len(pairs)) if pairs else 1.0,
                "queries": queries,
                "path_sequence": [row[1] for row in queries],
                "histogram": None,
                "percentiles": {},
                "per_path": {},
            }
            hist = Histogram(raw=self.raw)
            hist.add_many(e for _, e in pairs)
            stats["histogram"] = hist.to_dict()
            stats["percentiles"] = {q: hist.percentile(v)
                                    for q, v in (("p50", 0.5), ("p95", 0.95), ("p99", 0.99))}
            for path in PATHS:
                sub = [e for p, e in pairs if p == path]
                if not sub:
                    continue
                h = Histogram(raw=True)
                h.add_many(sub)
                stats["per_path"][path] = {
                    "count": len(sub),
                    "mean": float(np.mean(sub)),
                    "p50": h.percentile(0.5),
                    "p95": h.percentile(0.95),
                    "p99": h.percentile(0.99),
                }
            per_action[action] = stats
        for action, n in self.arrivals.items():
            if action not in per_action:
                per_action[action] = {
                    "paths": {p: 0 for p in PATHS}, "arrivals": n, "completed": 0,
                    "r_real": 1.0, "queries": [], "path_sequence": [],
                    "histogram": None, "percentiles": {}, "per_path": {},
                }
        audit_counts = {}
        for line in audit_lines:
            kind = line.split(" ", 2)[1]
            audit_counts[kind] = audit_counts.get(kind, 0) + 1
        payload = "\n".join(list(audit_lines) + self.query_lines)
        trace_hash = hashlib.sha256(payload.encode("utf-8")).hexdigest()
        return MetricsReport(
            policy=self.policy,
            seed=self.seed,
            duration=self.duration,
            per_action=per_action,
            memory_mb_s=self.memory_mb_s,
            peak_containers=self.peak_containers,
            peak_memory_mb=self.peak_containers * CONTAINER_MEMORY_MB,
            launches=dict(self.launches),
            peak_rented=dict(self.peak_rented),
            peak_global_rented=self.peak_global_rented,
            audit_counts=audit_counts,
            isolation_violations=isolation_violations,
            trace_hash=trace_hash,
        )


class MetricsReport:
    """Immutable-by-convention summary of one simulation run."""

    FIELDS = ("policy", "seed", "duration", "per_action", "memory_mb_s",
              "peak_containers", "peak_memory_mb", "launches", "peak_rented",
              "peak_global_rented", "audit_counts", "isolation_violations",
              "trace_hash")

    def __init__(self, **kwargs):
        for field in self.FIELDS:
            setattr(self, field, kwargs[field])

    # -- derived views -----------------------------------------------------

    def action_names(self):
        return sorted(self.per_action)

    def total_arrivals(self):
        return sum(a["arrivals"] for a in self.per_action.values())

    def total_completed(self):
        return sum(a["completed"] for a in self.per_action.values())

    def path_counts(self, action):
        return self.per_action[action]["paths"]

    def mean_latency(self, action, path=None):
        stats = self.per_action[action]
        if path is None:
            hist = stats["histogram"]
            if not hist or hist["raw"] is None or not hist["raw"]:
                raise EmptyHistogramError(f"no samples for {action}")
            return float(np.mean(hist["raw"]))
        per = stats["per_path"].get(path)
        if per is None:
            raise EmptyHistogramError(f"no {path} samples for {action}")
        return per["mean"]

    def r_real(self, action):
        return self.per_action[action]["r_real"]

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        return {field: getattr(self, field) for field in self.FIELDS}

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(**{field: data[field] for field in cls.FIELDS})

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        return isinstance(other, MetricsReport) and self.to_json() == other.to_json()

    # -- human / machine output --------------------------------------------

    def records(self):
        """Line-delimited rows: action,path,count,p50,p95,p99,r_real."""
        rows = []
        for action in self.action_names():
            stats = self.per_action[action]
            for path in PATHS:
                per = stats["per_path"].get(path)
                if per is None:
                    continue
                rows.append(
                    f"{action},{path},{per['count']},{per['p50']:.6f},"
                    f"{per['p95']:.6f},{per['p99']:.6f},{stats['r_real']:.4f}")
        return rows

    def table(self):
        header = (f"{'action':>8} {'warm':>6} {'rent':>6} {'restore':>8} {'cold':>6} "
                  f"{'p50':>9} {'p95':>9} {'p99':>9} {'r_real':>7}")
        lines = [header]
        for action in self.action_names():
            stats = self.per_action[action]
            p = stats["paths"]
            pct = stats["percentiles"]
            if pct:
                tail = (f"{pct['p50']:>9.4f} {pct['p95']:>9.4f} {pct['p99']:>9.4f} "
                        f"{stats['r_real']:>7.3f}")
            else:
                tail = f"{'-':>9} {'-':>9} {'-':>9} {'-':>7}"
            lines.append(f"{action:>8} {p['warm']:>6} {p['rent']:>6} "
                         f"{p['restore']:>8} {p['cold']:>6} {tail}")
        return "\n".join(lines)


def _require_paired(a, b):
    if a.seed != b.seed or a.duration != b.duration:
        raise MismatchedRunsError(
            f"runs are not paired: seeds {a.seed}/{b.seed}, "
            f"durations {a.duration}/{b.duration}")
    for action in set(a.per_action) | set(b.per_action):
        ca = a.per_action.get(action, {}).get("arrivals", 0)
        cb = b.per_action.get(action, {}).get("arrivals", 0)
        if ca != cb:
            raise MismatchedRunsError(
                f"runs are not paired: {action} saw {ca} vs {cb} arrivals")


def elimination_rate(report, baseline, action=None):
    """Fraction of the baseline's cold starts this run served without a boot.

    Queries are paired by arrival order within each action (valid because
    paired runs share the arrival sequence).  The denominator is the set of
    queries that booted a container (cold or restored) under the baseline; the
    numerator are those among them served warm or rented here.  An action whose
    baseline never booted has nothing to eliminate and scores 1.0.
    """
    if baseline is None:
        raise MissingBaselineError("elimination rate needs a paired baseline run")
    _require_paired(report, baseline)
    names = [action] if action is not None else sorted(baseline.per_action)
    out = {}
    for name in names:
        base_seq = baseline.per_action[name]["path_sequence"]
        this_seq = report.per_action[name]["path_sequence"]
        if len(base_seq) != len(this_seq):
            raise MismatchedRunsError(
                f"{name}: {len(this_seq)} vs {len(base_seq)} completed queries")
        would_cold = [i for i, p in enumerate(base_seq) if p in ("cold", "restore")]
        if not would_cold:
            out[name] = 1.0
            continue
        avoided = sum(1 for i in would_cold if this_seq[i] in ("warm", "rent"))
        out[name] = avoided / len(would_cold)
    return out[action] if action is not None else out


def memory_saving(report, baseline):
    """MB of concurrent container footprint the run saved over the baseline."""
    if baseline is None:
        raise MissingBaselineError("memory saving needs a paired baseline run")
    _require_paired(report, baseline)
    return (baseline.peak_containers - report.peak_containers) * CONTAINER_MEMORY_MB


def windowed_r_real(report, action, window):
    """QoS satisfaction fraction over queries arriving inside [lo, hi)."""
    lo, hi = window
    if not hi > lo:
        raise InvalidParamError(f"window must be increasing, got {window}")
    rows = [r for r in report.per_action[action]["queries"] if lo <= r[0] < hi]
    if not rows:
        raise EmptyWindowError(f"{action}: no arrivals in [{lo}, {hi})")
    return sum(r[3] for r in rows) / len(rows)
