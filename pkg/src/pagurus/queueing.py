"""Closed-form analysis of n-server Markovian queues and the lend/keep decision.

Queries arrive in a Poisson stream at ``arrival_rate`` and are served by
``servers`` identical containers, each completing work at ``service_rate``.
All stationary quantities require traffic density (offered load per server)
strictly below one.  The empty-system probability is computed through
log-sum-exp over the factorial series so server counts up to 64 stay finite.
"""

import enum
import math

import numpy as np

from .errors import EmptyWindowError, InvalidParamError, UnstableQueueError


class QueueModel:
    """Snapshot of (arrival rate, per-server service rate, server count)."""

    def __init__(self, arrival_rate, service_rate, servers):
        if not (math.isfinite(arrival_rate) and arrival_rate > 0):
            raise InvalidParamError(f"arrival_rate must be positive, got {arrival_rate}")
        if not (math.isfinite(service_rate) and service_rate > 0):
            raise InvalidParamError(f"service_rate must be positive, got {service_rate}")
        if servers < 1 or int(servers) != servers:
            raise InvalidParamError(f"servers must be a positive integer, got {servers}")
        self.arrival_rate = float(arrival_rate)
        self.service_rate = float(service_rate)
        self.servers = int(servers)

    @property
    def traffic_density(self):
        """Offered load per server; stability requires a value below one."""
        return self.arrival_rate / (self.servers * self.service_rate)

    def shrunk(self):
        """The same rates with one server removed."""
        return QueueModel(self.arrival_rate, self.service_rate, self.servers - 1)

    def __repr__(self):
        return (f"QueueModel(arrival_rate={self.arrival_rate}, "
                f"service_rate={self.service_rate}, servers={self.servers})")


class QosSpec:
    """Latency target plus the fraction of queries required to meet it.

    ``measured_percentile`` is the observed fraction of recent queries that met
    the target, normally supplied by the metrics layer; it defaults to 1.0 so a
    freshly registered action with no history is treated as satisfying its
    target.
    """

    def __init__(self, latency_target, required_percentile, measured_percentile=1.0):
        if not (math.isfinite(latency_target) and latency_target > 0):
            raise InvalidParamError(f"latency_target must be positive, got {latency_target}")
        if not 0.0 < required_percentile < 1.0:
            raise InvalidParamError(
                f"required_percentile must lie in (0, 1), got {required_percentile}")
        if not 0.0 <= measured_percentile <= 1.0:
            raise InvalidParamError(
                f"measured_percentile must lie in [0, 1], got {measured_percentile}")
        self.latency_target = float(latency_target)
        self.required_percentile = float(required_percentile)
        self.measured_percentile = float(measured_percentile)

    def with_measurement(self, measured_percentile):
        return QosSpec(self.latency_target, self.required_percentile, measured_percentile)

    def __repr__(self):
        return (f"QosSpec(latency_target={self.latency_target}, "
                f"required_percentile={self.required_percentile}, "
                f"measured_percentile={self.measured_percentile})")


class IdleDecision(enum.Enum):
    """Verdict on surrendering one container: lend it, keep it, or flag QoS."""

    CAN_LEND = "CanLend"
    MUST_KEEP = "MustKeep"
    QOS_VIOLATED = "QosViolated"


def _require_stable(model):
    if model.traffic_density >= 1.0:
        raise UnstableQueueError(
            f"traffic density {model.traffic_density:.6g} >= 1 for {model!r}; "
            "no stationary distribution exists")


def _log_empty_prob(model):
    """log of the empty-system probability, via log-sum-exp of the series."""
    n = model.servers
    rho = model.traffic_density
    log_offered = math.log(n * rho)
    terms = [k * log_offered - math.lgamma(k + 1) for k in range(n)]
    terms.append(n * log_offered - math.lgamma(n + 1) - math.log1p(-rho))
    peak = max(terms)
    total = sum(math.exp(x - peak) for x in terms)
    return -(peak + math.log(total))


def _log_wait_prob(model):
    """log P{an arrival has to queue}: the saturated-state mass over 1 - density."""
    n = model.servers
    rho = model.traffic_density
    return (_log_empty_prob(model) + n * math.log(n * rho)
            - math.lgamma(n + 1) - math.log1p(-rho))


def stationary_distribution(model, k_max):
    """Probabilities of finding k = 0..k_max queries in the system.

    Mass beyond k_max is implied geometric with ratio ``traffic_density``.
    """
    _require_stable(model)
    if k_max < 0 or int(k_max) != k_max:
        raise InvalidParamError(f"k_max must be a nonnegative integer, got {k_max}")
    n = model.servers
    rho = model.traffic_density
    log_offered = math.log(n * rho)
    log_pi0 = _log_empty_prob(model)
    out = np.empty(int(k_max) + 1)
    for k in range(int(k_max) + 1):
        if k < n:
            log_pi = log_pi0 + k * log_offered - math.lgamma(k + 1)
        else:
            log_pi = log_pi0 + n * math.log(n) + k * math.log(rho) - math.lgamma(n + 1)
        out[k] = math.exp(log_pi)
    return out


def prob_no_wait(model):
    """Chance an arriving query starts service immediately."""
    _require_stable(model)
    value = 1.0 - math.exp(_log_wait_prob(model))
    if value < -1e-12:
        raise InvalidParamError(
            f"no-wait probability computed as {value}; numerical failure")
    return max(value, 0.0)


def waiting_time_cdf(model, t):
    """P{queueing delay <= t} for an arriving query; requires t > 0.

    Continuous from the right at zero: the limit as t -> 0+ equals
    ``prob_no_wait`` (use that function for the t = 0 atom itself).
    """
    _require_stable(model)
    if not (math.isfinite(t) and t > 0):
        raise InvalidParamError(
            f"t must be positive, got {t}; use prob_no_wait for t = 0")
    decay = model.servers * model.service_rate * (1.0 - model.traffic_density) * t
    return 1.0 - math.exp(_log_wait_prob(model) - decay)


def idle_discriminant(model, qos, mode="consistent"):
    """Decide whether the action can give up one of its containers.

    Two criteria, in order: the measured fraction of queries meeting the
    latency target must already satisfy the requirement (else QOS_VIOLATED),
    and the remaining n-1 containers must keep the waiting budget
    (latency_target minus one mean execution) reachable at the required
    fraction (else MUST_KEEP).  A single container is never surrendered.

    ``mode`` selects how the shrunk system is evaluated:

    * "consistent" (default): rebuild the full model at n-1 servers and
      evaluate its waiting-time distribution at the budget.
    * "literal": keep the current n-server state probabilities but drain the
      queue with n-1 servers; retained for comparison.
    """
    _require_stable(model)
    if mode not in ("consistent", "literal"):
        raise InvalidParamError(f"mode must be 'consistent' or 'literal', got {mode!r}")
    budget = qos.latency_target - 1.0 / model.service_rate
    if budget <= 0:
        raise InvalidParamError(
            f"latency target {qos.latency_target}s leaves no waiting budget beyond "
            f"the mean execution time {1.0 / model.service_rate}s")
    if qos.measured_percentile < qos.required_percentile:
        return IdleDecision.QOS_VIOLATED
    if model.servers == 1:
        return IdleDecision.MUST_KEEP
    smaller = model.shrunk()
    if smaller.traffic_density >= 1.0:
        return IdleDecision.MUST_KEEP
    if mode == "consistent":
        reachable = waiting_time_cdf(smaller, budget)
    else:
        decay = ((model.servers - 1) * model.service_rate
                 * (1.0 - model.traffic_density) * budget)
        reachable = 1.0 - math.exp(_log_wait_prob(model) - decay)
    if reachable >= qos.required_percentile:
        return IdleDecision.CAN_LEND
    return IdleDecision.MUST_KEEP


def estimate_rates(window, span):
    """(arrival rate, service rate) from (arrival_time, service_duration) pairs.

    ``span`` is the observation length in seconds.  It is an explicit argument
    because a window holding a single query has no measurable extent of its
    own; callers pass the length of the interval they actually watched.
    """
    pairs = list(window)
    if not pairs:
        raise EmptyWindowError("cannot estimate rates from an empty window")
    if not (math.isfinite(span) and span > 0):
        raise InvalidParamError(f"span must be positive, got {span}")
    durations = np.asarray([d for _, d in pairs], dtype=np.float64)
    if np.any(durations <= 0):
        raise InvalidParamError("service durations must be positive")
    return len(pairs) / span, 1.0 / float(durations.mean())
