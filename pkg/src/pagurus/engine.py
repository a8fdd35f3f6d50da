"""Deterministic discrete-event simulator for container scheduling policies.

One run replays a workload against a chosen startup policy and produces a
metrics report.  All randomness flows from one master seed through named
streams, so two runs with the same seed share arrival times and per-query
execution durations regardless of policy — the basis for paired comparisons.

Policies
--------
``openwhisk``
    Keep-alive reuse only: idle containers serve their own action, everything
    else is a full cold boot.
``restore``
    Like openwhisk but boots come from checkpoints at a fixed restore cost.
``pagurus``
    Adds inter-action sharing: idle capacity is re-packed and lent out, and
    actions without a warm container try to rent before booting.
``restore_plus_pagurus`` / ``catalyzer_plus_pagurus``
    Sharing on top of checkpoint-restored boots.
``prewarm_for_all``
    One eternal shared container whose image is the largest conflict-free
    library union; compatible actions may run on it when they have nothing
    warm of their own.
``prewarm_for_each``
    One eternal dedicated container per registered action.

Set the environment variable ``PAGURUS_SIM_LOG`` to ``audit`` to stream
broker/recycle audit lines through the ``pagurus.sim`` logger, or ``debug``
to also log every processed event.  The default ``off`` keeps runs silent.
"""

import collections
import heapq
import itertools
import logging
import os

from .broker import DEFAULT_EPOCH_PERIOD, AuditLog, Broker, RentRequest
from .errors import ConfigError, InvalidParamError, StaleContainerError
from .lifecycle import (
    DEFAULT_TIMEOUTS,
    ActionScheduler,
    Container,
    DispatchOutcome,
    TransitionEvent,
    transition,
)
from .metrics import MetricsCollector
from .workload import sample_arrivals, sample_duration, stream_rng

logger = logging.getLogger("pagurus.sim")

POLICIES = (
    "openwhisk",
    "restore",
    "pagurus",
    "restore_plus_pagurus",
    "catalyzer_plus_pagurus",
    "prewarm_for_all",
    "prewarm_for_each",
)

#: policies that run the sharing broker
SHARING_POLICIES = frozenset(
    {"pagurus", "restore_plus_pagurus", "catalyzer_plus_pagurus"})

# event kinds, in no particular priority (ties resolve by push order)
ARRIVAL = "Arrival"
STARTUP_DONE = "StartupDone"
EXEC_DONE = "ExecDone"
RECYCLE_SWEEP = "RecycleSweep"
IDLE_SCAN = "IdleScan"
REPACK_EPOCH = "RepackEpoch"
REPACK_DONE = "RepackDone"
RENT_HANDOFF = "RentHandoff"

EVENT_KINDS = (ARRIVAL, STARTUP_DONE, EXEC_DONE, RECYCLE_SWEEP,
               IDLE_SCAN, REPACK_EPOCH, REPACK_DONE, RENT_HANDOFF)

DEFAULT_SWEEP_PERIOD = 1.0

#: seconds between lend-evaluation passes; each pass may promote at most one
#: idle container per action, so this paces how fast the lender pool refills
DEFAULT_IDLE_EVAL_PERIOD = 1.0

#: most borrowed containers an action may hold at once.  Without a cap, two
#: busy actions can rent each other's promoted containers faster than anyone
#: cold-starts replacements, converting every container in the system into a
#: renter and leaving nothing lendable.  Capping at two keeps an action's
#: burst headroom at 3x (own capacity plus two borrowed) while forcing the
#: third overflow to boot a fresh container that replenishes the supply.
DEFAULT_RENTER_CAP = 2


class LatencyModel:
    """Fixed platform latency components, in seconds."""

    def __init__(self, warm_overhead=0.010, rent_overhead=0.010,
                 restore_startup=0.040, catalyzer_startup=0.040,
                 sched_decision=15e-6):
        for name, value in (("warm_overhead", warm_overhead),
                            ("rent_overhead", rent_overhead),
                            ("restore_startup", restore_startup),
                            ("catalyzer_startup", catalyzer_startup),
                            ("sched_decision", sched_decision)):
            if not value > 0:
                raise InvalidParamError(f"{name} must be positive, got {value}")
        self.warm_overhead = warm_overhead
        self.rent_overhead = rent_overhead
        self.restore_startup = restore_startup
        self.catalyzer_startup = catalyzer_startup
        self.sched_decision = sched_decision


class Query:
    """One invocation: pinned to its arrival order and pre-sampled duration."""

    __slots__ = ("action", "index", "arrival", "exec_duration")

    def __init__(self, action, index, arrival, exec_duration):
        self.action = action
        self.index = index
        self.arrival = arrival
        self.exec_duration = exec_duration


class SharedPrewarmed:
    """The single always-on container of the prewarm_for_all policy."""

    def __init__(self, packed_libraries, covered):
        self.packed_libraries = dict(packed_libraries)
        self.covered = frozenset(covered)
        self.busy = False

    def can_serve(self, action_name):
        return not self.busy and action_name in self.covered


def shared_prewarm_image(registry):
    """Greedy conflict-free library union over the registry, in listing order.

    Returns (libraries, covered_action_names).  An action is covered when all
    of its libraries made it into the union at matching versions; actions with
    no libraries are always covered.
    """
    shared = {}
    covered = []
    for name, manifest in registry.items():
        if manifest.conflicts_with(shared):
            continue
        shared.update(manifest.libraries)
        covered.append(name)
    return shared, covered


class Simulation:
    """One policy, one workload, one seed -> one deterministic report."""

    def __init__(self, actions, workload, policy, seed, latency=None,
                 timeouts=DEFAULT_TIMEOUTS, broker_caps=None,
                 renter_pool_size=2, epoch_period=DEFAULT_EPOCH_PERIOD,
                 sweep_period=DEFAULT_SWEEP_PERIOD,
                 idle_eval_period=DEFAULT_IDLE_EVAL_PERIOD,
                 cold_start_cap=None,
                 renter_cap=DEFAULT_RENTER_CAP, discriminant_mode="consistent",
                 audit_sink=None, raw_latencies=True):
        if policy not in POLICIES:
            raise ConfigError(f"unknown policy {policy!r}; choose from {POLICIES}")
        unknown = [n for n in workload.processes if n not in actions]
        if unknown:
            raise ConfigError(f"workload names unregistered actions: {unknown}")
        if sweep_period <= 0 or epoch_period <= 0 or idle_eval_period <= 0:
            raise ConfigError("sweep, epoch, and idle-eval periods must be positive")
        self.actions = dict(actions)
        self.workload = workload
        self.policy = policy
        self.seed = int(seed)
        self.latency = latency or LatencyModel()
        self.timeouts = timeouts
        self.broker_caps = broker_caps
        self.renter_pool_size = renter_pool_size
        self.epoch_period = float(epoch_period)
        self.sweep_period = float(sweep_period)
        self.idle_eval_period = float(idle_eval_period)
        self.cold_start_cap = cold_start_cap
        self.renter_cap = renter_cap
        self.discriminant_mode = discriminant_mode
        self.audit_sink = audit_sink
        self.raw_latencies = raw_latencies

    # -- setup -------------------------------------------------------------

    def _log_mode(self):
        mode = os.environ.get("PAGURUS_SIM_LOG", "off")
        if mode not in ("off", "audit", "debug"):
            raise ConfigError(
                f"PAGURUS_SIM_LOG must be off, audit, or debug, got {mode!r}")
        return mode

    def _build_state(self):
        mode = self._log_mode()
        self._debug = mode == "debug"
        sink = self.audit_sink
        if sink is None and mode in ("audit", "debug"):
            sink = logger.info
        self.audit = AuditLog(sink=sink)
        self.collector = MetricsCollector(self.policy, self.seed,
                                          self.workload.duration,
                                          raw=self.raw_latencies)
        self._ids = itertools.count(1)
        self._seq = itertools.count()
        self.heap = []
        self.queues = {name: collections.deque() for name in self.actions}
        self._sharing = (self.policy in SHARING_POLICIES
                         and self.renter_cap != 0)

        def on_recycle(container, now):
            self.collector.container_recycled(now)
            if container.origin != container.owner:
                self.collector.rented_delta(container.owner, -1, now)
            self.audit.record(now, "recycle", container.owner, container.id,
                              f"pool={container.pool.value}")

        self.schedulers = {}
        for name, spec in self.actions.items():
            self.schedulers[name] = ActionScheduler(
                spec, lambda: next(self._ids), timeouts=self.timeouts,
                cold_concurrency_cap=self.cold_start_cap,
                renter_cap=self.renter_cap, on_recycle=on_recycle)

        self.broker = None
        if self._sharing:
            registry = {name: spec.manifest for name, spec in self.actions.items()}
            self.broker = Broker(registry, self.schedulers, seed=self.seed,
                                 caps=self.broker_caps,
                                 renter_pool_size=self.renter_pool_size,
                                 epoch_period=self.epoch_period,
                                 audit=self.audit,
                                 discriminant_mode=self.discriminant_mode)

        self.shared = None
        if self.policy == "prewarm_for_all":
            registry = {name: spec.manifest for name, spec in self.actions.items()}
            image, covered = shared_prewarm_image(registry)
            self.shared = SharedPrewarmed(image, covered)
            self.collector.container_launched(0.0, "prewarm")
        elif self.policy == "prewarm_for_each":
            for name, spec in self.actions.items():
                container = Container(next(self._ids), name, 0.0,
                                      packed_libraries=dict(spec.manifest.libraries))
                transition(container, TransitionEvent.BOOT_DONE)
                container.eternal = True
                self.schedulers[name].pools.executant.append(container)
                self.collector.container_launched(0.0, "prewarm")

        self._cold_rng = {name: stream_rng(self.seed, "cold", name)
                          for name in self.actions}

        for name, proc in self.workload.processes.items():
            spec = self.actions[name]
            train = sample_arrivals(proc, self.workload.duration,
                                    stream_rng(self.seed, "arrivals", name))
            exec_rng = stream_rng(self.seed, "exec", name)
            for i, t in enumerate(train):
                q = Query(name, i, float(t),
                          sample_duration(exec_rng, spec.exec_dist, spec.exec_mean))
                self._push(q.arrival, ARRIVAL, q, None, None)

        self._idle_reports = set()
        if self.sweep_period <= self.workload.duration:
            self._push(self.sweep_period, RECYCLE_SWEEP, None, None, None)
        if self._sharing:
            if self.epoch_period <= self.workload.duration:
                self._push(self.epoch_period, REPACK_EPOCH, None, None, None)
            if self.idle_eval_period <= self.workload.duration:
                self._push(self.idle_eval_period, IDLE_SCAN, None, None, None)

    def _push(self, time, kind, a, b, c):
        heapq.heappush(self.heap, (time, next(self._seq), kind, a, b, c))

    # -- per-policy pieces -------------------------------------------------

    def _boot_duration(self, action_name):
        if self.policy in ("restore", "restore_plus_pagurus"):
            return self.latency.restore_startup, "restore"
        if self.policy == "catalyzer_plus_pagurus":
            return self.latency.catalyzer_startup, "restore"
        spec = self.actions[action_name]
        dur = sample_duration(self._cold_rng[action_name], spec.cold_dist,
                              spec.cold_mean)
        return dur, "cold"

    def _start_boot(self, query, now):
        """Cold-path dispatch: boot a container for the query or enqueue it."""
        sched = self.schedulers[query.action]
        out = sched.dispatch_cold(now)
        if out.kind == DispatchOutcome.ENQUEUE:
            self.queues[query.action].append(query)
            return
        boot, path = self._boot_duration(query.action)
        self.collector.container_launched(now, "cold")
        self._push(now + boot, STARTUP_DONE, query, out.container, path)

    def _serve(self, query, container, path, start, overhead):
        """Begin execution on a ready container; completion is scheduled."""
        end = start + self.latency.sched_decision + overhead + query.exec_duration
        self._push(end, EXEC_DONE, query, container, path)

    # -- event handlers ----------------------------------------------------

    def _on_arrival(self, now, query):
        self.collector.record_arrival(query.action)
        sched = self.schedulers[query.action]
        local = sched.dispatch_local(now)
        if local is not None:
            if self.broker is not None:
                if local.reclaimed:
                    self.audit.record(now, "reclaim", query.action,
                                      local.container.id, "in-place")
                self.broker.assert_isolation(local.container, query.action, now)
            self._serve(query, local.container, "warm", now,
                        self.latency.warm_overhead)
            return
        if self.broker is not None and sched.may_rent():
            request = RentRequest(query.action, now,
                                  sched.spec.manifest.libraries)
            found = self.broker.match_rent(request, now)
            if found is not None:
                lender_action, container = found
                self._push(now, RENT_HANDOFF, query, container, lender_action)
                return
        if self.shared is not None and self.shared.can_serve(query.action):
            self.shared.busy = True
            self._serve(query, None, "warm", now, self.latency.warm_overhead)
            return
        self._start_boot(query, now)

    def _on_rent_handoff(self, now, query, container, lender_action):
        sched = self.schedulers[query.action]
        try:
            adopted = self.broker.handoff(lender_action, container,
                                          query.action, now)
        except StaleContainerError:
            # the match went stale (same-instant competitor won); boot instead
            self._start_boot(query, now)
            return
        self.collector.rented_delta(query.action, +1, now)
        transition(adopted, TransitionEvent.INVOKE)
        adopted.last_used_at = query.arrival
        self._serve(query, adopted, "rent", now, self.latency.rent_overhead)

    def _on_startup_done(self, now, query, container, path):
        sched = self.schedulers[query.action]
        sched.finish_cold(container, now)
        transition(container, TransitionEvent.INVOKE)
        # idle age counts from the arrival that triggered this boot
        container.last_used_at = query.arrival
        end = now + self.latency.sched_decision + query.exec_duration
        self._push(end, EXEC_DONE, query, container, path)
        # a boot slot just freed up: start boots for waiting queries
        queue = self.queues[query.action]
        while queue:
            out = sched.dispatch_cold(now)
            if out.kind == DispatchOutcome.ENQUEUE:
                break
            waiting = queue.popleft()
            boot, boot_path = self._boot_duration(waiting.action)
            self.collector.container_launched(now, "cold")
            self._push(now + boot, STARTUP_DONE, waiting, out.container, boot_path)

    def _on_exec_done(self, now, query, container, path):
        if container is None:
            self.shared.busy = False
        else:
            transition(container, TransitionEvent.COMPLETE)
        sched = self.schedulers[query.action]
        e2e = now - query.arrival
        sched.record_completion(query.arrival, e2e, query.exec_duration)
        met = e2e <= sched.spec.qos.latency_target
        self.collector.observe(query.action, query.index, path, query.arrival,
                               e2e, met)
        if container is None:
            return
        # an owned container just went idle: serve the owner's backlog on it
        queue = self.queues.get(container.owner)
        if queue:
            waiting = queue.popleft()
            transition(container, TransitionEvent.INVOKE)
            container.last_used_at = waiting.arrival
            self._serve(waiting, container, "warm", now,
                        self.latency.warm_overhead)

    def _on_recycle_sweep(self, now):
        for sched in self.schedulers.values():
            sched.purge_stale(now)
        nxt = now + self.sweep_period
        if nxt <= self.workload.duration:
            self._push(nxt, RECYCLE_SWEEP, None, None, None)

    def _on_idle_scan(self, now):
        """Per-action lend evaluation: at most one promotion per action per pass.

        Every action whose discriminant approves lending is noted for the next
        planning epoch; if its re-packed image is already built, the spare
        container moves to the lender pool immediately.
        """
        for name, sched in self.schedulers.items():
            candidate = sched.lendable_container(now, mode=self.discriminant_mode)
            if candidate is None:
                continue
            self._idle_reports.add(name)
            if name in self.broker.built_plans:
                self.broker.promote(name, candidate, now)
        nxt = now + self.idle_eval_period
        if nxt <= self.workload.duration:
            self._push(nxt, IDLE_SCAN, None, None, None)

    def _on_repack_epoch(self, now):
        reported = sorted(self._idle_reports)
        self._idle_reports.clear()
        for action, plan, build in self.broker.repack_epoch(now, lendable=reported):
            self._push(now + build, REPACK_DONE, action, plan, None)
        nxt = now + self.epoch_period
        if nxt <= self.workload.duration:
            self._push(nxt, REPACK_EPOCH, None, None, None)

    def _on_repack_done(self, now, action, plan):
        # promotion itself waits for the next evaluation pass, which re-checks
        # the discriminant instead of trusting the epoch-old verdict
        self.broker.complete_repack(action, plan, now, promote=False)

    # -- main loop ---------------------------------------------------------

    def run(self):
        self._build_state()
        heap = self.heap
        last = 0.0
        while heap:
            now, _, kind, a, b, c = heapq.heappop(heap)
            last = now
            if self._debug:
                logger.debug("%.6f %s", now, kind)
            if kind == ARRIVAL:
                self._on_arrival(now, a)
            elif kind == EXEC_DONE:
                self._on_exec_done(now, a, b, c)
            elif kind == STARTUP_DONE:
                self._on_startup_done(now, a, b, c)
            elif kind == RECYCLE_SWEEP:
                self._on_recycle_sweep(now)
            elif kind == IDLE_SCAN:
                self._on_idle_scan(now)
            elif kind == RENT_HANDOFF:
                self._on_rent_handoff(now, a, b, c)
            elif kind == REPACK_EPOCH:
                self._on_repack_epoch(now)
            elif kind == REPACK_DONE:
                self._on_repack_done(now, a, b)
        leftovers = {n: len(q) for n, q in self.queues.items() if q}
        if leftovers:
            raise RuntimeError(f"drained heap with queued queries left: {leftovers}")
        violations = self.broker.isolation_violations if self.broker else 0
        report = self.collector.finalize(self.audit.lines(), violations,
                                         end_time=last)
        done = report.total_completed()
        seen = report.total_arrivals()
        if done != seen:
            raise RuntimeError(f"conservation broken: {seen} arrivals, {done} done")
        return report


def run_simulation(actions, workload, policy, seed, **kwargs):
    """Build and run one Simulation; returns its MetricsReport."""
    return Simulation(actions, workload, policy, seed, **kwargs).run()


def warm_optimal_latencies(actions, workload, seed, latency=None):
    """Per-action end-to-end latencies if every query were served warm.

    Uses the same named streams as a real run with this seed, so entry i here
    pairs with the i-th arrival of the same action in any simulated policy.
    """
    latency = latency or LatencyModel()
    out = {}
    for name, proc in workload.processes.items():
        spec = actions[name]
        train = sample_arrivals(proc, workload.duration,
                                stream_rng(seed, "arrivals", name))
        exec_rng = stream_rng(seed, "exec", name)
        out[name] = [latency.sched_decision + latency.warm_overhead
                     + sample_duration(exec_rng, spec.exec_dist, spec.exec_mean)
                     for _ in train]
    return out
