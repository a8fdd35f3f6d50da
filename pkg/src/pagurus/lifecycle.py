"""Per-action container management: state machine, pools, timeouts, dispatch.

Each action owns three pools.  Executant containers serve only their owner;
lender containers are idle executants re-packed for sharing; renter containers
were taken over from another action's lender.  A container's idle age is
measured from the arrival time of the last query it served, and each pool
recycles at its own timeout, shortest for renters, longest for lenders.
"""

import collections
import enum
import math

from .errors import (
    IllegalTransitionError,
    InvalidParamError,
    PlanMismatchError,
    UnknownActionError,
)
from .queueing import QueueModel, IdleDecision, estimate_rates, idle_discriminant

#: modeled container footprint in MB
CONTAINER_MEMORY_MB = 256

#: default pool timeouts in seconds: renter, executant, lender
DEFAULT_TIMEOUTS = (40.0, 60.0, 120.0)

#: completed queries kept for the measured QoS fraction
QOS_WINDOW = 200

#: seconds of history used when estimating arrival/service rates
RATE_SPAN = 60.0


class ContainerState(enum.Enum):
    COLD_STARTING = "ColdStarting"
    EXECUTANT = "Executant"
    LENDER = "Lender"
    RENTER = "Renter"
    BUSY = "Busy"
    RECYCLED = "Recycled"


class TransitionEvent(enum.Enum):
    BOOT_DONE = "boot-done"
    INVOKE = "invoke"
    COMPLETE = "complete"
    PROMOTE = "promote"
    RENT_GRANTED = "rent-granted"
    TIMEOUT = "timeout"


# legal (state, event) -> successor; BUSY resolves through the container's pool
_EDGES = {
    (ContainerState.COLD_STARTING, TransitionEvent.BOOT_DONE): ContainerState.EXECUTANT,
    (ContainerState.EXECUTANT, TransitionEvent.INVOKE): ContainerState.BUSY,
    (ContainerState.RENTER, TransitionEvent.INVOKE): ContainerState.BUSY,
    # a lender may run a query for its origin action without leaving its pool
    (ContainerState.LENDER, TransitionEvent.INVOKE): ContainerState.BUSY,
    (ContainerState.EXECUTANT, TransitionEvent.PROMOTE): ContainerState.LENDER,
    (ContainerState.LENDER, TransitionEvent.RENT_GRANTED): ContainerState.RENTER,
    (ContainerState.EXECUTANT, TransitionEvent.TIMEOUT): ContainerState.RECYCLED,
    (ContainerState.LENDER, TransitionEvent.TIMEOUT): ContainerState.RECYCLED,
    (ContainerState.RENTER, TransitionEvent.TIMEOUT): ContainerState.RECYCLED,
}


class Container:
    """A simulated container; every state change goes through transition()."""

    def __init__(self, container_id, owner, created_at, packed_libraries=None,
                 memory=CONTAINER_MEMORY_MB):
        self.id = container_id
        self.owner = owner
        self.origin = owner
        self.state = ContainerState.COLD_STARTING
        self.packed_libraries = dict(packed_libraries or {})
        self.sealed_entries = []
        # whose runnable code is currently installed (owner's at birth)
        self.installed_code = owner
        self.created_at = float(created_at)
        # arrival time of the last query served (or readiness time before any)
        self.last_used_at = float(created_at)
        self.memory = memory
        # which pool a busy container returns to on completion
        self.pool = ContainerState.EXECUTANT
        self.promoted_at = None
        self.plan = None
        # eternal containers (pre-provisioned capacity) never time out
        self.eternal = False

    def idle_age(self, now):
        return now - self.last_used_at

    def __repr__(self):
        return (f"Container(id={self.id}, owner={self.owner!r}, "
                f"state={self.state.value}, pool={self.pool.value})")


def transition(container, event):
    """Apply one state-machine event; returns the new state.

    Rejects anything outside the legal edge set, including any event on a
    recycled container and timeouts on busy containers.
    """
    key = (container.state, event)
    if key not in _EDGES and not (container.state is ContainerState.BUSY
                                  and event is TransitionEvent.COMPLETE):
        raise IllegalTransitionError(
            f"container {container.id}: no edge from {container.state.value} "
            f"on {event.value}")
    if container.state is ContainerState.BUSY:
        if container.pool not in (ContainerState.EXECUTANT, ContainerState.RENTER,
                                  ContainerState.LENDER):
            raise IllegalTransitionError(
                f"container {container.id}: busy with invalid home pool "
                f"{container.pool.value}")
        container.state = container.pool
        return container.state
    new_state = _EDGES[key]
    if event is TransitionEvent.INVOKE:
        container.pool = container.state
    elif event is TransitionEvent.RENT_GRANTED:
        container.pool = ContainerState.RENTER
    container.state = new_state
    return new_state


class ActionSpec:
    """Everything the simulator needs to know about one deployed action."""

    DISTRIBUTIONS = ("exponential", "lognormal", "fixed")

    def __init__(self, name, manifest, qos, exec_mean, cold_mean,
                 exec_dist="exponential", cold_dist="fixed"):
        if not (math.isfinite(exec_mean) and exec_mean > 0):
            raise InvalidParamError(f"{name}: exec_mean must be positive, got {exec_mean}")
        if not (math.isfinite(cold_mean) and cold_mean > 0):
            raise InvalidParamError(f"{name}: cold_mean must be positive, got {cold_mean}")
        if exec_dist not in self.DISTRIBUTIONS:
            raise InvalidParamError(f"{name}: unknown exec_dist {exec_dist!r}")
        if cold_dist not in self.DISTRIBUTIONS:
            raise InvalidParamError(f"{name}: unknown cold_dist {cold_dist!r}")
        if qos.latency_target <= exec_mean:
            raise InvalidParamError(
                f"{name}: latency target {qos.latency_target}s must exceed the mean "
                f"execution time {exec_mean}s, else no waiting budget exists")
        self.name = name
        self.manifest = manifest
        self.qos = qos
        self.exec_mean = float(exec_mean)
        self.cold_mean = float(cold_mean)
        self.exec_dist = exec_dist
        self.cold_dist = cold_dist

    @property
    def service_rate(self):
        return 1.0 / self.exec_mean

    def __repr__(self):
        return f"ActionSpec({self.name!r}, exec_mean={self.exec_mean})"


class PoolSet:
    """The three container pools of one action plus their timeouts."""

    def __init__(self, timeouts=DEFAULT_TIMEOUTS):
        t1, t2, t3 = timeouts
        if not (0 < t1 <= t2 <= t3):
            raise InvalidParamError(
                f"timeouts must satisfy 0 < renter <= executant <= lender, got {timeouts}")
        self.timeouts = (float(t1), float(t2), float(t3))
        self.executant = []
        self.lender = []
        self.renter = []

    def pool_of(self, container):
        home = container.pool if container.state is ContainerState.BUSY else container.state
        if home is ContainerState.EXECUTANT:
            return self.executant
        if home is ContainerState.LENDER:
            return self.lender
        if home is ContainerState.RENTER:
            return self.renter
        raise InvalidParamError(f"container {container.id} is not in a pool state")

    def timeout_of(self, container):
        home = container.pool if container.state is ContainerState.BUSY else container.state
        if home is ContainerState.RENTER:
            return self.timeouts[0]
        if home is ContainerState.EXECUTANT:
            return self.timeouts[1]
        return self.timeouts[2]

    def live(self):
        return self.executant + self.renter + self.lender

    def idle_executants(self):
        return [c for c in self.executant if c.state is ContainerState.EXECUTANT]

    def idle_renters(self):
        return [c for c in self.renter if c.state is ContainerState.RENTER]

    def idle_lenders(self):
        return [c for c in self.lender if c.state is ContainerState.LENDER]

    def stale(self, now):
        """Idle containers whose age has reached their pool timeout.

        Ordered renter first, then executant, then lender; age ties and the
        boundary itself (age == timeout) count as stale.
        """
        out = []
        for pool, timeout in ((self.renter, self.timeouts[0]),
                              (self.executant, self.timeouts[1]),
                              (self.lender, self.timeouts[2])):
            for c in pool:
                if (c.state is not ContainerState.BUSY and not c.eternal
                        and c.idle_age(now) >= timeout):
                    out.append(c)
        return out


def recycle_sweep(pools, now):
    """Retire every over-age idle container; returns them in retirement order.

    Renters go before executants before lenders.  Busy containers are never
    touched (their last query is still running) and eternal containers are
    exempt by definition.
    """
    recycled = []
    for pool_list, timeout in ((pools.renter, pools.timeouts[0]),
                               (pools.executant, pools.timeouts[1]),
                               (pools.lender, pools.timeouts[2])):
        stale = [c for c in pool_list
                 if c.state is not ContainerState.BUSY and not c.eternal
                 and c.idle_age(now) >= timeout]
        for container in stale:
            container.pool = container.state  # remember the home pool it died in
            transition(container, TransitionEvent.TIMEOUT)
            pool_list.remove(container)
            recycled.append(container)
    return recycled


class DispatchOutcome:
    """What happened to one query at dispatch time."""

    WARM = "warm"
    RENT = "rent"
    COLD = "cold"
    ENQUEUE = "enqueue"

    def __init__(self, kind, container=None, reclaimed=False):
        self.kind = kind
        self.container = container
        self.reclaimed = reclaimed

    def __repr__(self):
        cid = self.container.id if self.container else None
        return f"DispatchOutcome({self.kind}, container={cid})"


class ActionScheduler:
    """Runtime manager for one action's containers and QoS bookkeeping."""

    def __init__(self, spec, id_alloc, timeouts=DEFAULT_TIMEOUTS,
                 cold_concurrency_cap=None, qos_window=QOS_WINDOW,
                 rate_span=RATE_SPAN, renter_cap=None, on_recycle=None):
        if cold_concurrency_cap is not None and cold_concurrency_cap < 1:
            raise InvalidParamError(
                f"{spec.name}: a cold-start cap below 1 would deadlock the queue")
        if renter_cap is not None and renter_cap < 0:
            raise InvalidParamError(f"{spec.name}: renter_cap must be >= 0")
        self.spec = spec
        self.pools = PoolSet(timeouts)
        self._id_alloc = id_alloc
        self.cold_concurrency_cap = cold_concurrency_cap
        self.cold_in_flight = 0
        self.renter_cap = renter_cap
        self.rate_span = float(rate_span)
        self._qos_flags = collections.deque(maxlen=qos_window)
        self._completions = collections.deque()
        self.path_counts = collections.Counter()
        # observer invoked as on_recycle(container, now) for every retirement
        self.on_recycle = on_recycle

    # ---- measurement -----------------------------------------------------

    def observed_qos(self):
        """Fraction of recent queries that met the latency target.

        An action with no completed queries yet is treated as satisfying its
        target: there is no evidence of a violation.
        """
        if not self._qos_flags:
            return 1.0
        return sum(self._qos_flags) / len(self._qos_flags)

    def record_completion(self, arrival_time, end_to_end, service_duration):
        self._qos_flags.append(1 if end_to_end <= self.spec.qos.latency_target else 0)
        self._completions.append((arrival_time, service_duration))

    def rate_window(self, now):
        """Completed (arrival, duration) pairs inside the estimation span."""
        cutoff = now - self.rate_span
        while self._completions and self._completions[0][0] < cutoff:
            self._completions.popleft()
        return list(self._completions)

    def capacity(self):
        """Containers currently dedicated to this action (lenders excluded)."""
        return len(self.pools.executant) + len(self.pools.renter)

    def current_model(self, now):
        """Queue snapshot from the measurement window, or None without data."""
        window = self.rate_window(now)
        n = self.capacity()
        if not window or n < 1:
            return None
        lam, mu = estimate_rates(window, self.rate_span)
        if lam >= n * mu:
            return None
        return QueueModel(lam, mu, n)

    # ---- lending ---------------------------------------------------------

    def lendable_container(self, now, mode="consistent"):
        """The container this action could surrender right now, if any.

        Applies the queueing discriminant to the measured rates; only actions
        with at least two dedicated containers and an idle executant qualify.
        Returns the least-recently-used idle executant or None.
        """
        self.purge_stale(now)
        idle = self.pools.idle_executants()
        if not idle or self.capacity() < 2:
            return None
        model = self.current_model(now)
        if model is None or model.servers < 2:
            return None
        if self.spec.qos.latency_target <= 1.0 / model.service_rate:
            return None
        qos = self.spec.qos.with_measurement(self.observed_qos())
        verdict = idle_discriminant(model, qos, mode=mode)
        if verdict is not IdleDecision.CAN_LEND:
            return None
        return min(idle, key=lambda c: (c.last_used_at, c.id))

    # ---- dispatch --------------------------------------------------------

    def purge_stale(self, now):
        """Recycle over-age containers before using the pools."""
        recycled = recycle_sweep(self.pools, now)
        if self.on_recycle is not None:
            for container in recycled:
                self.on_recycle(container, now)
        return recycled

    def may_rent(self):
        """Whether the renter pool has room for another borrowed container."""
        return self.renter_cap is None or len(self.pools.renter) < self.renter_cap

    def dispatch_local(self, now, self_reclaim=True):
        """Serve from this action's own containers, or None if none are idle.

        Preference order: idle executant (most recently used first), idle
        renter, then an idle container this action has already lent out.  A
        lent container serves its origin in place — it stays in the lender
        pool, keeps its packed image and sealed entries, and is available to
        renters again as soon as the query finishes.
        """
        self.purge_stale(now)
        for pick in (self.pools.idle_executants(), self.pools.idle_renters()):
            if pick:
                container = max(pick, key=lambda c: (c.last_used_at, c.id))
                transition(container, TransitionEvent.INVOKE)
                container.last_used_at = now
                return DispatchOutcome(DispatchOutcome.WARM, container)
        if not self_reclaim:
            return None
        own = self.pools.idle_lenders()
        if own:
            container = max(own, key=lambda c: (c.last_used_at, c.id))
            transition(container, TransitionEvent.INVOKE)
            container.last_used_at = now
            return DispatchOutcome(DispatchOutcome.WARM, container, reclaimed=True)
        return None

    def dispatch_cold(self, now):
        """Start a cold boot, or ENQUEUE when the concurrency cap is spent."""
        if (self.cold_concurrency_cap is not None
                and self.cold_in_flight >= self.cold_concurrency_cap):
            return DispatchOutcome(DispatchOutcome.ENQUEUE)
        return DispatchOutcome(DispatchOutcome.COLD, self.start_cold(now))

    def dispatch(self, now, rent_lookup=None, self_reclaim=True):
        """Resolve one arriving query to a container or a cold start.

        Preference order: idle executant (most recently used first), idle
        renter, this action's own idle lender served in place, a rented
        container from another action via ``rent_lookup``, then a cold start.
        ENQUEUE is returned only when a cold-start concurrency cap is
        configured and exhausted.
        """
        local = self.dispatch_local(now, self_reclaim=self_reclaim)
        if local is not None:
            return local
        if rent_lookup is not None and self.may_rent():
            container = rent_lookup(now)
            if container is not None:
                transition(container, TransitionEvent.INVOKE)
                container.last_used_at = now
                return DispatchOutcome(DispatchOutcome.RENT, container)
        return self.dispatch_cold(now)

    def start_cold(self, now):
        container = Container(self._id_alloc(), self.spec.name, now,
                              packed_libraries=dict(self.spec.manifest.libraries))
        self.cold_in_flight += 1
        return container

    def finish_cold(self, container, now):
        """Boot completed: the container joins the executant pool."""
        transition(container, TransitionEvent.BOOT_DONE)
        self.cold_in_flight -= 1
        container.last_used_at = now
        self.pools.executant.append(container)
        return container

    def adopt_renter(self, container, now):
        """Take over a container handed off by another action's lender pool."""
        container.owner = self.spec.name
        container.installed_code = self.spec.name
        container.last_used_at = now
        self.pools.renter.append(container)
        return container


def identify_idle(scheduler, model, qos, now, mode="consistent"):
    """The least-recently-used idle executant, if the discriminant allows.

    Works from an explicit queue snapshot and QoS observation; the scheduler's
    ``lendable_container`` is the self-measuring convenience wrapper.
    """
    idle = scheduler.pools.idle_executants()
    if not idle or model.servers < 2:
        return None
    if idle_discriminant(model, qos, mode=mode) is not IdleDecision.CAN_LEND:
        return None
    return min(idle, key=lambda c: (c.last_used_at, c.id))


def promote_to_lender(scheduler, container, plan, now, sealed_entries=()):
    """Rebuild an idle executant from the plan's image and move it to lending.

    The container keeps its identity but now packs the plan's union libraries
    and the renters' sealed code entries; its idle clock restarts.
    """
    if container.owner != plan.lender:
        raise PlanMismatchError(
            f"container {container.id} belongs to {container.owner!r}, "
            f"plan is for {plan.lender!r}")
    if container.state is not ContainerState.EXECUTANT:
        raise PlanMismatchError(
            f"container {container.id} is {container.state.value}, not an idle executant")
    if container not in scheduler.pools.executant:
        raise PlanMismatchError(
            f"container {container.id} is not in {plan.lender!r}'s executant pool")
    scheduler.pools.executant.remove(container)
    transition(container, TransitionEvent.PROMOTE)
    container.packed_libraries = dict(plan.union_libraries)
    container.sealed_entries = list(sealed_entries)
    container.plan = plan
    container.promoted_at = now
    container.last_used_at = now
    scheduler.pools.lender.append(container)
    return container
