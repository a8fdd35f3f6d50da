"""System-wide container sharing: planning epochs, rent matching, sealed code.

One broker watches every action.  On a fixed period it asks each action
whether it can spare a container, builds (or reuses) a sharing plan for those
that can, and later — once the re-packed image is "built" — promotes the spare
container to the lender pool with the plan's renters' code inside, sealed.

Code entries travel opaque.  Each is renamed to one canonical entry point and
can only be opened by the authority it was sealed with; the broker opens the
renter's own entry at handoff, wipes everything else, and an isolation check
runs at every handoff and invoke to prove no foreign code is ever exposed.
"""

import zlib

import numpy as np

from .errors import (
    InvalidParamError,
    StaleContainerError,
    UnknownActionError,
    WrongAuthorityError,
)
from .lifecycle import ContainerState, TransitionEvent, promote_to_lender, transition
from .repack import default_caps, estimate_build, select_renters

#: every sealed entry is renamed to this fixed entry-point before packing
CANONICAL_ENTRY = "entry.run"

#: default seconds between planning epochs
DEFAULT_EPOCH_PERIOD = 60.0


class UserKey:
    """Authority held by one action's owner."""

    def __init__(self, action_name):
        self.action_name = action_name

    def __eq__(self, other):
        return isinstance(other, UserKey) and other.action_name == self.action_name

    def __hash__(self):
        return hash(("user", self.action_name))

    def __repr__(self):
        return f"UserKey({self.action_name!r})"


class ControllerKey:
    """Authority held by the sharing broker itself."""

    def __eq__(self, other):
        return isinstance(other, ControllerKey)

    def __hash__(self):
        return hash("controller")

    def __repr__(self):
        return "ControllerKey()"


class SealedCode:
    """An opaque code entry; the payload is only reachable through unseal()."""

    def __init__(self, payload, owner, sealed_with):
        self._payload = bytes(payload)
        self.owner = owner
        self.sealed_with = sealed_with
        self.canonical_name = CANONICAL_ENTRY
        self.size = len(self._payload)

    def unseal(self, authority):
        if authority != self.sealed_with:
            raise WrongAuthorityError(
                f"entry owned by {self.owner!r} is not sealed for {authority!r}")
        return self._payload

    def __repr__(self):
        return f"SealedCode(owner={self.owner!r}, size={self.size}, <opaque>)"


def seal(payload, owner, authority):
    return SealedCode(payload, owner, authority)


def unseal(entry, authority):
    return entry.unseal(authority)


class RentRequest:
    """One action asking for somebody's lender container."""

    def __init__(self, requester, submitted_at, required_libraries):
        self.requester = requester
        self.submitted_at = float(submitted_at)
        self.required_libraries = dict(required_libraries)

    def __repr__(self):
        return f"RentRequest({self.requester!r}, at={self.submitted_at})"


class AuditLog:
    """Line-oriented record of every sharing-relevant event."""

    def __init__(self, sink=None):
        self.entries = []
        self._sink = sink

    def record(self, timestamp, event_kind, actor, container_id, detail=""):
        line = f"{timestamp:.6f} {event_kind} {actor} {container_id} {detail}".rstrip()
        self.entries.append(line)
        if self._sink is not None:
            self._sink(line)

    def lines(self):
        return list(self.entries)

    def count(self, event_kind):
        prefix = f" {event_kind} "
        return sum(1 for line in self.entries if prefix in line)


class Broker:
    """The inter-action scheduler: plans, promotes, matches, and hands off."""

    def __init__(self, registry, schedulers, seed, caps=None, renter_pool_size=2,
                 epoch_period=DEFAULT_EPOCH_PERIOD, audit=None, per_lib_cost=None,
                 discriminant_mode="consistent"):
        self.registry = registry
        self.schedulers = schedulers
        self.seed = int(seed)
        if caps is None:
            # library actions compete for similarity slots; plain actions cost
            # nothing to include, so every plan carries all of them
            n_l = default_caps(registry, renter_pool_size)[0]
            n_nl = sum(1 for m in registry.values() if not m.has_extra_libraries)
            caps = (n_l, n_nl)
        self.caps = tuple(caps)
        self.epoch_period = float(epoch_period)
        self.audit = audit if audit is not None else AuditLog()
        self.per_lib_cost = per_lib_cost
        self.discriminant_mode = discriminant_mode
        self.controller_key = ControllerKey()
        self.code_store = {}
        self.plan_cache = {}
        self.built_plans = {}
        self.lender_index = []
        self.epoch_count = 0
        self.isolation_violations = 0
        self.rent_matches = 0

    # ---- code registry ---------------------------------------------------

    def register_code(self, action_name, payload):
        if action_name not in self.registry:
            raise UnknownActionError(action_name)
        self.code_store[action_name] = bytes(payload)

    def _sealed_entries_for(self, plan):
        entries = []
        for renter in plan.renters:
            payload = self.code_store.get(renter, renter.encode())
            entries.append(seal(payload, renter, self.controller_key))
        return entries

    # ---- planning epochs -------------------------------------------------

    def _epoch_rng(self, epoch_index, lender_name):
        tag = zlib.crc32(lender_name.encode("utf-8"))
        return np.random.default_rng(
            np.random.SeedSequence([self.seed, epoch_index, tag]))

    def poll_lendable(self, now):
        """Ask every action for a spare container; the idle notifications."""
        lendable = []
        for name in self.registry:
            sched = self.schedulers.get(name)
            if sched is None:
                continue
            container = sched.lendable_container(now, mode=self.discriminant_mode)
            if container is not None:
                lendable.append(name)
        return lendable

    def build_plans(self, lendable_actions, epoch_index):
        """One plan per notifying action; cached images rebuild only on change.

        Returns a list of (action_name, plan, build_seconds).  A plan whose
        packed-library union matches the cached one is re-emitted as-is with
        zero build time.
        """
        out = []
        for name in lendable_actions:
            manifest = self.registry[name]
            if not manifest.repackable:
                continue
            rng = self._epoch_rng(epoch_index, name)
            fresh = select_renters(manifest, self.registry, self.caps, rng,
                                   per_lib_cost=self.per_lib_cost)
            cached = self.plan_cache.get(name)
            if cached is not None and cached.union_libraries == fresh.union_libraries:
                out.append((name, cached, 0.0))
                continue
            self.plan_cache[name] = fresh
            build = estimate_build(fresh, self.per_lib_cost)
            out.append((name, fresh, build))
        return out

    def repack_epoch(self, now, lendable=None):
        """Run one planning epoch; returns (action, plan, build_seconds) rows."""
        self.epoch_count += 1
        if lendable is None:
            lendable = self.poll_lendable(now)
        return self.build_plans(lendable, self.epoch_count)

    def complete_repack(self, action_name, plan, now, promote=True):
        """Image ready: the plan goes live and may promote a spare container.

        With ``promote`` the action's least-recently-used idle executant (if
        any, and if capacity allows) becomes a lender on the spot.  Callers
        that promote on their own evaluation cadence pass ``promote=False``
        and only mark the image as available.
        """
        self.built_plans[action_name] = plan
        if not promote:
            return None
        sched = self.schedulers[action_name]
        sched.purge_stale(now)
        idle = sched.pools.idle_executants()
        if not idle or sched.capacity() < 2:
            return None
        container = min(idle, key=lambda c: (c.last_used_at, c.id))
        return self.promote(action_name, container, now)

    def promote(self, action_name, container, now):
        """Move one idle executant into the lender pool under the live plan."""
        plan = self.built_plans[action_name]
        promote_to_lender(self.schedulers[action_name], container, plan, now,
                          sealed_entries=self._sealed_entries_for(plan))
        self.lender_index.append(container)
        self.audit.record(now, "promote", action_name, container.id,
                          f"renters={','.join(plan.renters)}")
        return container

    # ---- renting ---------------------------------------------------------

    def match_rent(self, request, now=None):
        """Find the oldest-promoted live lender container listing the requester.

        The container must pack every library the requester needs at the exact
        version.  Returns (lender_action, container) or None.
        """
        if request.requester not in self.registry:
            raise UnknownActionError(request.requester)
        manifest = self.registry[request.requester]
        if request.required_libraries != manifest.libraries:
            raise InvalidParamError(
                f"rent request for {request.requester!r} does not match its manifest")
        # drop departed containers; a lender briefly busy with its own origin's
        # query stays indexed, it just cannot be matched until it is idle again
        self.lender_index = [
            c for c in self.lender_index
            if c.state is ContainerState.LENDER
            or (c.state is ContainerState.BUSY and c.pool is ContainerState.LENDER)]
        best = None
        for container in self.lender_index:
            if container.state is not ContainerState.LENDER:
                continue
            plan = container.plan
            if plan is None or not plan.lists(request.requester):
                continue
            packed = container.packed_libraries
            if any(packed.get(lib) != ver
                   for lib, ver in request.required_libraries.items()):
                continue
            if best is None or ((container.promoted_at, container.id)
                                < (best.promoted_at, best.id)):
                best = container
        if best is None:
            return None
        when = request.submitted_at if now is None else now
        self.audit.record(when, "match", request.requester, best.id,
                          f"lender={best.owner}")
        return best.owner, best

    def handoff(self, lender_action, container, requester, now):
        """Clean the container, open the requester's code, transfer ownership.

        Raises StaleContainerError if the container left the lender pool since
        the match (recycled or claimed); callers fall back to a cold start.
        """
        lender_sched = self.schedulers[lender_action]
        if (container.state is not ContainerState.LENDER
                or container not in lender_sched.pools.lender):
            raise StaleContainerError(
                f"container {container.id} is no longer lendable ({container.state.value})")
        entry = next((e for e in container.sealed_entries if e.owner == requester), None)
        if entry is None:
            raise StaleContainerError(
                f"container {container.id} carries no sealed entry for {requester!r}")
        payload = unseal(entry, self.controller_key)
        # lender-origin data and every other renter's sealed entry vanish
        # together with the unsealed copy of the requester's own entry
        container.sealed_entries = []
        container.plan = None
        lender_sched.pools.lender.remove(container)
        if container in self.lender_index:
            self.lender_index.remove(container)
        transition(container, TransitionEvent.RENT_GRANTED)
        adopted = self.schedulers[requester].adopt_renter(container, now)
        adopted.installed_payload = payload
        self.rent_matches += 1
        self.audit.record(now, "handoff", requester, container.id,
                          f"from={lender_action}")
        self.assert_isolation(container, requester, now)
        return container

    def rent(self, requester, now):
        """match + handoff in one step; the engine's rent-path hook."""
        manifest = self.registry[requester]
        request = RentRequest(requester, now, manifest.libraries)
        found = self.match_rent(request, now)
        if found is None:
            return None
        lender_action, container = found
        try:
            return self.handoff(lender_action, container, requester, now)
        except StaleContainerError:
            return None

    # ---- security hook ---------------------------------------------------

    def assert_isolation(self, container, acting_action, now):
        """Prove the acting action can reach no other action's code or data.

        Counts (never raises) so a full run reports the total number of
        isolation violations; any nonzero count is a failed contract.
        """
        ok = container.installed_code == acting_action
        for entry in container.sealed_entries:
            try:
                entry.unseal(UserKey(acting_action))
            except WrongAuthorityError:
                continue
            if entry.owner != acting_action:
                ok = False
        if not ok:
            self.isolation_violations += 1
            self.audit.record(now, "violation", acting_action, container.id,
                              "isolation breach")
        return ok
