"""Similarity-driven renter selection and lender image planning.

Actions declare extra libraries beyond the base runtime as ``name -> version``
manifests.  When an action can spare a container, a plan is built that packs
that container's image with the union of the lender's libraries and those of a
few selected renter actions, so any of them can take the container over later.
Version strings act purely as conflict filters: two actions pinning different
versions of the same library can never share an image.
"""

import math

import numpy as np

from .errors import (
    DuplicateActionError,
    InvalidParamError,
    MalformedManifestError,
    PlanMismatchError,
)

#: sentinel for an unpinned library version
LATEST = "latest"

#: modeled seconds to install one extra library while building a lender image
DEFAULT_LIB_COST = 2.0

# exclusion reasons recorded on plans
REASON_VERSION_CONFLICT = "VersionConflict"
REASON_UNION_CONFLICT = "UnionConflict"
REASON_NO_SHARED_LIBRARY = "NoSharedLibrary"
REASON_CAP_REACHED = "CapReached"
REASON_NOT_REPACKABLE = "NotRepackable"


class LibraryManifest:
    """An action's declared extra libraries.

    ``has_extra_libraries`` distinguishes the two flavors of action: those with
    dependencies beyond the base runtime and those without any.  Actions that
    ship a custom image instead of a manifest are marked non-repackable and
    never participate in sharing plans.
    """

    def __init__(self, action_name, libraries=None, repackable=True):
        if not isinstance(action_name, str) or not action_name:
            raise MalformedManifestError(f"action name must be a nonempty string, got {action_name!r}")
        libs = {}
        for lib, version in (libraries or {}).items():
            if not isinstance(lib, str) or not lib:
                raise MalformedManifestError(
                    f"{action_name}: library name must be a nonempty string, got {lib!r}")
            if version is None:
                version = LATEST
            if not isinstance(version, str) or not version:
                raise MalformedManifestError(
                    f"{action_name}: version for {lib} must be a nonempty string, got {version!r}")
            libs[lib] = version
        self.action_name = action_name
        self.libraries = libs
        self.repackable = bool(repackable)

    @property
    def has_extra_libraries(self):
        return bool(self.libraries)

    def conflicts_with(self, libraries):
        """Library names pinned to a different version in ``libraries``."""
        return sorted(lib for lib, ver in self.libraries.items()
                      if lib in libraries and libraries[lib] != ver)

    def __repr__(self):
        kind = "L" if self.has_extra_libraries else "NL"
        return f"LibraryManifest({self.action_name!r}, {kind}, {self.libraries})"


class RepackPlan:
    """One lender action's sharing plan: who may rent, and the packed image."""

    def __init__(self, lender, renters, union_libraries, build_time_estimate,
                 excluded, lender_libraries, caps):
        self.lender = lender
        self.renters = list(renters)
        self.union_libraries = dict(union_libraries)
        self.build_time_estimate = float(build_time_estimate)
        self.excluded = list(excluded)
        self.lender_libraries = dict(lender_libraries)
        self.caps = tuple(caps)

    def lists(self, action_name):
        """True when the action may take a container built from this plan."""
        return action_name in self.renters

    def __repr__(self):
        return (f"RepackPlan(lender={self.lender!r}, renters={self.renters}, "
                f"union={sorted(self.union_libraries)})")


def ingest_manifests(raw):
    """Normalize a collection of manifest records into a registry.

    Records may be ``LibraryManifest`` objects, ``(name, libraries)`` pairs, or
    dicts with ``name`` / ``libraries`` / optional ``repackable`` keys.
    Returns a dict keyed by action name, insertion-ordered.
    """
    registry = {}
    for record in raw:
        if isinstance(record, LibraryManifest):
            manifest = record
        elif isinstance(record, dict):
            unknown = set(record) - {"name", "libraries", "repackable"}
            if unknown:
                raise MalformedManifestError(f"unknown manifest keys {sorted(unknown)}")
            manifest = LibraryManifest(record.get("name"), record.get("libraries"),
                                       record.get("repackable", True))
        else:
            try:
                name, libraries = record
            except (TypeError, ValueError):
                raise MalformedManifestError(f"unparseable manifest record {record!r}")
            manifest = LibraryManifest(name, libraries)
        if manifest.action_name in registry:
            raise DuplicateActionError(f"duplicate action {manifest.action_name!r}")
        registry[manifest.action_name] = manifest
    return registry


def read_manifest_lines(lines, source="<manifest>"):
    """Parse the tab-separated manifest format into a registry.

    One action per line: ``name<TAB>L|NL<TAB>lib=version,lib=version,...``.
    The third field is empty for NL actions; a library without ``=version``
    resolves to the "latest" sentinel.  Blank lines and ``#`` comments are
    skipped.  Errors carry the 1-based line number.
    """
    records = []
    seen = set()
    for line_no, line in enumerate(lines, start=1):
        text = line.rstrip("\n")
        if not text.strip() or text.lstrip().startswith("#"):
            continue
        parts = text.split("\t")
        if len(parts) == 2:
            parts.append("")
        if len(parts) != 3:
            raise MalformedManifestError(
                f"{source}:{line_no}: expected 'name<TAB>L|NL<TAB>libs', got {text!r}",
                line_no=line_no)
        name, kind, lib_field = (p.strip() for p in parts)
        if not name:
            raise MalformedManifestError(f"{source}:{line_no}: empty action name",
                                         line_no=line_no)
        if kind not in ("L", "NL"):
            raise MalformedManifestError(
                f"{source}:{line_no}: kind must be L or NL, got {kind!r}", line_no=line_no)
        libraries = {}
        if lib_field:
            for chunk in lib_field.split(","):
                chunk = chunk.strip()
                if not chunk:
                    raise MalformedManifestError(
                        f"{source}:{line_no}: empty library entry", line_no=line_no)
                lib, _, version = chunk.partition("=")
                lib = lib.strip()
                version = version.strip() or LATEST
                if not lib:
                    raise MalformedManifestError(
                        f"{source}:{line_no}: library entry {chunk!r} has no name",
                        line_no=line_no)
                if lib in libraries:
                    raise MalformedManifestError(
                        f"{source}:{line_no}: library {lib!r} listed twice", line_no=line_no)
                libraries[lib] = version
        if kind == "L" and not libraries:
            raise MalformedManifestError(
                f"{source}:{line_no}: action tagged L but lists no libraries",
                line_no=line_no)
        if kind == "NL" and libraries:
            raise MalformedManifestError(
                f"{source}:{line_no}: action tagged NL but lists libraries",
                line_no=line_no)
        if name in seen:
            raise MalformedManifestError(
                f"{source}:{line_no}: duplicate action {name!r}", line_no=line_no)
        seen.add(name)
        records.append(LibraryManifest(name, libraries))
    return ingest_manifests(records)


def load_manifest_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return read_manifest_lines(fh, source=str(path))


def format_manifest_lines(registry):
    """Inverse of read_manifest_lines; emits one line per action."""
    lines = []
    for manifest in registry.values():
        kind = "L" if manifest.has_extra_libraries else "NL"
        libs = ",".join(f"{lib}={ver}" for lib, ver in sorted(manifest.libraries.items()))
        lines.append(f"{manifest.action_name}\t{kind}\t{libs}")
    return lines


def library_universe(registry):
    """Sorted list of every library name any registered action declares."""
    names = set()
    for manifest in registry.values():
        names.update(manifest.libraries)
    return sorted(names)


def candidate_filter(lender, registry):
    """Actions that share at least one library with the lender without clashing.

    The lender itself, actions with a version contradiction, and non-repackable
    actions are removed.  An empty result is valid (the lender then falls back
    to a random draw in select_renters).
    """
    lender_libs = lender.libraries
    out = []
    for manifest in registry.values():
        if manifest.action_name == lender.action_name or not manifest.repackable:
            continue
        shared = set(manifest.libraries) & set(lender_libs)
        if not shared:
            continue
        if manifest.conflicts_with(lender_libs):
            continue
        out.append(manifest)
    return out


def similarity(a, b, universe):
    """Cosine similarity of the two actions' binary library-presence vectors.

    Versions are ignored here; they only matter for conflict filtering.
    Defined as 0.0 when either action declares no libraries.
    """
    names_a = set(a.libraries)
    names_b = set(b.libraries)
    missing = (names_a | names_b) - set(universe)
    if missing:
        raise InvalidParamError(f"universe is missing libraries {sorted(missing)}")
    if not names_a or not names_b:
        return 0.0
    shared = len(names_a & names_b)
    return shared / math.sqrt(len(names_a) * len(names_b))


def default_caps(registry, renter_pool_size):
    """Per-lender renter caps sized so every action gets a chance somewhere.

    With ``renter_pool_size`` lenders expected to hold plans at once, ceiling
    division over each action flavor guarantees the flavors' populations are
    covered collectively.
    """
    if renter_pool_size < 1 or int(renter_pool_size) != renter_pool_size:
        raise InvalidParamError(
            f"renter_pool_size must be a positive integer, got {renter_pool_size}")
    n_l = sum(1 for m in registry.values() if m.has_extra_libraries)
    n_nl = len(registry) - n_l
    return (math.ceil(n_l / renter_pool_size), math.ceil(n_nl / renter_pool_size))


def _rng_from(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def select_renters(lender, registry, caps, seed, per_lib_cost=None):
    """Build a lender's sharing plan: pick renters, union the libraries.

    Library-carrying candidates are ranked by similarity (name order breaks
    ties) and accepted greedily while the packed union stays conflict-free,
    up to ``caps[0]``.  A lender with no candidates at all instead draws
    conflict-free library-carrying actions uniformly at random.  Actions
    without extra libraries cost nothing to include, so ``caps[1]`` of them are
    drawn uniformly at random.  Fully deterministic under a fixed seed.
    """
    n_l_cap, n_nl_cap = caps
    if n_l_cap < 0 or n_nl_cap < 0:
        raise InvalidParamError(f"caps must be nonnegative, got {caps}")
    if lender.action_name not in registry:
        raise InvalidParamError(f"lender {lender.action_name!r} is not registered")
    rng = _rng_from(seed)
    union = dict(lender.libraries)
    excluded = []
    selected_l = []

    candidates = candidate_filter(lender, registry)
    # record why each library-carrying peer fell out of the candidate set
    for manifest in registry.values():
        if manifest.action_name == lender.action_name or not manifest.has_extra_libraries:
            continue
        if not manifest.repackable:
            excluded.append((manifest.action_name, REASON_NOT_REPACKABLE))
        elif manifest.conflicts_with(lender.libraries):
            excluded.append((manifest.action_name, REASON_VERSION_CONFLICT))
        elif not set(manifest.libraries) & set(lender.libraries):
            excluded.append((manifest.action_name, REASON_NO_SHARED_LIBRARY))

    if candidates:
        universe = library_universe(registry)
        scored = sorted(
            candidates,
            key=lambda m: (-similarity(lender, m, universe), m.action_name))
        pool = scored
    else:
        # nobody overlaps: draw among conflict-free library-carrying actions
        eligible = [m for m in registry.values()
                    if m.has_extra_libraries and m.repackable
                    and m.action_name != lender.action_name
                    and not m.conflicts_with(lender.libraries)]
        order = rng.permutation(len(eligible))
        pool = [eligible[i] for i in order]

    for manifest in pool:
        if len(selected_l) >= n_l_cap:
            excluded.append((manifest.action_name, REASON_CAP_REACHED))
            continue
        clash = manifest.conflicts_with(union)
        if clash:
            excluded.append((manifest.action_name, REASON_UNION_CONFLICT))
            continue
        union.update(manifest.libraries)
        selected_l.append(manifest.action_name)

    no_lib_actions = [m.action_name for m in registry.values()
                      if not m.has_extra_libraries and m.repackable
                      and m.action_name != lender.action_name]
    if len(no_lib_actions) <= n_nl_cap:
        selected_nl = list(no_lib_actions)
    else:
        picks = rng.choice(len(no_lib_actions), size=n_nl_cap, replace=False)
        selected_nl = [no_lib_actions[i] for i in picks]

    plan = RepackPlan(
        lender=lender.action_name,
        renters=selected_l + selected_nl,
        union_libraries=union,
        build_time_estimate=0.0,
        excluded=excluded,
        lender_libraries=lender.libraries,
        caps=(n_l_cap, n_nl_cap),
    )
    plan.build_time_estimate = estimate_build(plan, per_lib_cost)
    return plan


def estimate_build(plan, per_lib_cost=None, default_cost=DEFAULT_LIB_COST):
    """Modeled seconds to build the plan's image on top of the lender's base.

    Only libraries absent from the lender's own image cost anything; each costs
    its entry in ``per_lib_cost`` or the flat default.
    """
    costs = per_lib_cost or {}
    extra = [lib for lib in plan.union_libraries if lib not in plan.lender_libraries]
    return float(sum(costs.get(lib, default_cost) for lib in extra))


def validate_plan(plan, registry):
    """Raise PlanMismatchError unless the plan satisfies every invariant.

    Checked: the lender never rents from itself, renters are unique and
    registered, the union carries one version per library consistent with every
    participant, and each renter's manifest is version-exactly covered.
    """
    if plan.lender in plan.renters:
        raise PlanMismatchError(f"{plan.lender} lists itself as a renter")
    if len(set(plan.renters)) != len(plan.renters):
        raise PlanMismatchError(f"{plan.lender}: duplicate renters {plan.renters}")
    for lib, ver in plan.lender_libraries.items():
        if plan.union_libraries.get(lib) != ver:
            raise PlanMismatchError(
                f"{plan.lender}: union drops or rewrites own library {lib}")
    n_l = n_nl = 0
    for renter in plan.renters:
        if renter not in registry:
            raise PlanMismatchError(f"{plan.lender}: unknown renter {renter!r}")
        manifest = registry[renter]
        if manifest.has_extra_libraries:
            n_l += 1
        else:
            n_nl += 1
        for lib, ver in manifest.libraries.items():
            have = plan.union_libraries.get(lib)
            if have != ver:
                raise PlanMismatchError(
                    f"{plan.lender}: renter {renter} needs {lib}={ver}, union has {have}")
    if n_l > plan.caps[0] or n_nl > plan.caps[1]:
        raise PlanMismatchError(
            f"{plan.lender}: renter counts ({n_l}, {n_nl}) exceed caps {plan.caps}")
    return plan
