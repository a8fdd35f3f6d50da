"""Inter-action container sharing: queueing analysis, re-packing, lifecycle,
broker, and a deterministic discrete-event simulator.

The usual entry points:

* :func:`run_simulation` — one policy, one workload, one seed, one report.
* :func:`load_scenario` — the same, driven by a JSON config file.
* :func:`fixture_actions` — the bundled 11-action catalog used throughout
  the experiments.
* ``pagurus`` (console script) — run, sweep, fixture, and check subcommands.
"""

from .broker import AuditLog, Broker, ControllerKey, SealedCode, UserKey, seal, unseal
from .engine import (
    DEFAULT_RENTER_CAP,
    LatencyModel,
    POLICIES,
    SHARING_POLICIES,
    Simulation,
    run_simulation,
    shared_prewarm_image,
)
from .errors import (
    ConfigError,
    DuplicateActionError,
    EmptyHistogramError,
    EmptyWindowError,
    IllegalTransitionError,
    InvalidParamError,
    MalformedManifestError,
    MismatchedRunsError,
    MissingBaselineError,
    PagurusError,
    PlanMismatchError,
    StaleContainerError,
    UnknownActionError,
    UnstableQueueError,
    WrongAuthorityError,
)
from .fixture import (
    fixture_actions,
    fixture_manifests,
    library_actions,
    no_library_actions,
)
from .lifecycle import (
    CONTAINER_MEMORY_MB,
    DEFAULT_TIMEOUTS,
    ActionScheduler,
    ActionSpec,
    Container,
    ContainerState,
    PoolSet,
    TransitionEvent,
    recycle_sweep,
    transition,
)
from .metrics import (
    Histogram,
    MetricsCollector,
    MetricsReport,
    elimination_rate,
    memory_saving,
    windowed_r_real,
)
from .queueing import (
    IdleDecision,
    QosSpec,
    QueueModel,
    estimate_rates,
    idle_discriminant,
    prob_no_wait,
    stationary_distribution,
    waiting_time_cdf,
)
from .repack import (
    LibraryManifest,
    RepackPlan,
    default_caps,
    format_manifest_lines,
    load_manifest_file,
    read_manifest_lines,
    select_renters,
    similarity,
    validate_plan,
)
from .scenario import DEFAULT_SEED, ScenarioConfig, load_scenario, parse_scenario
from .workload import (
    BatchArrivals,
    BurstArrivals,
    DiurnalArrivals,
    FixedIntervalArrivals,
    PoissonArrivals,
    WorkloadSpec,
    sample_arrivals,
    stream_rng,
)

__version__ = "0.1.0"

__all__ = [
    "AuditLog",
    "Broker",
    "ControllerKey",
    "SealedCode",
    "UserKey",
    "seal",
    "unseal",
    "DEFAULT_RENTER_CAP",
    "LatencyModel",
    "POLICIES",
    "SHARING_POLICIES",
    "Simulation",
    "run_simulation",
    "shared_prewarm_image",
    "ConfigError",
    "DuplicateActionError",
    "EmptyHistogramError",
    "EmptyWindowError",
    "IllegalTransitionError",
    "InvalidParamError",
    "MalformedManifestError",
    "MismatchedRunsError",
    "MissingBaselineError",
    "PagurusError",
    "PlanMismatchError",
    "StaleContainerError",
    "UnknownActionError",
    "UnstableQueueError",
    "WrongAuthorityError",
    "fixture_actions",
    "fixture_manifests",
    "library_actions",
    "no_library_actions",
    "CONTAINER_MEMORY_MB",
    "DEFAULT_TIMEOUTS",
    "ActionScheduler",
    "ActionSpec",
    "Container",
    "ContainerState",
    "PoolSet",
    "TransitionEvent",
    "recycle_sweep",
    "transition",
    "Histogram",
    "MetricsCollector",
    "MetricsReport",
    "elimination_rate",
    "memory_saving",
    "windowed_r_real",
    "IdleDecision",
    "QosSpec",
    "QueueModel",
    "estimate_rates",
    "idle_discriminant",
    "prob_no_wait",
    "stationary_distribution",
    "waiting_time_cdf",
    "LibraryManifest",
    "RepackPlan",
    "default_caps",
    "format_manifest_lines",
    "load_manifest_file",
    "read_manifest_lines",
    "select_renters",
    "similarity",
    "validate_plan",
    "DEFAULT_SEED",
    "ScenarioConfig",
    "load_scenario",
    "parse_scenario",
    "BatchArrivals",
    "BurstArrivals",
    "DiurnalArrivals",
    "FixedIntervalArrivals",
    "PoissonArrivals",
    "WorkloadSpec",
    "sample_arrivals",
    "stream_rng",
    "__version__",
]
