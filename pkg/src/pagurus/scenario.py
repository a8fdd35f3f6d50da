"""Structured scenario documents: JSON in, validated simulation inputs out.

A scenario file names the deployed actions (manifests, QoS, execution and
startup dynamics), the arrival process per action, the platform latency
model, and which policies to run.  Everything is validated at load time;
errors carry the offending field path so a typo in a large document is
findable without a stack trace.
"""

import json
import os

from .engine import (
    DEFAULT_EPOCH_PERIOD,
    DEFAULT_IDLE_EVAL_PERIOD,
    DEFAULT_RENTER_CAP,
    DEFAULT_SWEEP_PERIOD,
    POLICIES,
    LatencyModel,
    Simulation,
)
from .errors import ConfigError, MalformedManifestError, PagurusError
from .lifecycle import DEFAULT_TIMEOUTS, ActionSpec
from .queueing import QosSpec
from .repack import LibraryManifest, load_manifest_file
from .workload import (
    BatchArrivals,
    BurstArrivals,
    DiurnalArrivals,
    FixedIntervalArrivals,
    PoissonArrivals,
    WorkloadSpec,
)

DEFAULT_SEED = 20230823

#: accepted arrival process kinds and their constructor fields
PROCESS_KINDS = {
    "poisson": (PoissonArrivals, ("rate",), ()),
    "diurnal": (DiurnalArrivals, ("low_rate", "peak_rate", "period"), ()),
    "burst": (BurstArrivals, ("base_rate", "multiplier", "window"), ()),
    "fixed_interval": (FixedIntervalArrivals, ("period",), ("offset", "count")),
    "batch": (BatchArrivals, ("period", "size"), ("offset",)),
}

_LATENCY_FIELDS = ("warm_overhead", "rent_overhead", "restore_startup",
                   "catalyzer_startup", "sched_decision")
_TIMEOUT_FIELDS = ("executant", "lender", "renter")


def _fail(path, message):
    raise ConfigError(f"{path}: {message}")


def _require_mapping(value, path):
    if not isinstance(value, dict):
        _fail(path, f"expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(data, allowed, path):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        _fail(path, f"unknown field(s) {unknown}; allowed: {sorted(allowed)}")


def _number(data, key, path, default=None, required=False):
    if key not in data:
        if required:
            _fail(path, f"missing required field {key!r}")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{path}.{key}", f"expected a number, got {value!r}")
    return value


def _integer(data, key, path, default=None, required=False):
    if key not in data:
        if required:
            _fail(path, f"missing required field {key!r}")
        return default
    value = _number(data, key, path, required=True)
    if int(value) != value:
        _fail(f"{path}.{key}", f"expected an integer, got {value!r}")
    return int(value)


class ScenarioConfig:
    """A fully validated scenario: ready to build Simulations from."""

    def __init__(self, actions, workload, latency, policies, seeds, sim_kwargs):
        self.actions = actions
        self.workload = workload
        self.latency = latency
        self.policies = list(policies)
        self.seeds = list(seeds)
        self.seed = self.seeds[0]
        self.sim_kwargs = dict(sim_kwargs)

    def simulation(self, policy, seed=None, **overrides):
        kwargs = dict(self.sim_kwargs)
        kwargs.update(overrides)
        return Simulation(self.actions, self.workload, policy,
                          self.seed if seed is None else seed,
                          latency=self.latency, **kwargs)

    def run(self, policy, seed=None, **overrides):
        return self.simulation(policy, seed=seed, **overrides).run()


def _parse_qos(data, path):
    data = _require_mapping(data, path)
    _reject_unknown(data, ("latency_target", "required_percentile"), path)
    target = _number(data, "latency_target", path, required=True)
    required = _number(data, "required_percentile", path, required=True)
    try:
        return QosSpec(target, required)
    except PagurusError as exc:
        _fail(path, str(exc))


def _parse_libraries(data, path):
    data = _require_mapping(data, path)
    out = {}
    for lib, version in data.items():
        if not isinstance(version, str) or not version.strip():
            _fail(f"{path}.{lib}", f"version must be a nonempty string, got {version!r}")
        out[lib] = version
    return out


def _parse_action(name, data, path, file_registry):
    data = _require_mapping(data, path)
    _reject_unknown(data, ("libraries", "repackable", "exec_mean", "cold_mean",
                           "exec_dist", "cold_dist", "qos"), path)
    if "libraries" in data:
        manifest = LibraryManifest(name, _parse_libraries(data["libraries"],
                                                          f"{path}.libraries"),
                                   data.get("repackable", True))
    elif name in file_registry:
        manifest = file_registry[name]
    else:
        manifest = LibraryManifest(name, {}, data.get("repackable", True))
    qos = _parse_qos(data.get("qos"), f"{path}.qos") if "qos" in data else None
    if qos is None:
        _fail(path, "missing required field 'qos'")
    exec_mean = _number(data, "exec_mean", path, required=True)
    cold_mean = _number(data, "cold_mean", path, required=True)
    try:
        return ActionSpec(name, manifest, qos, exec_mean, cold_mean,
                          exec_dist=data.get("exec_dist", "exponential"),
                          cold_dist=data.get("cold_dist", "fixed"))
    except PagurusError as exc:
        _fail(path, str(exc))


def _parse_process(name, data, path):
    data = _require_mapping(data, path)
    kind = data.get("kind")
    if kind not in PROCESS_KINDS:
        _fail(f"{path}.kind",
              f"expected one of {sorted(PROCESS_KINDS)}, got {kind!r}")
    ctor, required, optional = PROCESS_KINDS[kind]
    _reject_unknown(data, ("kind",) + required + optional, path)
    kwargs = {}
    for field in required:
        if field not in data:
            _fail(path, f"missing required field {field!r} for kind {kind!r}")
        kwargs[field] = data[field]
    for field in optional:
        if field in data:
            kwargs[field] = data[field]
    if "window" in kwargs:
        window = kwargs["window"]
        if (not isinstance(window, (list, tuple)) or len(window) != 2
                or not all(isinstance(v, (int, float)) for v in window)):
            _fail(f"{path}.window", f"expected [start, end], got {window!r}")
        kwargs["window"] = tuple(window)
    for field, value in kwargs.items():
        if field != "window" and (isinstance(value, bool)
                                  or not isinstance(value, (int, float))):
            _fail(f"{path}.{field}", f"expected a number, got {value!r}")
    try:
        return ctor(**kwargs)
    except PagurusError as exc:
        _fail(path, str(exc))


def _parse_latency(data, path):
    data = _require_mapping(data, path)
    _reject_unknown(data, _LATENCY_FIELDS, path)
    kwargs = {f: _number(data, f, path) for f in _LATENCY_FIELDS if f in data}
    try:
        return LatencyModel(**kwargs)
    except PagurusError as exc:
        _fail(path, str(exc))


def _parse_timeouts(data, path):
    data = _require_mapping(data, path)
    _reject_unknown(data, _TIMEOUT_FIELDS, path)
    out = []
    for field, default in zip(_TIMEOUT_FIELDS, DEFAULT_TIMEOUTS):
        value = _number(data, field, path, default=default)
        if value <= 0:
            _fail(f"{path}.{field}", f"must be positive, got {value}")
        out.append(float(value))
    return tuple(out)


def parse_scenario(data, source="<config>", base_dir="."):
    """Validate a decoded scenario document into a ScenarioConfig."""
    data = _require_mapping(data, source)
    _reject_unknown(data, ("duration", "policies", "policy", "seed", "seeds",
                           "actions", "workload", "latency", "timeouts",
                           "manifest_file", "renter_pool_size", "renter_cap",
                           "caps", "cold_start_cap", "epoch_period",
                           "sweep_period", "idle_eval_period",
                           "discriminant_mode"), source)

    duration = _number(data, "duration", source, required=True)
    if duration <= 0:
        _fail(f"{source}.duration", f"must be positive, got {duration}")

    raw_policies = data.get("policies", data.get("policy", ["pagurus"]))
    if isinstance(raw_policies, str):
        raw_policies = [raw_policies]
    if not isinstance(raw_policies, list) or not raw_policies:
        _fail(f"{source}.policies", f"expected a policy name or list, got {raw_policies!r}")
    for policy in raw_policies:
        if policy not in POLICIES:
            _fail(f"{source}.policies",
                  f"unknown policy {policy!r}; choose from {list(POLICIES)}")

    if "seeds" in data:
        raw_seeds = data["seeds"]
        if (not isinstance(raw_seeds, list) or not raw_seeds
                or not all(isinstance(s, int) and not isinstance(s, bool)
                           for s in raw_seeds)):
            _fail(f"{source}.seeds", f"expected a nonempty list of integers, got {raw_seeds!r}")
        seeds = list(raw_seeds)
    else:
        seeds = [_integer(data, "seed", source, default=DEFAULT_SEED)]

    file_registry = {}
    if "manifest_file" in data:
        raw_path = data["manifest_file"]
        if not isinstance(raw_path, str):
            _fail(f"{source}.manifest_file", f"expected a path, got {raw_path!r}")
        resolved = raw_path if os.path.isabs(raw_path) else os.path.join(base_dir, raw_path)
        try:
            file_registry = load_manifest_file(resolved)
        except FileNotFoundError:
            _fail(f"{source}.manifest_file", f"no such file: {resolved}")
        except MalformedManifestError as exc:
            raise  # keeps its own line-precise message

    if "actions" not in data:
        _fail(source, "missing required field 'actions'")
    raw_actions = _require_mapping(data["actions"], f"{source}.actions")
    if not raw_actions:
        _fail(f"{source}.actions", "at least one action is required")
    actions = {}
    for name, body in raw_actions.items():
        actions[name] = _parse_action(name, body, f"{source}.actions.{name}",
                                      file_registry)

    if "workload" not in data:
        _fail(source, "missing required field 'workload'")
    raw_workload = _require_mapping(data["workload"], f"{source}.workload")
    if not raw_workload:
        _fail(f"{source}.workload", "at least one arrival process is required")
    processes = {}
    for name, body in raw_workload.items():
        if name not in actions:
            _fail(f"{source}.workload.{name}", "not a registered action")
        processes[name] = _parse_process(name, body, f"{source}.workload.{name}")
    workload = WorkloadSpec(processes, duration)

    latency = _parse_latency(data["latency"], f"{source}.latency") \
        if "latency" in data else LatencyModel()

    sim_kwargs = {}
    if "timeouts" in data:
        sim_kwargs["timeouts"] = _parse_timeouts(data["timeouts"], f"{source}.timeouts")
    if "renter_pool_size" in data:
        value = _integer(data, "renter_pool_size", source, required=True)
        if value < 1:
            _fail(f"{source}.renter_pool_size", f"must be >= 1, got {value}")
        sim_kwargs["renter_pool_size"] = value
    if "renter_cap" in data:
        value = data["renter_cap"]
        if value is not None:
            value = _integer(data, "renter_cap", source, required=True)
            if value < 0:
                _fail(f"{source}.renter_cap", f"must be >= 0, got {value}")
        sim_kwargs["renter_cap"] = value
    else:
        sim_kwargs["renter_cap"] = DEFAULT_RENTER_CAP
    if "caps" in data:
        caps = data["caps"]
        if (not isinstance(caps, (list, tuple)) or len(caps) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool)
                           and v >= 0 for v in caps)):
            _fail(f"{source}.caps",
                  f"expected two nonnegative integers, got {caps!r}")
        sim_kwargs["broker_caps"] = tuple(caps)
    if "cold_start_cap" in data:
        value = data["cold_start_cap"]
        if value is not None:
            value = _integer(data, "cold_start_cap", source, required=True)
            if value < 1:
                _fail(f"{source}.cold_start_cap", f"must be >= 1, got {value}")
        sim_kwargs["cold_start_cap"] = value
    for field, default in (("epoch_period", DEFAULT_EPOCH_PERIOD),
                           ("sweep_period", DEFAULT_SWEEP_PERIOD),
                           ("idle_eval_period", DEFAULT_IDLE_EVAL_PERIOD)):
        if field in data:
            value = _number(data, field, source, required=True)
            if value <= 0:
                _fail(f"{source}.{field}", f"must be positive, got {value}")
            sim_kwargs[field] = value
    if "discriminant_mode" in data:
        mode = data["discriminant_mode"]
        if mode not in ("consistent", "literal"):
            _fail(f"{source}.discriminant_mode",
                  f"expected 'consistent' or 'literal', got {mode!r}")
        sim_kwargs["discriminant_mode"] = mode

    return ScenarioConfig(actions, workload, latency, raw_policies, seeds,
                          sim_kwargs)


def load_scenario(path):
    """Read and validate a JSON scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(
                    f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}")
    except FileNotFoundError:
        raise ConfigError(f"no such config file: {path}")
    return parse_scenario(data, source=str(path),
                          base_dir=os.path.dirname(os.path.abspath(path)))
