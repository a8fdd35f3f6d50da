"""Command-line front end: run scenarios, drive experiments, emit fixtures.

Subcommands:

* ``run``      — simulate a scenario config under one or all policies and
                 write one report file per (policy, seed).
* ``sweep``    — run a named experiment driver and write its results.
* ``fixture``  — emit the 11-action benchmark manifest file.
* ``check``    — validate a scenario config and print what it contains.

Configuration or validation problems exit with status 2 and a message that
cites the offending file, line, or field path.  The ``PAGURUS_SIM_LOG``
environment variable ({off, audit, debug}) controls event logging inside the
simulator itself.
"""

import argparse
import json
import os
import sys

from .engine import POLICIES
from .errors import ConfigError, MalformedManifestError, PagurusError
from .experiments import (
    experiment_burst,
    experiment_container_count,
    experiment_elimination,
    experiment_latency_breakdown,
)
from .fixture import fixture_actions, fixture_manifests
from .repack import format_manifest_lines, load_manifest_file
from .scenario import DEFAULT_SEED, load_scenario

EXPERIMENTS = ("elimination", "burst", "latency-breakdown", "container-count")

CONFIG_EXIT = 2


def _write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _report_paths(out_dir, policy, seed):
    stem = f"report_{policy}_seed{seed}"
    return (os.path.join(out_dir, stem + ".json"),
            os.path.join(out_dir, stem + ".records"))


def cmd_run(args):
    config = load_scenario(args.config)
    if args.policy is None:
        policies = config.policies
    elif args.policy == "all":
        policies = list(POLICIES)
    else:
        policies = [args.policy]
    seeds = [args.seed] if args.seed is not None else config.seeds
    os.makedirs(args.out, exist_ok=True)
    for policy in policies:
        for seed in seeds:
            report = config.run(policy, seed=seed)
            json_path, records_path = _report_paths(args.out, policy, seed)
            _write_text(json_path, report.to_json(indent=2) + "\n")
            _write_text(records_path, "\n".join(report.records()) + "\n")
            print(f"# {policy} seed={seed} -> {json_path}")
            print(report.table())
    return 0


def cmd_sweep(args):
    seed = args.seed
    if seed is None and args.config is not None:
        seed = load_scenario(args.config).seed
    if seed is None:
        seed = DEFAULT_SEED
    if args.target is not None and args.target not in fixture_actions():
        raise ConfigError(
            f"--target {args.target!r} is not a benchmark action; "
            f"choose from {sorted(fixture_actions())}")
    if args.experiment == "elimination":
        targets = [args.target] if args.target else None
        result = experiment_elimination(targets=targets, seed=seed)
        for target, row in result.items():
            print(f"{target}: mean setup rate {row['mean_setup_rate']:.4f} "
                  f"over {row['setup_count']} setups, "
                  f"invocation rate {row['invocation_rate']:.4f}")
    elif args.experiment == "burst":
        targets = [args.target] if args.target else list(fixture_actions())
        result = {t: experiment_burst(t, seed=seed) for t in targets}
        for target, row in result.items():
            supported = {cap: c["supported"] for cap, c in row["per_cap"].items()}
            print(f"{target}: supported multiplier by cap {supported}")
    elif args.experiment == "latency-breakdown":
        result = experiment_latency_breakdown(seed=seed)
        for action, row in sorted(result.items()):
            print(f"{action}: total {row['mean_total']:.3f}s, "
                  f"startup share {row['startup_fraction']:.1%}")
    else:
        result = experiment_container_count(target=args.target or "img",
                                            seed=seed)
        for row in result["rows"]:
            print(f"qps {row['qps']}: launches {row['pagurus_launches']} "
                  f"shared vs {row['openwhisk_launches']} keep-alive")
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, f"sweep_{args.experiment}.json")
    _write_text(out_path, json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"# wrote {out_path}")
    return 0


def cmd_fixture(args):
    registry = fixture_manifests(empty=args.empty)
    text = "\n".join(format_manifest_lines(registry)) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        _write_text(args.out, text)
        load_manifest_file(args.out)  # emitted fixtures must re-load cleanly
        print(f"# wrote {args.out} ({len(registry)} actions)")
    return 0


def cmd_check(args):
    config = load_scenario(args.config)
    print(f"{args.config}: ok")
    print(f"  actions:  {len(config.actions)} "
          f"({', '.join(sorted(config.actions))})")
    print(f"  workload: {len(config.workload.processes)} processes over "
          f"{config.workload.duration}s")
    print(f"  policies: {', '.join(config.policies)}")
    print(f"  seeds:    {', '.join(str(s) for s in config.seeds)}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pagurus",
        description="Container-sharing scheduler simulator and experiment drivers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario config")
    p_run.add_argument("--config", required=True, help="scenario JSON path")
    p_run.add_argument("--policy", choices=POLICIES + ("all",),
                       help="override the config's policy list")
    p_run.add_argument("--seed", type=int, help="override the config's seed")
    p_run.add_argument("--out", default=".", help="report output directory")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an experiment driver")
    p_sweep.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    p_sweep.add_argument("--config", help="optional scenario supplying the seed")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--target", help="narrow to one benchmark action")
    p_sweep.add_argument("--out", default=".", help="result output directory")
    p_sweep.set_defaults(func=cmd_sweep)

    p_fix = sub.add_parser("fixture", help="emit the benchmark manifest file")
    p_fix.add_argument("--empty", action="store_true",
                       help="emit every action without libraries")
    p_fix.add_argument("--out", default="-",
                       help="output file, or - for stdout")
    p_fix.set_defaults(func=cmd_fixture)

    p_check = sub.add_parser("check", help="validate a scenario config")
    p_check.add_argument("--config", required=True)
    p_check.set_defaults(func=cmd_check)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MalformedManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_EXIT
    except PagurusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
