#!/usr/bin/env python3
"""Watch one container get promoted, lent out, and recycled.

A tiny three-action run: `dd` (no libraries) arrives every 60 seconds —
right at the keep-alive boundary — while `vid` and `kms` fire small
batches that leave idle containers behind.  The audit log shows the sharing
machinery at work: idle containers promoted to lenders, lenders granted
to `dd` as renters, and the recycler retiring whatever idles past its
pool timeout.

The same stream is available from any run by setting PAGURUS_SIM_LOG=audit
(or =debug) in the environment.
"""

import argparse
import collections
import sys

from pagurus.experiments import DEFAULT_SEED
from pagurus.engine import run_simulation
from pagurus.fixture import fixture_actions
from pagurus.workload import BatchArrivals, FixedIntervalArrivals, WorkloadSpec


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--duration", type=float, default=700.0)
    parser.add_argument("--lines", type=int, default=40,
                        help="audit lines to print (default: 40)")
    args = parser.parse_args(argv)

    catalog = fixture_actions()
    actions = {name: catalog[name] for name in ("dd", "vid", "kms")}
    workload = WorkloadSpec({
        "dd": FixedIntervalArrivals(60.0, offset=120.0),
        "vid": BatchArrivals(25.0, 3, offset=7.0),
        "kms": BatchArrivals(25.0, 3, offset=19.0),
    }, args.duration)

    audit_lines = []
    report = run_simulation(actions, workload, "pagurus", args.seed,
                            audit_sink=audit_lines.append)

    print(f"--- first {args.lines} audit lines "
          f"(time  event  action  container  detail) ---")
    for line in audit_lines[:args.lines]:
        print(line)

    kinds = collections.Counter(line.split(" ", 2)[1] for line in audit_lines)
    print("\n--- audit event totals ---")
    for kind, count in sorted(kinds.items()):
        print(f"{kind:12s} {count}")

    print("\n--- run summary ---")
    print(report.table())
    print(f"isolation violations: {report.isolation_violations}")
    print(f"trace hash: {report.trace_hash[:16]}…  (seed {args.seed})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
