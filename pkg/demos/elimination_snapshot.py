#!/usr/bin/env python3
"""Cold-start elimination on the bundled 11-action fixture.

Each chosen target arrives every 60 seconds — exactly the keep-alive
timeout, so a plain keep-alive scheduler cold-starts every single time.
Two background actions play lenders.  The table shows, per target, how
many of those would-be cold starts the sharing scheduler served from a
borrowed container instead, across all 45 background pairs.

Run `./elimination_snapshot.py --all --invocations 30` for the full-scale
sweep (a few minutes); the default is a quick three-target snapshot.
"""

import argparse
import sys
import time

from pagurus.experiments import DEFAULT_SEED, experiment_elimination
from pagurus.fixture import fixture_actions


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--targets", default="dd,vid,mr",
                        help="comma-separated targets (default: dd,vid,mr)")
    parser.add_argument("--all", action="store_true",
                        help="run every fixture action as a target")
    parser.add_argument("--invocations", type=int, default=10,
                        help="probe invocations per setup (default: 10)")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--quiet", action="store_true",
                        help="suppress the per-pair progress lines")
    args = parser.parse_args(argv)

    catalog = list(fixture_actions())
    targets = catalog if args.all else args.targets.split(",")
    unknown = [t for t in targets if t not in catalog]
    if unknown:
        parser.error(f"unknown targets {unknown}; choose from {catalog}")

    def progress(target, pair, rate):
        if not args.quiet:
            print(f"  {target:5s} +{'+'.join(pair):12s} rate={rate:.3f}")

    started = time.time()
    results = experiment_elimination(targets=targets, seed=args.seed,
                                     invocations=args.invocations,
                                     progress=progress)

    print()
    print(f"{'target':7s} {'setups':>6s} {'mean rate':>10s} "
          f"{'by invocation':>14s} {'baseline colds':>15s}")
    for name in targets:
        entry = results[name]
        print(f"{name:7s} {entry['setup_count']:>6d} "
              f"{entry['mean_setup_rate']:>10.4f} "
              f"{entry['invocation_rate']:>14.4f} "
              f"{entry['baseline_colds']:>15d}")
    print(f"\ndone in {time.time() - started:.1f}s (seed {args.seed})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
