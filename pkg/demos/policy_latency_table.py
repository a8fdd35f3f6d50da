#!/usr/bin/env python3
"""Mean end-to-end latency per fixture action under three policies.

All eleven fixture actions arrive on staggered 60-second intervals — the
keep-alive boundary, so the plain keep-alive policy ("openwhisk" column)
pays a full cold start every time and the checkpoint-restore policy pays
its restore cost.  Four feeder actions keep the lender pools stocked, so
the sharing scheduler serves every probe from a borrowed container.

The last lines compare rent-served queries against a fully-warm replay of
the same arrival and execution draws: the rent path should sit within a
few percent of the warm optimum.
"""

import argparse
import sys

from pagurus.experiments import DEFAULT_SEED, experiment_latency_comparison


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--invocations", type=int, default=100,
                        help="probes per action (default: 100)")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = parser.parse_args(argv)

    result = experiment_latency_comparison(seed=args.seed,
                                           invocations=args.invocations)

    print(f"{'action':7s} {'openwhisk':>10s} {'restore':>10s} {'pagurus':>10s} "
          f"{'rent':>5s} {'warm':>5s} {'cold':>5s}")
    for name, row in result["per_action"].items():
        paths = row["paths"]
        print(f"{name:7s} {row['openwhisk']:>10.4f} {row['restore']:>10.4f} "
              f"{row['pagurus']:>10.4f} {paths.get('rent', 0):>5d} "
              f"{paths.get('warm', 0):>5d} {paths.get('cold', 0):>5d}")

    print(f"\nrent-served queries: {result['rent_count']}")
    print(f"rent vs warm-optimal, mean ratio: {result['rent_overhead_ratio_mean']:.6f}")
    print(f"rent vs warm-optimal, max ratio:  {result['rent_overhead_ratio_max']:.6f}")
    print(f"(seed {args.seed})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
