#!/usr/bin/env python3
"""How many borrowed containers does it take to ride out a burst?

One fixture action runs at a steady base rate, then the arrival rate
multiplies for a five-minute window while compatible lender actions idle
nearby.  For each renting cap (0 = sharing disabled) the sweep reports the
largest multiplier the action survived with its QoS target intact over the
burst window, plus the QoS fraction at every multiplier tried.

With the default cap of two borrowed containers the fixture actions
sustain a 3x burst; the memory lines price that against a baseline
provisioned to own the same peak outright.
"""

import argparse
import sys

from pagurus.experiments import DEFAULT_SEED, experiment_burst
from pagurus.fixture import fixture_actions


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--action", default="img",
                        help="fixture action to stress (default: img)")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = parser.parse_args(argv)

    catalog = list(fixture_actions())
    if args.action not in catalog:
        parser.error(f"unknown action {args.action!r}; choose from {catalog}")

    result = experiment_burst(args.action, seed=args.seed)

    print(f"action {args.action}: base rate {result['base_rate']:.3f}/s, "
          f"QoS requirement {result['r_req']:.2f}\n")
    for cap, entry in result["per_cap"].items():
        curve = "  ".join(f"{point['multiplier']:g}x:{point['r_window']:.3f}"
                          for point in entry["curve"])
        print(f"cap {cap}: supported multiplier {entry['supported']:g}x   [{curve}]")

    memory = result["memory"]
    if memory is not None:
        print(f"\npeak borrowed containers during the burst: {memory['rented_peak']}")
        print(f"own containers at peak:                    {memory['pagurus_peak']}")
        print(f"provisioned-for-peak baseline would hold:  {memory['provisioned_peak']}")
        print(f"memory saved by borrowing:                 {memory['saving_mb']} MB")
    print(f"(seed {args.seed})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
