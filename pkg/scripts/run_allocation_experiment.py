#!/usr/bin/env python3
"""Run the full allocation experiment and print the result grid.

Learns both floor models from scratch (seeded), then scores the proposed,
random, and commonsense strategies on the 50-subtask suite.
"""

import argparse

from homeplan.experiment import SuiteConfig, run_suite


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--env", default="paper_home")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--out", default=None, help="write the JSON report here")
    args = parser.parse_args()

    cfg = SuiteConfig(env=args.env, seed=args.seed, out=args.out)
    report = run_suite(cfg)
    print(report.text_table())
    print(f"\nelapsed: {report.elapsed_seconds:.1f}s")
    if args.out:
        print(f"report: {args.out}")


if __name__ == "__main__":
    main()
