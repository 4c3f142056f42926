"""Delay-sensitive traffic against aerial association.

Sweeps the fraction of users that must be served from a local cache, for each
cache size, and reports the mean number of users the aerial stations keep.
"""

import argparse

from absnet.evaluation import (ExperimentConfig, run_monte_carlo,
                               write_runs_csv, write_summary_json)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--delays", type=float, nargs="+",
                        default=[0.1, 0.5, 0.9])
    parser.add_argument("--caches", type=int, nargs="+", default=[0, 2, 5])
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    config = ExperimentConfig(run_count=args.runs, base_seed=args.seed,
                              delay_fractions=tuple(args.delays),
                              cache_capacities=tuple(args.caches),
                              include_baseline=False, workers=args.workers)
    table = run_monte_carlo(config)
    for cell in table.cells:
        agg = cell.optimize
        print(f"cache {cell.params.cache_capacity:2d} delay "
              f"{cell.params.delay_fraction:.1f}: aerial users "
              f"{agg.mean_abs_users:5.1f}, aerial power "
              f"{agg.mean_abs_power:.6g} W")
    if args.out:
        write_runs_csv(table, f"{args.out}.runs.csv")
        write_summary_json(table, f"{args.out}.summary.json")


if __name__ == "__main__":
    main()
