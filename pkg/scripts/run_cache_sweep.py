"""Cache size against backhaul usage and aerial association.

Sweeps the per-station cache capacity at a fixed sampled load and reports how
much backhaul the aerial stations consume and how many users they serve, for
a configurable backhaul bandwidth.
"""

import argparse

from absnet.evaluation import (ExperimentConfig, run_monte_carlo,
                               write_runs_csv, write_summary_json)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--caches", type=int, nargs="+", default=[0, 2, 5])
    parser.add_argument("--backhaul", type=float, default=4e8,
                        help="backhaul bandwidth in Hz")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    config = ExperimentConfig(run_count=args.runs, base_seed=args.seed,
                              cache_capacities=tuple(args.caches),
                              backhaul_bandwidths=(args.backhaul,),
                              include_baseline=False, workers=args.workers)
    table = run_monte_carlo(config)
    for cell in table.cells:
        agg = cell.optimize
        print(f"cache {cell.params.cache_capacity:2d}: backhaul per station "
              f"{agg.mean_backhaul_per_abs / 1e6:8.2f} Mb/s, aerial users "
              f"{agg.mean_abs_users:.1f}")
    if args.out:
        write_runs_csv(table, f"{args.out}.runs.csv")
        write_summary_json(table, f"{args.out}.summary.json")


if __name__ == "__main__":
    main()
