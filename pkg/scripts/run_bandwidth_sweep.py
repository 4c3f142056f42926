"""Access bandwidth against aerial transmit power.

Sweeps the per-station access bandwidth; wider channels need exponentially
less power for the same rates, so the curve should fall off quickly.
"""

import argparse

from absnet.evaluation import (ExperimentConfig, run_monte_carlo,
                               write_runs_csv, write_summary_json)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--bandwidths", type=float, nargs="+",
                        default=[2e7, 4e7, 8e7])
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    config = ExperimentConfig(run_count=args.runs, base_seed=args.seed,
                              access_bandwidths=tuple(args.bandwidths),
                              include_baseline=False, workers=args.workers)
    table = run_monte_carlo(config)
    for cell in table.cells:
        agg = cell.optimize
        print(f"B = {cell.params.access_bandwidth / 1e6:5.0f} MHz: "
              f"aerial power {agg.mean_abs_power:.6g} W, aerial users "
              f"{agg.mean_abs_users:.1f}")
    if args.out:
        write_runs_csv(table, f"{args.out}.runs.csv")
        write_summary_json(table, f"{args.out}.summary.json")


if __name__ == "__main__":
    main()
