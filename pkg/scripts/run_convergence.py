"""Outer-iteration statistics of the alternating optimizer.

Runs the default 70-user, 3-station configuration over many seeds and prints
the iteration histogram together with the fraction of runs that settle within
8 outer iterations.
"""

import argparse

from absnet.evaluation import ExperimentConfig, run_monte_carlo
from absnet.evaluation import write_runs_csv, write_summary_json


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default=None,
                        help="prefix for runs CSV and summary JSON")
    args = parser.parse_args()

    config = ExperimentConfig(run_count=args.runs, base_seed=args.seed,
                              include_baseline=False, workers=args.workers)
    table = run_monte_carlo(config)
    agg = table.cells[0].optimize
    print("iterations histogram:")
    for iterations, count in agg.iteration_histogram:
        print(f"  {iterations:3d}: {count}")
    within = sum(count for iterations, count in agg.iteration_histogram
                 if iterations <= 8)
    print(f"within 8 iterations: {within}/{agg.n_runs} "
          f"({100.0 * within / agg.n_runs:.1f}%)")
    print(f"converged: {agg.n_converged}/{agg.n_runs}, "
          f"audits ok: {agg.n_audit_ok}/{agg.n_runs}")
    if args.out:
        write_runs_csv(table, f"{args.out}.runs.csv")
        write_summary_json(table, f"{args.out}.summary.json")


if __name__ == "__main__":
    main()
