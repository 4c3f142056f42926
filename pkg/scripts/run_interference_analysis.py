"""Residual interference at the solved operating point.

Solves one scenario, then recomputes achieved rates under side-lobe leakage
from the other aerial stations (for a list of side-lobe gains relative to the
main lobe) and under uplink users of the other tier. Prints rate quantiles;
the design point itself achieves every target exactly.
"""

import argparse

import numpy as np

from absnet.channel import ChannelParams, min_elevation
from absnet.evaluation import InterferenceMode, interference_rates
from absnet.orchestrator import SolverConfig, optimize
from absnet.scenario import GenerationConfig, generate_scenario


def _quantiles(rates: np.ndarray) -> str:
    qs = np.percentile(rates, [10, 50, 90]) / 1e6
    return f"p10 {qs[0]:6.2f}  p50 {qs[1]:6.2f}  p90 {qs[2]:6.2f} Mb/s"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gains", type=float, nargs="+",
                        default=[0.0, 0.001, 0.01, 0.1],
                        help="side-lobe gains as fractions of the main lobe")
    args = parser.parse_args()

    params = ChannelParams()
    g0 = min_elevation(params).g0
    scenario = generate_scenario(GenerationConfig(), args.seed)
    solution = optimize(scenario, params, SolverConfig(seed=args.seed))
    targets = scenario.rate_demands()
    print(f"targets:             {_quantiles(targets)}")
    for fraction in args.gains:
        mode = InterferenceMode("abs_sidelobe", g_side=fraction * g0)
        rates = interference_rates(solution, scenario, params, mode)
        print(f"side lobe {fraction:7.4f}g0: {_quantiles(rates)}")
    for antenna in ("directional", "omni"):
        mode = InterferenceMode("user_to_user", antenna=antenna)
        rates = interference_rates(solution, scenario, params, mode)
        print(f"user tier {antenna:>11}: {_quantiles(rates)}")


if __name__ == "__main__":
    main()
