"""Command-line front end for scenario generation, solving, and experiments.

Every subcommand that writes files also writes `<out>.manifest.json` next to
them recording the config digest, seed, tool version, and output paths, so
any result can be replayed from its manifest. Result files themselves carry
no timestamps: rerunning a subcommand with the same config and seed produces
byte-identical outputs.

Exit codes: 0 on success, 1 on invalid input, 2 on solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone

from . import __version__
from .audit import check_solution
from .config import AppConfig, ConfigError, load_config
from .evaluation import (InterferenceMode, empirical_cdf, interference_rates,
                         run_monte_carlo, write_runs_csv, write_summary_json)
from .orchestrator import Solution, baseline, optimize
from .records import atomic_write_text
from .scenario import Scenario, compute_cov, generate_scenario, save_scenario

WORKERS_ENV_VAR = "ABSNET_WORKERS"

SOLUTION_SCHEMA_VERSION = 1


class CliError(ValueError):
    """Invalid command-line input; message is shown to the user."""


@dataclass(frozen=True)
class RunManifest:
    """Provenance sidecar written next to every produced output file."""

    subcommand: str
    seed: int
    config_path: str | None
    config_digest: str
    version: str
    timestamp: str
    outputs: tuple[str, ...]

    def json_text(self) -> str:
        return json.dumps({
            "subcommand": self.subcommand,
            "seed": self.seed,
            "config_path": self.config_path,
            "config_digest": self.config_digest,
            "version": self.version,
            "timestamp": self.timestamp,
            "outputs": list(self.outputs),
        }, indent=2) + "\n"


def _config_digest(path: str | None) -> str:
    digest = hashlib.sha256()
    if path is not None:
        with open(path, "rb") as handle:
            digest.update(handle.read())
    return digest.hexdigest()


def _write_manifest(args, seed: int, outputs: tuple[str, ...]) -> None:
    manifest = RunManifest(
        subcommand=args.command, seed=seed, config_path=args.config,
        config_digest=_config_digest(args.config), version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        outputs=outputs)
    atomic_write_text(f"{args.out}.manifest.json", manifest.json_text())


def _require_out(args) -> str:
    if args.out is None:
        raise CliError(f"{args.command} requires --out")
    return args.out


def _resolve_seed(args, config: AppConfig) -> int:
    if args.seed is not None:
        return args.seed
    if config.solver.seed is not None:
        return config.solver.seed
    return 0


def _resolve_workers(args, config: AppConfig) -> int | None:
    if args.workers is not None:
        if args.workers < 1:
            raise CliError("--workers must be at least 1")
        return args.workers
    env = os.environ.get(WORKERS_ENV_VAR)
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise CliError(f"{WORKERS_ENV_VAR} must be an integer, "
                           f"got {env!r}") from None
        if value < 1:
            raise CliError(f"{WORKERS_ENV_VAR} must be at least 1")
        return value
    return config.experiment.workers


def _scenario_from(config: AppConfig, seed: int) -> Scenario:
    if config.scenario is not None:
        return config.scenario
    return generate_scenario(config.generation, seed)


def _solution_json_text(method: str, seed: int, solution: Solution,
                        audit_ok: bool) -> str:
    serving = [int(col) for col in solution.rho.argmax(axis=1)]
    beta = [float(solution.beta[i, col]) for i, col in enumerate(serving)]
    power = [float(solution.link_powers[i, col])
             for i, col in enumerate(serving)]
    payload = {
        "schema_version": SOLUTION_SCHEMA_VERSION,
        "method": method,
        "seed": seed,
        "total_power": solution.total_power,
        "abs_total_power": solution.abs_total_power,
        "iterations": solution.iterations,
        "converged": solution.converged,
        "audit_ok": audit_ok,
        "abs_positions": [[float(v) for v in row]
                          for row in solution.abs_positions],
        "serving": serving,
        "beta": beta,
        "link_power": power,
        "backhaul_usage": [float(v) for v in solution.backhaul_usage],
        "trace": [
            {
                "iteration": record.iteration,
                "phase": record.phase,
                "total_power": record.total_power,
                "abs_power": record.abs_power,
                "placement_feasible": list(record.placement_feasible),
            }
            for record in solution.trace
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def _note(args, message: str) -> None:
    if args.verbose:
        print(message, file=sys.stderr)


def _cmd_generate(args, config: AppConfig) -> int:
    out = _require_out(args)
    if config.scenario is not None:
        raise CliError("generate needs a generation section, "
                       "not scenario_file")
    seed = _resolve_seed(args, config)
    scenario = generate_scenario(config.generation, seed)
    save_scenario(scenario, out)
    _write_manifest(args, seed, (out,))
    _note(args, f"wrote scenario with {scenario.n_users} users and "
          f"{scenario.abs_count} candidate stations to {out}")
    return 0


def _solve_command(args, config: AppConfig, method: str) -> int:
    out = _require_out(args)
    seed = _resolve_seed(args, config)
    scenario = _scenario_from(config, seed)
    solver = replace(config.solver, seed=seed)
    solve = optimize if method == "optimize" else baseline
    solution = solve(scenario, config.channel, solver)
    report = check_solution(scenario, solution, config.channel)
    text = _solution_json_text(method, seed, solution, report.ok)
    atomic_write_text(out, text)
    _write_manifest(args, seed, (out,))
    _note(args, f"{method}: total {solution.total_power:.6g} W, "
          f"aerial {solution.abs_total_power:.6g} W, "
          f"{solution.abs_user_count} aerial users, "
          f"{solution.iterations} iterations")
    if not report.ok:
        for violation in report.violations:
            print(f"audit violation: {violation}", file=sys.stderr)
        return 2
    return 0


def _cmd_montecarlo(args, config: AppConfig) -> int:
    out = _require_out(args)
    experiment = config.experiment
    overrides = {"workers": _resolve_workers(args, config)}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    experiment = replace(experiment, **overrides)
    table = run_monte_carlo(experiment)
    csv_path = f"{out}.runs.csv"
    json_path = f"{out}.summary.json"
    write_runs_csv(table, csv_path)
    write_summary_json(table, json_path)
    _write_manifest(args, experiment.base_seed, (csv_path, json_path))
    if args.verbose:
        for cell in table.cells:
            agg = cell.optimize
            _note(args, f"cell {cell.index}: aerial power "
                  f"{agg.mean_abs_power:.6g} W over {agg.n_runs} runs, "
                  f"{agg.n_converged} converged, {agg.n_audit_ok} audits ok")
    bad = sum(agg.n_runs - agg.n_audit_ok
              for cell in table.cells
              for agg in (cell.optimize, cell.baseline) if agg is not None)
    if bad:
        print(f"audit violations in {bad} runs", file=sys.stderr)
        return 2
    return 0


def _cmd_interference(args, config: AppConfig) -> int:
    out = _require_out(args)
    seed = _resolve_seed(args, config)
    scenario = _scenario_from(config, seed)
    solver = replace(config.solver, seed=seed)
    solution = optimize(scenario, config.channel, solver)
    mode = config.experiment.interference
    if mode is None:
        mode = InterferenceMode("abs_sidelobe",
                                g_side=config.channel.side_lobe_gain)
    achieved = interference_rates(solution, scenario, config.channel, mode)
    targets = scenario.rate_demands()
    payload = {
        "schema_version": SOLUTION_SCHEMA_VERSION,
        "seed": seed,
        "mode": {
            "kind": mode.kind,
            "g_side": mode.g_side,
            "antenna": mode.antenna,
            "pairing": mode.pairing,
            "tx_power": mode.tx_power,
        },
        "target_rates": [float(v) for v in targets],
        "achieved_rates": [float(v) for v in achieved],
        "achieved_cdf": ([] if achieved.size == 0 else
                         [list(pair) for pair in empirical_cdf(achieved)]),
    }
    atomic_write_text(out, json.dumps(payload, indent=2) + "\n")
    _write_manifest(args, seed, (out,))
    return 0


def _cmd_cov(args, config: AppConfig) -> int:
    seed = _resolve_seed(args, config)
    scenario = _scenario_from(config, seed)
    if scenario.n_users < 3:
        raise CliError("cov needs a scenario with at least 3 users")
    value = compute_cov(scenario.user_positions(), scenario.region_side)
    print(value)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": lambda args, config: _solve_command(args, config, "optimize"),
    "baseline": lambda args, config: _solve_command(args, config, "baseline"),
    "montecarlo": _cmd_montecarlo,
    "interference": _cmd_interference,
    "cov": _cmd_cov,
}

_COMMAND_HELP = {
    "generate": "sample a scenario and save it",
    "solve": "run the alternating optimizer on one scenario",
    "baseline": "run the clustering baseline on one scenario",
    "montecarlo": "run an experiment sweep and write CSV plus JSON summaries",
    "interference": "solve one scenario and evaluate residual interference",
    "cov": "print the dispersion coefficient of a scenario's user layout",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="absnet",
        description="Aerial base station placement, association, and "
                    "bandwidth optimization tools.")
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _COMMAND_HELP.items():
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", default=None,
                         help="JSON config file (default: all defaults)")
        sub.add_argument("--seed", type=int, default=None,
                         help="seed override (montecarlo: base seed)")
        sub.add_argument("--out", default=None,
                         help="output path (montecarlo: output prefix)")
        sub.add_argument("--workers", type=int, default=None,
                         help=f"parallel workers for montecarlo (default: "
                              f"config, then ${WORKERS_ENV_VAR}, then all "
                              f"cores)")
        sub.add_argument("--verbose", action="store_true",
                         help="print progress details to stderr")
    return parser


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        config = load_config(args.config) if args.config else AppConfig()
        return _COMMANDS[args.command](args, config)
    except (ConfigError, CliError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
