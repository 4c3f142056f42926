"""Monte Carlo experiment harness, aggregation, and interference analysis.

An experiment is a grid of configuration cells (user count, CoV target, cache
size, delay-sensitive fraction, backhaul bandwidth, access bandwidth) crossed
with repetition indices. Repetition r uses generation seed base_seed + r in
every cell, so sweeps compare the same sampled loads under different knobs.

Achieved-rate analysis keeps the powers and band splits fixed at the solved
operating point and recomputes SINR under a chosen interference model. Both
tiers run reversed uplink/downlink schedules, so a downlink user never hears
the other tier's base station; the residual couplings are the side lobes of
other aerial cells and uplink users of the other tier.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .audit import check_solution
from .channel import (MIN_GROUND_DISTANCE, USER_TX_POWER_W, ChannelParams,
                      min_elevation, path_loss_linear)
from .orchestrator import Solution, SolverConfig, baseline, optimize
from .records import atomic_write_text
from .scenario import GenerationConfig, Scenario, compute_cov, generate_scenario

SCHEMA_VERSION = 1

METHOD_OPTIMIZE = "optimize"
METHOD_BASELINE = "baseline"

CSV_COLUMNS = (
    "cell_index", "rep_index", "method", "seed",
    "n_users", "cov_target", "cache_capacity", "delay_fraction",
    "backhaul_bandwidth", "access_bandwidth",
    "total_power", "abs_power", "abs_users", "backhaul_per_abs",
    "iterations", "converged", "audit_ok", "scenario_cov",
)

INTERFERENCE_KINDS = ("abs_sidelobe", "user_to_user")
ANTENNA_KINDS = ("omni", "directional")
PAIRING_KINDS = ("nearest", "sum")


@dataclass(frozen=True)
class InterferenceMode:
    """Residual cross-link model applied on top of a solved operating point.

    abs_sidelobe: every other aerial cell leaks its full transmit power at
    antenna gain g_side into each aerial downlink with full spectral overlap.
    user_to_user: uplink users of the other tier transmit tx_power through
    the 28 + 40 log10(d) ground channel; an ideal directional user antenna
    suppresses that path entirely.
    """

    kind: str
    g_side: float = 0.0
    antenna: str = "omni"
    pairing: str = "nearest"
    tx_power: float = USER_TX_POWER_W

    def __post_init__(self) -> None:
        if self.kind not in INTERFERENCE_KINDS:
            raise ValueError(f"unknown interference kind {self.kind!r}")
        if self.g_side < 0 or not math.isfinite(self.g_side):
            raise ValueError("g_side must be finite and non-negative")
        if self.antenna not in ANTENNA_KINDS:
            raise ValueError(f"unknown antenna kind {self.antenna!r}")
        if self.pairing not in PAIRING_KINDS:
            raise ValueError(f"unknown pairing {self.pairing!r}")
        if self.tx_power < 0 or not math.isfinite(self.tx_power):
            raise ValueError("tx_power must be finite and non-negative")


@dataclass(frozen=True)
class CellParams:
    """One configuration cell of the sweep grid."""

    n_users: int
    cov_target: float | None
    cache_capacity: int
    delay_fraction: float
    backhaul_bandwidth: float
    access_bandwidth: float


@dataclass(frozen=True)
class RunRecord:
    """Metrics of one method on one generated scenario."""

    cell_index: int
    rep_index: int
    method: str
    seed: int
    params: CellParams
    total_power: float
    abs_power: float
    abs_users: int
    backhaul_per_abs: float
    iterations: int
    converged: bool
    audit_ok: bool
    scenario_cov: float

    def csv_row(self) -> list[str]:
        p = self.params
        return [
            str(self.cell_index), str(self.rep_index), self.method,
            str(self.seed), str(p.n_users),
            "" if p.cov_target is None else repr(float(p.cov_target)),
            str(p.cache_capacity), repr(float(p.delay_fraction)),
            repr(float(p.backhaul_bandwidth)), repr(float(p.access_bandwidth)),
            repr(self.total_power), repr(self.abs_power), str(self.abs_users),
            repr(self.backhaul_per_abs), str(self.iterations),
            str(self.converged).lower(), str(self.audit_ok).lower(),
            repr(self.scenario_cov),
        ]


@dataclass(frozen=True)
class MethodAggregate:
    """Per-cell summary of one method across repetitions."""

    n_runs: int
    mean_total_power: float
    std_total_power: float
    mean_abs_power: float
    std_abs_power: float
    mean_abs_users: float
    std_abs_users: float
    mean_backhaul_per_abs: float
    std_backhaul_per_abs: float
    iteration_histogram: tuple[tuple[int, int], ...]
    n_converged: int
    n_audit_ok: int

    def __post_init__(self) -> None:
        if sum(count for _, count in self.iteration_histogram) != self.n_runs:
            raise ValueError("iteration histogram must cover every run")


@dataclass(frozen=True)
class CellSummary:
    index: int
    params: CellParams
    optimize: MethodAggregate
    baseline: MethodAggregate | None
    rate_cdf: tuple[tuple[float, float], ...] | None


@dataclass(frozen=True)
class MetricsTable:
    """Aggregated experiment results plus the raw per-run records."""

    schema_version: int
    base_seed: int
    run_count: int
    cells: tuple[CellSummary, ...]
    records: tuple[RunRecord, ...]

    def __post_init__(self) -> None:
        for cell in self.cells:
            aggregates = [cell.optimize]
            if cell.baseline is not None:
                aggregates.append(cell.baseline)
            for agg in aggregates:
                if agg.n_runs != self.run_count:
                    raise ValueError("aggregate counts must match run count")

    def cell_records(self, index: int, method: str) -> tuple[RunRecord, ...]:
        return tuple(r for r in self.records
                     if r.cell_index == index and r.method == method)


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep grid, repetition count, and shared solver/channel settings.

    The six sweep lists are the source of truth for the values they cover:
    each cell replaces the matching fields of `generation` and `channel`
    (n_users, cov_target, cache_capacity, delay_fraction and the two
    bandwidths), so those base fields only matter for everything not swept.
    """

    run_count: int = 1
    base_seed: int = 0
    user_counts: tuple[int, ...] = (70,)
    cov_targets: tuple[float | None, ...] = (None,)
    cache_capacities: tuple[int, ...] = (2,)
    delay_fractions: tuple[float, ...] = (0.1,)
    backhaul_bandwidths: tuple[float, ...] = (4e8,)
    access_bandwidths: tuple[float, ...] = (4e7,)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    include_baseline: bool = True
    interference: InterferenceMode | None = None
    workers: int | None = None    # None means one worker per available core

    def __post_init__(self) -> None:
        if self.run_count < 1:
            raise ValueError("run_count must be at least 1")
        for name in ("user_counts", "cov_targets", "cache_capacities",
                     "delay_fractions", "backhaul_bandwidths",
                     "access_bandwidths"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if any(n < 0 for n in self.user_counts):
            raise ValueError("user_counts must be non-negative")
        if any(c < 0 or c > self.generation.catalog_size
               for c in self.cache_capacities):
            raise ValueError("cache_capacities must lie in [0, catalog_size]")
        if any(not 0.0 <= f <= 1.0 for f in self.delay_fractions):
            raise ValueError("delay_fractions must lie in [0, 1]")
        if any(w <= 0 for w in self.backhaul_bandwidths):
            raise ValueError("backhaul_bandwidths must be positive")
        if any(b <= 0 for b in self.access_bandwidths):
            raise ValueError("access_bandwidths must be positive")
        if any(t is not None and t <= 0 for t in self.cov_targets):
            raise ValueError("cov_targets must be positive when set")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be at least 1")

    def cells(self) -> tuple[CellParams, ...]:
        grid = itertools.product(
            self.user_counts, self.cov_targets, self.cache_capacities,
            self.delay_fractions, self.backhaul_bandwidths,
            self.access_bandwidths)
        return tuple(CellParams(*combo) for combo in grid)


def _generation_for(config: ExperimentConfig, cell: CellParams) -> GenerationConfig:
    gen = config.generation
    point_process = gen.point_process
    # a dispersion target above Poisson needs a clustered process
    if cell.cov_target is not None and point_process.kind == "uniform":
        point_process = replace(point_process, kind="matern")
    return replace(gen, n_users=cell.n_users,
                   cache_capacity=cell.cache_capacity,
                   delay_fraction=cell.delay_fraction,
                   point_process=point_process,
                   cov_target=cell.cov_target)


def _channel_for(config: ExperimentConfig, cell: CellParams) -> ChannelParams:
    return replace(config.channel,
                   backhaul_bandwidth=cell.backhaul_bandwidth,
                   access_bandwidth=cell.access_bandwidth)


def _solution_record(cell_index: int, rep_index: int, method: str, seed: int,
                     cell: CellParams, scenario: Scenario, solution: Solution,
                     params: ChannelParams, scenario_cov: float) -> RunRecord:
    usage = solution.backhaul_usage
    per_abs = float(usage.mean()) if usage.size else 0.0
    report = check_solution(scenario, solution, params)
    return RunRecord(
        cell_index=cell_index, rep_index=rep_index, method=method, seed=seed,
        params=cell, total_power=solution.total_power,
        abs_power=solution.abs_total_power,
        abs_users=solution.abs_user_count, backhaul_per_abs=per_abs,
        iterations=solution.iterations, converged=solution.converged,
        audit_ok=report.ok, scenario_cov=scenario_cov)


def _execute_task(task) -> tuple[list[RunRecord], list[float]]:
    config, cell_index, rep_index = task
    cell = config.cells()[cell_index]
    seed = config.base_seed + rep_index
    scenario = generate_scenario(_generation_for(config, cell), seed)
    params = _channel_for(config, cell)
    try:
        scenario_cov = compute_cov(scenario.user_positions(),
                                   scenario.region_side)
    except ValueError:
        scenario_cov = math.nan
    solver = replace(config.solver, seed=seed)
    records = []
    rates: list[float] = []
    solution = optimize(scenario, params, solver)
    records.append(_solution_record(cell_index, rep_index, METHOD_OPTIMIZE,
                                    seed, cell, scenario, solution, params,
                                    scenario_cov))
    if config.interference is not None:
        rates = interference_rates(solution, scenario, params,
                                   config.interference).tolist()
    if config.include_baseline:
        base = baseline(scenario, params, solver)
        records.append(_solution_record(cell_index, rep_index,
                                        METHOD_BASELINE, seed, cell, scenario,
                                        base, params, scenario_cov))
    return records, rates


def _aggregate(records: list[RunRecord]) -> MethodAggregate:
    total = np.array([r.total_power for r in records])
    abs_power = np.array([r.abs_power for r in records])
    abs_users = np.array([r.abs_users for r in records], dtype=float)
    backhaul = np.array([r.backhaul_per_abs for r in records])
    histogram = Counter(r.iterations for r in records)
    return MethodAggregate(
        n_runs=len(records),
        mean_total_power=float(total.mean()),
        std_total_power=float(total.std()),
        mean_abs_power=float(abs_power.mean()),
        std_abs_power=float(abs_power.std()),
        mean_abs_users=float(abs_users.mean()),
        std_abs_users=float(abs_users.std()),
        mean_backhaul_per_abs=float(backhaul.mean()),
        std_backhaul_per_abs=float(backhaul.std()),
        iteration_histogram=tuple(sorted(histogram.items())),
        n_converged=sum(r.converged for r in records),
        n_audit_ok=sum(r.audit_ok for r in records))


def run_monte_carlo(config: ExperimentConfig) -> MetricsTable:
    """Run the full sweep grid and aggregate per cell.

    Repetitions execute independently (in parallel when workers > 1) and the
    reduction always walks run identifiers in sorted order, so the table is
    identical for any worker count.
    """
    cells = config.cells()
    tasks = [(config, ci, ri)
             for ci in range(len(cells)) for ri in range(config.run_count)]
    workers = config.workers if config.workers is not None \
        else (os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_execute_task, tasks, chunksize=1))
    else:
        outputs = [_execute_task(task) for task in tasks]

    records: list[RunRecord] = []
    cell_rates: dict[int, list[float]] = {ci: [] for ci in range(len(cells))}
    for (rec_list, rates), (_, ci, _) in zip(outputs, tasks):
        records.extend(rec_list)
        cell_rates[ci].extend(rates)
    records.sort(key=lambda r: (r.cell_index, r.rep_index, r.method))

    summaries = []
    for ci, cell in enumerate(cells):
        opt_records = [r for r in records
                       if r.cell_index == ci and r.method == METHOD_OPTIMIZE]
        base_records = [r for r in records
                        if r.cell_index == ci and r.method == METHOD_BASELINE]
        rate_cdf = None
        if config.interference is not None and cell_rates[ci]:
            rate_cdf = tuple(map(tuple, empirical_cdf(cell_rates[ci])))
        summaries.append(CellSummary(
            index=ci, params=cell, optimize=_aggregate(opt_records),
            baseline=_aggregate(base_records) if base_records else None,
            rate_cdf=rate_cdf))
    return MetricsTable(schema_version=SCHEMA_VERSION,
                        base_seed=config.base_seed,
                        run_count=config.run_count,
                        cells=tuple(summaries), records=tuple(records))


def _serving_links(solution: Solution, scenario: Scenario,
                   params: ChannelParams):
    """Signal power, bandwidth, and serving column per user."""
    columns = np.argmax(solution.rho, axis=1)
    n_users = scenario.n_users
    signal = np.zeros(n_users)
    band = np.zeros(n_users)
    user_pos = scenario.user_positions()
    mbs = np.asarray(scenario.mbs_position, dtype=float)
    geometry = min_elevation(params)
    for i in range(n_users):
        col = int(columns[i])
        beta = float(solution.beta[i, col])
        power = float(solution.link_powers[i, col])
        band[i] = beta * params.access_bandwidth
        if col == 0:
            d = max(float(np.hypot(*(user_pos[i] - mbs))), MIN_GROUND_DISTANCE)
            loss = path_loss_linear("mbs_user", d, params)
            signal[i] = power / loss
        else:
            pos = solution.abs_positions[col - 1]
            d = math.sqrt((pos[0] - user_pos[i, 0]) ** 2
                          + (pos[1] - user_pos[i, 1]) ** 2 + pos[2] ** 2)
            loss = path_loss_linear("abs_los", d, params)
            signal[i] = power * geometry.g0 / loss
    return columns, signal, band


def interference_rates(solution: Solution, scenario: Scenario,
                       params: ChannelParams,
                       mode: InterferenceMode) -> np.ndarray:
    """Achieved rate per user with powers and band splits held fixed."""
    columns, signal, band = _serving_links(solution, scenario, params)
    n_users = scenario.n_users
    interference = np.zeros(n_users)
    user_pos = scenario.user_positions()

    if mode.kind == "abs_sidelobe" and mode.g_side > 0.0:
        abs_totals = solution.link_powers[:, 1:].sum(axis=0)
        for i in range(n_users):
            col = int(columns[i])
            if col == 0:
                continue
            beta = float(solution.beta[i, col])
            for j in range(scenario.abs_count):
                if j == col - 1 or abs_totals[j] == 0.0:
                    continue
                pos = solution.abs_positions[j]
                d = math.sqrt((pos[0] - user_pos[i, 0]) ** 2
                              + (pos[1] - user_pos[i, 1]) ** 2 + pos[2] ** 2)
                loss = path_loss_linear("abs_los", d, params)
                # flat transmit spectrum, full overlap of the victim band
                interference[i] += abs_totals[j] * beta * mode.g_side / loss
    elif mode.kind == "user_to_user" and mode.antenna == "omni":
        on_abs = columns > 0
        for i in range(n_users):
            others = ~on_abs if on_abs[i] else on_abs
            if not others.any():
                continue
            deltas = user_pos[others] - user_pos[i]
            dists = np.maximum(np.hypot(deltas[:, 0], deltas[:, 1]),
                               MIN_GROUND_DISTANCE)
            losses = path_loss_linear("user_user", dists, params)
            received = mode.tx_power / losses
            if mode.pairing == "nearest":
                interference[i] = float(received[np.argmin(dists)])
            else:
                interference[i] = float(received.sum())

    noise = params.effective_noise_density * band
    rates = np.zeros(n_users)
    served = band > 0.0
    sinr = signal[served] / (noise[served] + interference[served])
    rates[served] = band[served] * np.log2(1.0 + sinr)
    return rates


def empirical_cdf(values) -> np.ndarray:
    """Right-continuous empirical CDF as an (m, 2) array of (value, fraction)."""
    data = np.sort(np.asarray(values, dtype=float).ravel())
    if data.size == 0:
        raise ValueError("empirical_cdf needs at least one value")
    if not np.all(np.isfinite(data)):
        raise ValueError("empirical_cdf values must be finite")
    uniques = np.unique(data)
    fractions = np.searchsorted(data, uniques, side="right") / data.size
    return np.column_stack([uniques, fractions])


def _method_dict(agg: MethodAggregate) -> dict:
    return {
        "n_runs": agg.n_runs,
        "mean_total_power": agg.mean_total_power,
        "std_total_power": agg.std_total_power,
        "mean_abs_power": agg.mean_abs_power,
        "std_abs_power": agg.std_abs_power,
        "mean_abs_users": agg.mean_abs_users,
        "std_abs_users": agg.std_abs_users,
        "mean_backhaul_per_abs": agg.mean_backhaul_per_abs,
        "std_backhaul_per_abs": agg.std_backhaul_per_abs,
        "iteration_histogram": {str(k): v for k, v in agg.iteration_histogram},
        "n_converged": agg.n_converged,
        "n_audit_ok": agg.n_audit_ok,
    }


def runs_csv_text(table: MetricsTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in table.records:
        writer.writerow(record.csv_row())
    return buffer.getvalue()


def summary_json_text(table: MetricsTable) -> str:
    cells = []
    for cell in table.cells:
        p = cell.params
        entry = {
            "index": cell.index,
            "params": {
                "n_users": p.n_users,
                "cov_target": p.cov_target,
                "cache_capacity": p.cache_capacity,
                "delay_fraction": p.delay_fraction,
                "backhaul_bandwidth": p.backhaul_bandwidth,
                "access_bandwidth": p.access_bandwidth,
            },
            "optimize": _method_dict(cell.optimize),
            "baseline": (None if cell.baseline is None
                         else _method_dict(cell.baseline)),
            "rate_cdf": (None if cell.rate_cdf is None
                         else [list(pair) for pair in cell.rate_cdf]),
        }
        cells.append(entry)
    payload = {
        "schema_version": table.schema_version,
        "base_seed": table.base_seed,
        "run_count": table.run_count,
        "cells": cells,
    }
    return json.dumps(payload, indent=2) + "\n"


def write_runs_csv(table: MetricsTable, path: str) -> None:
    atomic_write_text(path, runs_csv_text(table))


def write_summary_json(table: MetricsTable, path: str) -> None:
    atomic_write_text(path, summary_json_text(table))
