"""Network instances: user placement, traffic demands, content requests, caches.

A Scenario is an immutable description of one problem instance. Base stations
are indexed with the macro cell at column 0 and ABSs at columns 1..J throughout
the project; the cache-association matrix F follows that convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .records import (RecordError, atomic_write_text, coerce_fields,
                      format_record, parse_bool, parse_record_lines)

# Voronoi-area dispersion of an ideal Poisson process; measured CoV is the
# raw coefficient of variation divided by this constant so that Poisson ~ 1.
POISSON_AREA_COV = 0.529

DEFAULT_RATE_CHOICES = (5e6, 7e6, 1e7)  # bits/s


@dataclass(frozen=True)
class User:
    position: tuple[float, float]   # m, inside the region square
    rate_demand: float              # bits/s, > 0
    delay_sensitive: bool           # must be served from a cache when True
    requested_content: int          # 1-based catalog index

    def __post_init__(self) -> None:
        if len(self.position) != 2:
            raise ValueError("user position must be 2D")
        if not all(math.isfinite(v) for v in self.position):
            raise ValueError("user position must be finite")
        if self.rate_demand <= 0:
            raise ValueError("rate demand must be positive")
        if self.requested_content < 1:
            raise ValueError("requested content index is 1-based")


@dataclass(frozen=True)
class PointProcessConfig:
    kind: str = "uniform"             # "uniform" or "matern"
    parent_intensity: float = 1.5e-5  # matern: expected parents per m^2
    cluster_radius: float = 120.0     # matern: daughter scatter radius, m
    mean_daughters: float = 6.0       # matern: mean daughters per parent

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "matern"):
            raise ValueError(f"unknown point process kind {self.kind!r}")
        if self.kind == "matern":
            if self.parent_intensity <= 0 or self.cluster_radius <= 0 or self.mean_daughters <= 0:
                raise ValueError("matern parameters must be positive")


@dataclass(frozen=True)
class Scenario:
    region_side: float
    mbs_position: tuple[float, float]
    users: tuple[User, ...]
    abs_count: int
    catalog_size: int
    cache_capacity: int
    cache_matrix: np.ndarray       # E, (J, K) bool
    request_matrix: np.ndarray     # U, (I, K) bool
    cache_association: np.ndarray  # F, (I, J+1) bool, MBS column 0 all true
    seed: int | None = None        # generation seed, metadata only

    def __post_init__(self) -> None:
        if self.region_side <= 0:
            raise ValueError("region side must be positive")
        if self.abs_count < 0:
            raise ValueError("abs_count must be non-negative")
        if self.catalog_size < 1:
            raise ValueError("catalog_size must be at least 1")
        if not 0 <= self.cache_capacity <= self.catalog_size:
            raise ValueError("cache_capacity must lie in [0, catalog_size]")
        for arr_name in ("cache_matrix", "request_matrix", "cache_association"):
            arr = np.asarray(getattr(self, arr_name), dtype=bool)
            arr.setflags(write=False)
            object.__setattr__(self, arr_name, arr)
        i, j, k = len(self.users), self.abs_count, self.catalog_size
        if self.cache_matrix.shape != (j, k):
            raise ValueError("cache matrix must be (abs_count, catalog_size)")
        if self.request_matrix.shape != (i, k):
            raise ValueError("request matrix must be (n_users, catalog_size)")
        if self.cache_association.shape != (i, j + 1):
            raise ValueError("cache association must be (n_users, abs_count+1)")
        if i and not np.all(self.request_matrix.sum(axis=1) == 1):
            raise ValueError("each request row must have exactly one entry")
        if j and not np.all(self.cache_matrix.sum(axis=1) == self.cache_capacity):
            raise ValueError("each cache row must hold exactly cache_capacity contents")
        if i and not np.all(self.cache_association[:, 0]):
            raise ValueError("MBS column of the cache association must be all true")
        expected_f = self.request_matrix @ self.cache_matrix.T
        if not np.array_equal(self.cache_association[:, 1:], expected_f.astype(bool)):
            raise ValueError("cache association must equal U E^T on ABS columns")
        for user in self.users:
            x, y = user.position
            if not (0 <= x <= self.region_side and 0 <= y <= self.region_side):
                raise ValueError("user position outside the region")
            if user.requested_content > self.catalog_size:
                raise ValueError("requested content index exceeds catalog size")

    @property
    def n_users(self) -> int:
        return len(self.users)

    def user_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.users], dtype=float).reshape(-1, 2)

    def rate_demands(self) -> np.ndarray:
        return np.array([u.rate_demand for u in self.users], dtype=float)

    def delay_flags(self) -> np.ndarray:
        return np.array([u.delay_sensitive for u in self.users], dtype=bool)


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for sampling a random Scenario."""

    n_users: int = 70
    region_side: float = 1000.0
    abs_count: int = 3
    catalog_size: int = 10
    cache_capacity: int = 2
    zipf_alpha: float = 0.8
    delay_fraction: float = 0.1
    rate_choices: tuple[float, ...] = DEFAULT_RATE_CHOICES
    point_process: PointProcessConfig = field(default_factory=PointProcessConfig)
    cov_target: float | None = None   # rejection-sample scenarios to this CoV when set
    cov_window: float = 0.15
    max_rejections: int = 500

    def __post_init__(self) -> None:
        if self.n_users < 0:
            raise ValueError("n_users must be non-negative")
        if not 0.0 <= self.delay_fraction <= 1.0:
            raise ValueError("delay_fraction must lie in [0, 1]")
        if self.zipf_alpha < 0:
            raise ValueError("zipf_alpha must be non-negative")
        if any(r <= 0 for r in self.rate_choices) or not self.rate_choices:
            raise ValueError("rate_choices must be positive and non-empty")
        if self.cov_target is not None and self.cov_target <= 0:
            raise ValueError("cov_target must be positive when set")


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def generate_user_positions(config: PointProcessConfig, n_target: int,
                            region_side: float, rng) -> np.ndarray:
    """Sample n_target positions in the region square, shape (n_target, 2)."""
    if n_target < 0:
        raise ValueError("n_target must be non-negative")
    if region_side <= 0:
        raise ValueError("region_side must be positive")
    rng = _as_rng(rng)
    if n_target == 0:
        return np.empty((0, 2), dtype=float)
    if config.kind == "uniform":
        return rng.uniform(0.0, region_side, size=(n_target, 2))

    # Matern cluster process with a deterministic parent count per draw. More
    # cluster batches are added until enough daughters exist, then a uniform
    # subsample keeps exactly n_target of them.
    area = region_side * region_side
    n_parents = max(1, round(config.parent_intensity * area))
    daughters: list[np.ndarray] = []
    total = 0
    while total < n_target:
        parents = rng.uniform(0.0, region_side, size=(n_parents, 2))
        counts = rng.poisson(config.mean_daughters, size=n_parents)
        for parent, count in zip(parents, counts):
            for _ in range(int(count)):
                # redraw within the cluster disc until inside the region;
                # the parent is inside, so this terminates almost surely
                while True:
                    radius = config.cluster_radius * math.sqrt(rng.uniform())
                    angle = rng.uniform(0.0, 2.0 * math.pi)
                    point = parent + radius * np.array([math.cos(angle), math.sin(angle)])
                    if 0.0 <= point[0] <= region_side and 0.0 <= point[1] <= region_side:
                        daughters.append(point)
                        total += 1
                        break
    pool = np.vstack(daughters)
    keep = rng.choice(total, size=n_target, replace=False)
    return pool[keep]


def compute_cov(positions, region_side: float, origin=(0.0, 0.0), grid_n: int = 500) -> float:
    """Coefficient of variation of the users' Voronoi cell areas.

    Cell areas come from nearest-user labeling of a dense grid over the region
    square anchored at origin; the raw dispersion is normalized so that an
    ideal Poisson configuration measures about 1.
    """
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("compute_cov needs at least 3 two-dimensional points")
    if len(np.unique(pts, axis=0)) != len(pts):
        raise ValueError("compute_cov requires distinct points")
    if grid_n < 2:
        raise ValueError("grid_n must be at least 2")
    ox, oy = float(origin[0]), float(origin[1])
    step = region_side / grid_n
    centers = ox + step * (np.arange(grid_n) + 0.5)
    centers_y = oy + step * (np.arange(grid_n) + 0.5)
    gx, gy = np.meshgrid(centers, centers_y, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    _, labels = cKDTree(pts).query(grid)
    counts = np.bincount(labels, minlength=len(pts)).astype(float)
    areas = counts * step * step
    mean = areas.mean()
    std = areas.std(ddof=1)
    return float(std / mean / POISSON_AREA_COV)


def zipf_pmf(catalog_size: int, alpha: float) -> np.ndarray:
    """Popularity of contents 1..K, proportional to rank^(-alpha)."""
    if catalog_size < 1:
        raise ValueError("catalog_size must be at least 1")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    weights = np.arange(1, catalog_size + 1, dtype=float) ** (-alpha)
    return weights / weights.sum()


def top_popular_cache(pmf: np.ndarray, cache_capacity: int, abs_count: int) -> np.ndarray:
    """Identical caches holding the cache_capacity most popular contents."""
    order = np.argsort(-pmf, kind="stable")
    row = np.zeros(len(pmf), dtype=bool)
    row[order[:cache_capacity]] = True
    return np.tile(row, (abs_count, 1))


def build_requests_and_cache(n_users: int, catalog_size: int, alpha: float,
                             cache_capacity: int, abs_count: int, rng,
                             cache_strategy=top_popular_cache):
    """Sample the request matrix U and build cache matrices E and F."""
    if cache_capacity > catalog_size:
        raise ValueError("cache_capacity cannot exceed catalog_size")
    rng = _as_rng(rng)
    pmf = zipf_pmf(catalog_size, alpha)
    requests = rng.choice(catalog_size, size=n_users, p=pmf)
    u = np.zeros((n_users, catalog_size), dtype=bool)
    u[np.arange(n_users), requests] = True
    e = np.asarray(cache_strategy(pmf, cache_capacity, abs_count), dtype=bool)
    f = np.ones((n_users, abs_count + 1), dtype=bool)
    f[:, 1:] = u @ e.T
    return u, e, f


def generate_scenario(config: GenerationConfig, rng) -> Scenario:
    """Sample a full Scenario; deterministic given the RNG state."""
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = _as_rng(rng)
    positions = _positions_with_cov_target(config, rng)
    rates = np.asarray(config.rate_choices, dtype=float)[
        rng.integers(0, len(config.rate_choices), size=config.n_users)]
    n_delay = round(config.delay_fraction * config.n_users)
    delay = np.zeros(config.n_users, dtype=bool)
    if n_delay:
        delay[rng.choice(config.n_users, size=n_delay, replace=False)] = True
    u, e, f = build_requests_and_cache(
        config.n_users, config.catalog_size, config.zipf_alpha,
        config.cache_capacity, config.abs_count, rng)
    content_ids = np.argmax(u, axis=1) + 1 if config.n_users else np.empty(0, dtype=int)
    users = tuple(
        User(position=(float(x), float(y)), rate_demand=float(r),
             delay_sensitive=bool(t), requested_content=int(cid))
        for (x, y), r, t, cid in zip(positions, rates, delay, content_ids))
    return Scenario(
        region_side=config.region_side,
        mbs_position=(config.region_side / 2.0, config.region_side / 2.0),
        users=users,
        abs_count=config.abs_count,
        catalog_size=config.catalog_size,
        cache_capacity=config.cache_capacity,
        cache_matrix=e,
        request_matrix=u,
        cache_association=f,
        seed=int(seed) if seed is not None else None,
    )


def _positions_with_cov_target(config: GenerationConfig, rng: np.random.Generator) -> np.ndarray:
    if config.cov_target is None or config.n_users < 3:
        return generate_user_positions(config.point_process, config.n_users,
                                       config.region_side, rng)
    for _ in range(config.max_rejections):
        positions = generate_user_positions(config.point_process, config.n_users,
                                            config.region_side, rng)
        measured = compute_cov(positions, config.region_side)
        if abs(measured - config.cov_target) <= config.cov_window:
            return positions
    raise ValueError(
        f"could not reach CoV {config.cov_target} +- {config.cov_window} in "
        f"{config.max_rejections} draws; adjust the point process parameters")


# --- scenario files --------------------------------------------------------
# Format documented in docs/file_formats.md. One header record, one record per
# user; caches are rebuilt as top-popularity on load.

_HEADER_SPEC = {
    "region_side": float, "mbs_x": float, "mbs_y": float, "abs_count": int,
    "catalog_size": int, "cache_capacity": int, "seed": lambda s: None if s == "none" else int(s),
}
_USER_SPEC = {"x": float, "y": float, "eta_bps": float, "tau": parse_bool, "content_id": int}


def save_scenario(scenario: Scenario, path: str) -> None:
    lines = ["# absnet scenario v1"]
    lines.append(format_record("scenario", {
        "region_side": scenario.region_side,
        "mbs_x": scenario.mbs_position[0],
        "mbs_y": scenario.mbs_position[1],
        "abs_count": scenario.abs_count,
        "catalog_size": scenario.catalog_size,
        "cache_capacity": scenario.cache_capacity,
        "seed": scenario.seed,
    }))
    for user in scenario.users:
        lines.append(format_record("user", {
            "x": user.position[0],
            "y": user.position[1],
            "eta_bps": user.rate_demand,
            "tau": user.delay_sensitive,
            "content_id": user.requested_content,
        }))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_scenario(path: str) -> Scenario:
    with open(path) as handle:
        text = handle.read()
    header = None
    users: list[User] = []
    for lineno, kind, raw in parse_record_lines(text):
        if kind == "scenario":
            if header is not None:
                raise RecordError(f"line {lineno}: duplicate scenario header")
            header = coerce_fields(kind, raw, _HEADER_SPEC, required=[
                "region_side", "mbs_x", "mbs_y", "abs_count", "catalog_size", "cache_capacity"])
        elif kind == "user":
            fields_ = coerce_fields(kind, raw, _USER_SPEC, required=list(_USER_SPEC))
            users.append(User(position=(fields_["x"], fields_["y"]),
                              rate_demand=fields_["eta_bps"],
                              delay_sensitive=fields_["tau"],
                              requested_content=fields_["content_id"]))
        else:
            raise RecordError(f"line {lineno}: unknown record kind {kind!r}")
    if header is None:
        raise RecordError("scenario file has no header record")
    k = header["catalog_size"]
    n = len(users)
    u = np.zeros((n, k), dtype=bool)
    for i, user in enumerate(users):
        if user.requested_content > k:
            raise RecordError(f"user {i}: content_id exceeds catalog_size")
        u[i, user.requested_content - 1] = True
    e = top_popular_cache(zipf_pmf(k, 1.0), header["cache_capacity"], header["abs_count"])
    f = np.ones((n, header["abs_count"] + 1), dtype=bool)
    f[:, 1:] = u @ e.T
    return Scenario(
        region_side=header["region_side"],
        mbs_position=(header["mbs_x"], header["mbs_y"]),
        users=tuple(users),
        abs_count=header["abs_count"],
        catalog_size=k,
        cache_capacity=header["cache_capacity"],
        cache_matrix=e,
        request_matrix=u,
        cache_association=f,
        seed=header.get("seed"),
    )


def with_cache_capacity(scenario: Scenario, cache_capacity: int) -> Scenario:
    """Same scenario with caches rebuilt at a different capacity."""
    e = top_popular_cache(zipf_pmf(scenario.catalog_size, 1.0), cache_capacity,
                          scenario.abs_count)
    f = np.ones((scenario.n_users, scenario.abs_count + 1), dtype=bool)
    f[:, 1:] = scenario.request_matrix @ e.T
    return replace(scenario, cache_capacity=cache_capacity, cache_matrix=e,
                   cache_association=f)
