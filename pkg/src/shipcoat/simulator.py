"""Monte-Carlo sampling of power-law arrival paths and plan execution.

Paths come from inverting the cumulative intensity: unit-rate arrivals ``u``
after ``t1`` map to ``t = ((u + a t1^b) / a)^(1/b)``.  Random streams are
derived per block of ``BLOCK`` paths from ``(seed, block)``, so any block is
reproducible on its own and totals do not depend on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .economics import CostConfig, CostModel
from .fleet import CompartmentHistory, FleetDataset
from .nhpp import PowerLawParams, _as_interval, _cum
from .plans import PlanError, SchedulePlan

BLOCK = 4096


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _blocks(n_paths: int):
    for b, start in enumerate(range(0, n_paths, BLOCK)):
        yield b, min(BLOCK, n_paths - start)


def _map_blocks(fn, n_paths: int, threads: int) -> list:
    blocks = list(_blocks(n_paths))
    if threads <= 1 or len(blocks) == 1:
        return [fn(b, n) for b, n in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda bn: fn(*bn), blocks))


def _invert(a: float, b: float, t1: float, u):
    """Arrival times whose cumulative intensity from ``t1`` equals ``u``."""
    u = np.asarray(u, dtype=float)
    base = a * t1 ** b
    return ((u + base) / a) ** (1.0 / b)


@dataclass(frozen=True)
class ArrivalPath:
    times: np.ndarray
    t1: float
    t2: float
    seed: int

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("arrival times must be strictly increasing")

    def __len__(self):
        return self.times.size

    def count(self, lo: float, hi: float) -> int:
        return int(np.count_nonzero((self.times > lo) & (self.times <= hi)))


def sample_arrival_path(params: PowerLawParams, horizon, seed: int) -> ArrivalPath:
    """One exact path of arrivals on ``horizon``."""
    iv = _as_interval(horizon)
    t1, t2 = iv.t1, iv.t2
    rng = np.random.Generator(np.random.PCG64(seed))
    total = float(_cum(params.a, params.b, t1, t2))
    if total == 0:
        return ArrivalPath(np.zeros(0), t1, t2, seed)
    gaps = []
    acc = 0.0
    chunk = max(16, int(total + 4 * math.sqrt(total) + 16))
    while acc <= total:
        g = rng.exponential(size=chunk)
        gaps.append(g)
        acc += g.sum()
    u = np.cumsum(np.concatenate(gaps))
    u = u[u <= total]
    times = np.minimum(_invert(params.a, params.b, t1, u), t2)
    return ArrivalPath(times, t1, t2, seed)


def estimate_expected_age_mc(params: PowerLawParams, interval, k: int, n_paths: int,
                             seed: int, threads: int = 1):
    """Monte-Carlo mean of ``(t2 - T_k) 1[T_k <= t2]`` and its standard error.

    In the transformed time scale the k-th arrival is a Gamma(k, 1) variate.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    iv = _as_interval(interval)
    t1, t2 = iv.t1, iv.t2
    total = float(_cum(params.a, params.b, t1, t2))

    def block(b, n):
        g = _block_rng(seed, b).gamma(k, size=n)
        hit = g <= total
        age = np.zeros(n)
        age[hit] = np.maximum(t2 - _invert(params.a, params.b, t1, g[hit]), 0.0)
        return age.sum(), np.square(age).sum()

    parts = _map_blocks(block, n_paths, threads)
    s = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s / n_paths
    var = max(s2 - n_paths * mean * mean, 0.0) / (n_paths - 1)
    return mean, math.sqrt(var / n_paths)


@dataclass
class SimulationResult:
    """Per-path realized plan costs.

    ``counts[p, j]`` and ``age_sums[p, j]`` refer to inspection ``j`` in the
    order of ``inspections`` (compartment key, grid index).
    """

    path_cost: np.ndarray
    setup: float
    inspection: float
    repair: np.ndarray
    inspections: list
    counts: np.ndarray | None = None
    age_sums: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.path_cost.size

    @property
    def mean(self) -> float:
        return float(np.mean(self.path_cost))

    @property
    def se(self) -> float:
        if self.n_paths < 2:
            return 0.0
        return float(np.std(self.path_cost, ddof=1) / math.sqrt(self.n_paths))

    def summary(self) -> dict:
        out = {
            "n_paths": self.n_paths,
            "mean_cost": self.mean,
            "se_cost": self.se,
            "setup_cost": self.setup,
            "inspection_cost": self.inspection,
            "mean_repair_cost": float(np.mean(self.repair)),
        }
        if self.counts is not None:
            out["mean_defects_found"] = float(self.counts.sum(axis=1).mean())
            total_age = self.age_sums.sum(axis=1)
            out["mean_total_age"] = float(total_age.mean())
        out.update(self.meta)
        return out


def simulate_plan(plan: SchedulePlan, fleet_params: dict, config: CostConfig, n_paths: int,
                  seed: int, floors: dict | None = None, threads: int = 1,
                  keep_details: bool = True) -> SimulationResult:
    """Execute ``plan`` on sampled arrival paths with minimal repair.

    Each inspection costs ``c_ins`` plus ``alpha * age^beta`` for every defect
    that arrived since the compartment's previous inspection (realized
    ages), and each ship event costs ``c_s``.
    """
    if not plan.feasible:
        raise PlanError("every compartment must be inspected at the final grid point")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    hz = plan.horizon
    rows = []  # (key, k, a, b, prev_time, time)
    for key in plan.keys:
        p = fleet_params[key]
        if not isinstance(p, PowerLawParams):
            raise TypeError("simulate_plan needs one PowerLawParams per compartment")
        prev = hz.t_now if floors is None else floors.get(key, hz.t_now)
        for k in plan.inspection_indices(key):
            rows.append((key, k, p.a, p.b, prev, hz.time(k)))
            prev = hz.time(k)
    a = np.array([r[2] for r in rows])
    b = np.array([r[3] for r in rows])
    lo = np.array([r[4] for r in rows])
    hi = np.array([r[5] for r in rows])
    lam = _cum(a, b, lo, hi) if rows else np.zeros(0)
    base = a * lo ** b
    alpha, beta = config.repair_alpha, config.repair_beta
    J = len(rows)

    def block(bi, n):
        rng = _block_rng(seed, bi)
        counts = rng.poisson(np.broadcast_to(lam, (n, J)))
        flat = counts.ravel()
        total = int(flat.sum())
        col = np.repeat(np.tile(np.arange(J), n), flat)
        u = rng.random(total) * lam[col]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((u + base[col]) / a[col]) ** (1.0 / b[col])
        age = np.clip(hi[col] - t, 0.0, None)
        cell = np.repeat(np.arange(n * J), flat)
        age_sums = np.bincount(cell, weights=age, minlength=n * J).reshape(n, J)
        cost = np.bincount(cell, weights=alpha * age ** beta, minlength=n * J).reshape(n, J)
        return counts, age_sums, cost.sum(axis=1)

    parts = _map_blocks(block, n_paths, threads)
    repair = np.concatenate([p[2] for p in parts])
    setup = plan.n_events * config.ship_setup_cost
    inspection = plan.n_inspections * config.compartment_inspection_cost
    res = SimulationResult(setup + inspection + repair, float(setup), float(inspection), repair,
                           [(r[0], r[1]) for r in rows])
    if keep_details:
        res.counts = np.concatenate([p[0] for p in parts])
        res.age_sums = np.concatenate([p[1] for p in parts])
    return res


def jensen_gap(plan: SchedulePlan, fleet_params: dict, config: CostConfig, n_paths: int,
               seed: int, floors: dict | None = None, threads: int = 1) -> dict:
    """Simulated mean cost against the expected-age cost of the same plan."""
    sim = simulate_plan(plan, fleet_params, config, n_paths, seed, floors, threads, keep_details=False)
    analytic = CostModel(fleet_params, config, plan.horizon, floors).plan_cost(plan)
    gap = sim.mean - analytic
    return {
        "analytic_cost": analytic,
        "simulated_mean_cost": sim.mean,
        "simulated_se": sim.se,
        "gap": gap,
        "gap_in_se": gap / sim.se if sim.se > 0 else (0.0 if gap == 0 else math.copysign(math.inf, gap)),
        "n_paths": sim.n_paths,
        "repair_beta": config.repair_beta,
    }


@dataclass(frozen=True)
class Population:
    """Normal population of per-compartment ``(ln a, ln b)``."""

    mean_ln_a: float = math.log(0.002)
    mean_ln_b: float = math.log(1.5)
    sd_ln_a: float = 0.5
    sd_ln_b: float = 0.1

    def __post_init__(self):
        if self.sd_ln_a < 0 or self.sd_ln_b < 0:
            raise ValueError("population sds must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


PRACTICE_REGIME = (12.0, 24.0, 30.0, 60.0)


def _regime_for(regime, s: int, c: int, n_comp: int) -> float:
    if isinstance(regime, (int, float)):
        return float(regime)
    regime = tuple(regime)
    # contiguous blocks of compartments share an interval, as in a ship's survey plan
    return float(regime[(c * len(regime)) // max(n_comp, 1)])


def synthesize_fleet(n_ships: int, n_compartments: int, population: Population = Population(),
                     regime=PRACTICE_REGIME, t_end: float = 120.0, seed: int = 0,
                     return_params: bool = False):
    """Synthetic inspection records drawn from a known parameter population.

    ``regime`` is one interval in months or a sequence of intervals spread
    over each ship's compartments in contiguous blocks.  Inspections fall at
    every multiple of the interval up to ``t_end``.
    """
    if n_ships < 0 or n_compartments < 0:
        raise ValueError("counts must be nonnegative")
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    width_s = max(2, len(str(n_ships)))
    width_c = max(2, len(str(n_compartments)))
    histories, truth = [], {}
    for s in range(n_ships):
        for c in range(n_compartments):
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(s, c))))
            z = rng.standard_normal(2)
            ln_a = population.mean_ln_a + population.sd_ln_a * z[0]
            ln_b = population.mean_ln_b + population.sd_ln_b * z[1]
            interval = _regime_for(regime, s, c, n_compartments)
            if not interval > 0:
                raise ValueError("regime intervals must be positive")
            times = interval * np.arange(1, int(math.floor(t_end / interval + 1e-9)) + 1)
            if times.size == 0:
                continue
            edges = np.concatenate([[0.0], times])
            lam = _cum(math.exp(ln_a), math.exp(ln_b), edges[:-1], edges[1:])
            counts = rng.poisson(lam)
            key = (f"S{s + 1:0{width_s}d}", f"C{c + 1:0{width_c}d}")
            histories.append(CompartmentHistory(key[0], key[1], times, counts))
            truth[key] = PowerLawParams.from_log(ln_a, ln_b)
    data = FleetDataset(histories)
    return (data, truth) if return_params else data
