"""Generational genetic algorithm over integer or binary genomes (minimization)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 3000
    max_generations: int = 50_000
    stagnation_limit: int = 10_000
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # default 1 / genome length
    elitism_count: int = 2
    tournament_size: int = 3
    stagnation_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must be in [0, population_size)")
        if self.max_generations < 1 or self.stagnation_limit < 1 or self.tournament_size < 1:
            raise ValueError("generation limits and tournament size must be >= 1")

    @classmethod
    def fast(cls, seed: int = 0, **kw) -> "GAConfig":
        return cls(population_size=200, stagnation_limit=500, max_generations=5000, seed=seed, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GAResult:
    best: np.ndarray
    best_cost: float
    generations: int
    history: list = field(default_factory=list)  # best cost after each generation


def _generation_rng(seed: int, generation: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(generation,))))


def _evaluate(fitness: Callable, pop: np.ndarray, threads: int, chunk: int = 256) -> np.ndarray:
    if threads <= 1 or pop.shape[0] <= chunk:
        return np.asarray(fitness(pop), dtype=float)
    parts = [pop[i:i + chunk] for i in range(0, pop.shape[0], chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.concatenate([np.asarray(r, dtype=float) for r in pool.map(fitness, parts)])


def run_ga(fitness: Callable, n_genes: int, low: int, high: int, config: GAConfig,
           seeds: np.ndarray | None = None, threads: int = 1) -> GAResult:
    """Minimize ``fitness`` over genomes with integer genes in ``[low, high]``.

    ``fitness`` maps a ``(P, n_genes)`` array to ``P`` costs.  Binary genomes
    (``low=0, high=1``) mutate by bit flip; wider genes by a random reset or a
    +-1 step with equal probability.  ``seeds`` are placed at the start of the
    initial population.  Results do not depend on ``threads``.
    """
    P = config.population_size
    rate = config.mutation_rate if config.mutation_rate is not None else 1.0 / max(n_genes, 1)
    binary = (low, high) == (0, 1)

    rng = _generation_rng(config.seed, 0)
    pop = rng.integers(low, high + 1, size=(P, n_genes))
    if seeds is not None and len(seeds):
        seeds = np.asarray(seeds, dtype=pop.dtype)[:P]
        pop[: seeds.shape[0]] = seeds
    cost = _evaluate(fitness, pop, threads)
    order = np.argsort(cost, kind="stable")
    best = pop[order[0]].copy()
    best_cost = float(cost[order[0]])
    history = [best_cost]
    stagnant = 0
    gen = 0
    n_child = P - config.elitism_count
    for gen in range(1, config.max_generations + 1):
        rng = _generation_rng(config.seed, gen)
        # tournament selection of two parents per child
        contestants = rng.integers(0, P, size=(2, n_child, config.tournament_size))
        winners = np.take_along_axis(contestants, np.argmin(cost[contestants], axis=2)[..., None],
                                     axis=2)[..., 0]
        pa, pb = pop[winners[0]], pop[winners[1]]
        # uniform crossover
        cross = rng.random(n_child) < config.crossover_rate
        take_b = (rng.random((n_child, n_genes)) < 0.5) & cross[:, None]
        child = np.where(take_b, pb, pa)
        # per-gene mutation
        mutate = rng.random((n_child, n_genes)) < rate
        if binary:
            child = np.where(mutate, 1 - child, child)
        else:
            reset = rng.random((n_child, n_genes)) < 0.5
            fresh = rng.integers(low, high + 1, size=(n_child, n_genes))
            step = np.where(rng.random((n_child, n_genes)) < 0.5, -1, 1)
            stepped = np.clip(child + step, low, high)
            child = np.where(mutate, np.where(reset, fresh, stepped), child)
        elite = pop[order[: config.elitism_count]]
        elite_cost = cost[order[: config.elitism_count]]
        child_cost = _evaluate(fitness, child, threads)
        pop = np.concatenate([elite, child])
        cost = np.concatenate([elite_cost, child_cost])
        order = np.argsort(cost, kind="stable")
        gen_best = float(cost[order[0]])
        if gen_best < best_cost - config.stagnation_tol:
            stagnant = 0
        else:
            stagnant += 1
        if gen_best < best_cost:
            best_cost = gen_best
            best = pop[order[0]].copy()
        history.append(best_cost)
        if stagnant >= config.stagnation_limit:
            break
    return GAResult(best, best_cost, gen, history)
