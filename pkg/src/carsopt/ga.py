"""Island-based NSGA-II baseline sharing the problem/fitness/evaluator stack.

Each island evolves independently (no migration) with binary tournament
selection on (rank, crowding distance), simulated binary crossover with an
extra blend stage, and two-level Gaussian mutation.  All genomes live in the
unit hypercube; clamping keeps variation inside it.  After the last
generation the islands' non-dominated sets are merged and re-sorted.

Objectives follow the maximization convention; boundary penalties (weighted
by rho = 10,000) are subtracted from every objective of an individual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import fitness as fit
from .engine import LOG_VERSION, SampleRecord
from .problem import ProblemSpec, sampled_dimensions
from .evaluators import EvaluationRequest

__all__ = [
    "IslandConfig",
    "Individual",
    "GAResult",
    "nondominated_sort",
    "crowding_distance",
    "gaussian_mutate",
    "sbx_crossover",
    "run_islands",
    "GA_DEFAULTS",
]

# Variation defaults: deliberately explorative settings.
GA_DEFAULTS = dict(
    p_mutate=0.1,
    p_mutate_val=0.3,
    sigma_mutate=0.4,
    p_crossover=0.95,
    alpha_crossover=0.2,
    eta_crossover=1.0,
)


@dataclass
class IslandConfig:
    n_islands: int
    population_size: int
    generations: int
    p_mutate: float = GA_DEFAULTS["p_mutate"]
    p_mutate_val: float = GA_DEFAULTS["p_mutate_val"]
    sigma_mutate: float = GA_DEFAULTS["sigma_mutate"]
    p_crossover: float = GA_DEFAULTS["p_crossover"]
    alpha_crossover: float = GA_DEFAULTS["alpha_crossover"]
    eta_crossover: float = GA_DEFAULTS["eta_crossover"]

    def __post_init__(self):
        for p in (self.p_mutate, self.p_mutate_val, self.p_crossover):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must be in [0, 1]")
        if self.sigma_mutate <= 0:
            raise ValueError("sigma_mutate must be > 0")

    @property
    def total_evaluations(self) -> int:
        return self.n_islands * self.population_size * (self.generations + 1)


@dataclass
class Individual:
    genome: np.ndarray  # unit-space coordinates
    objectives: np.ndarray | None = None
    rank: int = -1
    crowding: float = 0.0
    valid: bool = False
    record_id: int = -1


@dataclass
class GAResult:
    records: list[SampleRecord]
    front0: list[Individual]
    total_evaluations: int
    config: IslandConfig


# ---------------------------------------------------------------------------
# NSGA-II primitives
# ---------------------------------------------------------------------------

def _dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """Maximization: a dominates b iff >= everywhere and > somewhere."""
    return bool(np.all(a >= b) and np.any(a > b))


def nondominated_sort(objectives: np.ndarray) -> list[list[int]]:
    """Fast non-dominated sorting; returns fronts as index lists (front 0 first)."""
    objectives = np.asarray(objectives, dtype=float)
    n = len(objectives)
    # Pairwise dominance matrix: dom[i, j] = i dominates j.
    ge = np.all(objectives[:, None, :] >= objectives[None, :, :], axis=2)
    gt = np.any(objectives[:, None, :] > objectives[None, :, :], axis=2)
    dom = ge & gt
    dominated_count = dom.sum(axis=0)
    fronts = []
    remaining = np.arange(n)
    counts = dominated_count.copy()
    assigned = np.zeros(n, dtype=bool)
    while not assigned.all():
        current = [int(i) for i in remaining if not assigned[i] and counts[i] == 0]
        if not current:  # numeric pathologies (all-NaN etc.): dump the rest
            current = [int(i) for i in remaining if not assigned[i]]
        fronts.append(current)
        for i in current:
            assigned[i] = True
            counts[dom[i]] -= 1
    return fronts


def crowding_distance(objectives: np.ndarray) -> np.ndarray:
    """NSGA-II crowding distance within one front (larger = less crowded)."""
    objectives = np.asarray(objectives, dtype=float)
    n, m = objectives.shape
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for j in range(m):
        order = np.argsort(objectives[:, j], kind="stable")
        lo, hi = objectives[order[0], j], objectives[order[-1], j]
        dist[order[0]] = dist[order[-1]] = np.inf
        if hi == lo:
            continue
        gaps = (objectives[order[2:], j] - objectives[order[:-2], j]) / (hi - lo)
        dist[order[1:-1]] += gaps
    return dist


def _better(a: Individual, b: Individual) -> Individual:
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a


def _tournament(pop: list[Individual], rng: np.random.Generator) -> Individual:
    i, j = rng.integers(0, len(pop), size=2)
    return _better(pop[i], pop[j])


# ---------------------------------------------------------------------------
# Variation operators
# ---------------------------------------------------------------------------

def gaussian_mutate(genome: np.ndarray, rng: np.random.Generator, cfg: IslandConfig) -> np.ndarray:
    """Two-level Gaussian mutation; the result is clamped to [0, 1]."""
    if rng.random() >= cfg.p_mutate:
        return genome.copy()
    out = genome.copy()
    mask = rng.random(len(genome)) < cfg.p_mutate_val
    out[mask] += rng.normal(0.0, cfg.sigma_mutate, size=mask.sum())
    return np.clip(out, 0.0, 1.0)


def sbx_crossover(
    a: np.ndarray, b: np.ndarray, rng: np.random.Generator, cfg: IslandConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Simulated binary crossover followed by a symmetric blend stage.

    The per-gene spread factor comes from the eta-parameterized polynomial
    distribution; the blend stage draws gamma in [-alpha, 1 + alpha] per gene.
    Both stages conserve the per-gene midpoint before clamping.
    """
    if rng.random() >= cfg.p_crossover:
        return a.copy(), b.copy()
    u = rng.random(len(a))
    exp = 1.0 / (cfg.eta_crossover + 1.0)
    beta = np.where(u <= 0.5, (2.0 * u) ** exp, (1.0 / (2.0 * (1.0 - u))) ** exp)
    c1 = 0.5 * ((1.0 + beta) * a + (1.0 - beta) * b)
    c2 = 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b)
    gamma = (1.0 + 2.0 * cfg.alpha_crossover) * rng.random(len(a)) - cfg.alpha_crossover
    d1 = (1.0 - gamma) * c1 + gamma * c2
    d2 = gamma * c1 + (1.0 - gamma) * c2
    return np.clip(d1, 0.0, 1.0), np.clip(d2, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Evolution loop
# ---------------------------------------------------------------------------

def _island_rng(seed: int, island: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(1_000_000 + island,)))
    )


def _assign_ranks(pop: list[Individual]) -> list[list[int]]:
    objs = np.array([ind.objectives for ind in pop])
    fronts = nondominated_sort(objs)
    for rank, front in enumerate(fronts):
        dists = crowding_distance(objs[front])
        for idx, d in zip(front, dists):
            pop[idx].rank = rank
            pop[idx].crowding = float(d)
    return fronts


class _IslandRun:
    def __init__(self, spec, evaluator, cfg, island_id, emit, id_start):
        self.spec = spec
        self.evaluator = evaluator
        self.cfg = cfg
        self.island_id = island_id
        self.emit = emit
        self.dims = sampled_dimensions(spec)
        self.next_id = id_start
        self.records: list[SampleRecord] = []

    def evaluate(self, genomes: list[np.ndarray], generation: int) -> list[Individual]:
        from .engine import _physical_params

        requests = []
        for g in genomes:
            requests.append(EvaluationRequest(self.next_id, _physical_params(self.spec, self.dims, g)))
            self.next_id += 1
        results = self.evaluator.evaluate_batch(requests)
        by_id = {r.sample_id: r for r in results}
        individuals = []
        for g, req in zip(genomes, requests):
            res = by_id[req.sample_id]
            bd = fit.evaluate_breakdown(self.spec, res.meas)
            vec = fit.ga_objective_vector(bd)
            ind = Individual(genome=g, objectives=vec, valid=bd.valid, record_id=req.sample_id)
            rec = SampleRecord(
                sample_id=req.sample_id,
                iteration=generation,
                subdomain=(),
                unit=tuple(float(x) for x in g),
                params=req.params,
                meas=res.meas,
                error=res.error,
                breakdown=bd,
                fitness=float(np.mean(vec)),
                valid=bd.valid,
            )
            self.records.append(rec)
            self.emit(rec, generation, self.island_id)
            individuals.append(ind)
        return individuals

    def evolve(self, rng: np.random.Generator) -> list[Individual]:
        cfg = self.cfg
        n_dim = len(self.dims)
        genomes = [rng.random(n_dim) for _ in range(cfg.population_size)]
        pop = self.evaluate(genomes, 0)
        _assign_ranks(pop)
        for gen in range(1, cfg.generations + 1):
            offspring_genomes = []
            while len(offspring_genomes) < cfg.population_size:
                p1 = _tournament(pop, rng)
                p2 = _tournament(pop, rng)
                c1, c2 = sbx_crossover(p1.genome, p2.genome, rng, cfg)
                offspring_genomes.append(gaussian_mutate(c1, rng, cfg))
                if len(offspring_genomes) < cfg.population_size:
                    offspring_genomes.append(gaussian_mutate(c2, rng, cfg))
            offspring = self.evaluate(offspring_genomes, gen)
            combined = pop + offspring
            fronts = _assign_ranks(combined)
            survivors: list[Individual] = []
            for front in fronts:
                if len(survivors) + len(front) <= cfg.population_size:
                    survivors.extend(combined[i] for i in front)
                else:
                    room = cfg.population_size - len(survivors)
                    ordered = sorted(front, key=lambda i: -combined[i].crowding)
                    survivors.extend(combined[i] for i in ordered[:room])
                    break
            pop = survivors
        return pop


def run_islands(
    spec: ProblemSpec,
    cfg: IslandConfig,
    evaluator,
    seed: int = 0,
    log_path=None,
) -> GAResult:
    """Evolve every island independently and merge their non-dominated sets.

    Island i uses an RNG stream derived from (seed, i), so its trajectory is
    unaffected by the other islands.  Sample ids are unique across islands.
    """
    log = open(log_path, "w") if log_path else None

    def emit_obj(obj):
        if log:
            log.write(json.dumps(obj) + "\n")

    def emit_sample(rec: SampleRecord, generation: int, island: int):
        from .engine import _sample_to_json

        obj = _sample_to_json(rec)
        obj["island"] = island
        emit_obj(obj)

    emit_obj(
        {
            "type": "run",
            "version": LOG_VERSION,
            "method": "ga",
            "seed": seed,
            "n_total": cfg.total_evaluations,
            "n_subdomain": 0,
            "n_pool": 0,
            "oversampling": False,
            "alpha_schedule": "",
            "n_dim": len(sampled_dimensions(spec)),
            "dimensions": [d.label for d in sampled_dimensions(spec)],
            "islands": cfg.n_islands,
            "population_size": cfg.population_size,
            "generations": cfg.generations,
        }
    )

    all_records: list[SampleRecord] = []
    merged_front: list[Individual] = []
    id_stride = cfg.population_size * (cfg.generations + 1)
    try:
        for island in range(cfg.n_islands):
            emit_obj({"type": "island", "island": island})
            runner = _IslandRun(spec, evaluator, cfg, island, emit_sample, island * id_stride)
            final_pop = runner.evolve(_island_rng(seed, island))
            all_records.extend(runner.records)
            merged_front.extend(ind for ind in final_pop if ind.rank == 0)
    finally:
        if log:
            log.close()

    if merged_front:
        objs = np.array([ind.objectives for ind in merged_front])
        front0_idx = nondominated_sort(objs)[0]
        front0 = [merged_front[i] for i in front0_idx]
    else:
        front0 = []
    return GAResult(
        records=all_records,
        front0=front0,
        total_evaluations=cfg.total_evaluations,
        config=cfg,
    )
