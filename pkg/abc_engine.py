"""
Binary Artificial Bee Colony with a uniformly sampled operator pool.

Every iteration runs three phases:

    employed   one candidate per food source, all generated against the
               iteration's parent set; (P, C) becomes the PopulationSnapshot
    onlooker   N candidates on roulette-selected sources
    scout      sources whose trial counter exceeds `limit` are re-initialised

A candidate replaces its parent only on strict improvement. Each replacement
is handed to the recorder as a CaseRecord carrying the 19 landscape features
and the label of the operator that produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from case_dataset import CaseRecord, phase_of
from landscape_features import EAP_VARIANTS, PopulationSnapshot, feature_vector, population_features
from operators import OPERATORS, OperatorContext, apply_operator

logger = logging.getLogger(__name__)

# Configuration
DEFAULT_COLONY_SIZE = 20
DEFAULT_LIMIT = 100
MIN_ITERATIONS = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: object
    max_iter: int
    colony_size: int = DEFAULT_COLONY_SIZE
    limit: int = DEFAULT_LIMIT
    seed: int = 0
    operator_pool: tuple = tuple(OPERATORS)
    record_failures: bool = False
    eap_variant: str = "literal"
    run_id: int = 0

    @property
    def dims(self):
        return self.problem.dims

    def validate(self):
        if self.colony_size < 2:
            raise ConfigError(f"colony size must be >= 2, got {self.colony_size}")
        if self.max_iter < MIN_ITERATIONS:
            raise ConfigError(f"max_iter must be >= {MIN_ITERATIONS} so every phase is "
                              f"non-empty, got {self.max_iter}")
        if self.limit < 1:
            raise ConfigError(f"limit must be >= 1, got {self.limit}")
        if not self.operator_pool:
            raise ConfigError("operator pool is empty")
        unknown = [op for op in self.operator_pool if op not in OPERATORS]
        if unknown:
            raise ConfigError(f"unknown operator ids in pool: {unknown}")
        if self.eap_variant not in EAP_VARIANTS:
            raise ConfigError(f"eap variant must be one of {EAP_VARIANTS}, got {self.eap_variant!r}")
        if getattr(self.problem, "dims", 0) < 1:
            raise ConfigError("problem must have a positive dimension")
        return self


@dataclass
class Colony:
    foods: np.ndarray
    fitnesses: np.ndarray
    trials: np.ndarray
    gbest: np.ndarray
    gbest_fitness: float
    iteration: int = 0

    @property
    def size(self):
        return len(self.foods)

    def replace(self, i, solution, fitness):
        self.foods[i] = solution
        self.fitnesses[i] = fitness
        self.trials[i] = 0
        if fitness > self.gbest_fitness:
            self.gbest = solution.copy()
            self.gbest_fitness = float(fitness)


@dataclass
class Candidate:
    source: int
    op: int
    parent: np.ndarray
    parent_fitness: float
    child: np.ndarray
    child_fitness: float
    trial: int
    op_success: int
    op_total: int


@dataclass
class RunResult:
    run_id: int
    seed: int
    gbest: np.ndarray
    gbest_fitness: float
    initial_fitness: float
    trace: list = field(default_factory=list)
    success_counts: np.ndarray = None
    usage_counts: np.ndarray = None
    n_records: int = 0


def onlooker_select(fitnesses, rng) -> int:
    """Roulette-wheel index, proportional to fitness; uniform when all fitnesses are zero."""
    fitnesses = np.asarray(fitnesses, dtype=float)
    total = fitnesses.sum()
    if total <= 0:
        return int(rng.integers(len(fitnesses)))
    return int(rng.choice(len(fitnesses), p=fitnesses / total))


class BeeColony:
    """One seeded run of the colony; `recorder` receives CaseRecords (anything with .record)."""

    def __init__(self, config, recorder=None):
        self.config = config.validate()
        self.problem = config.problem
        self.recorder = recorder
        self.rng = np.random.default_rng(config.seed)
        self.success_counts = np.zeros(len(OPERATORS), dtype=int)
        self.usage_counts = np.zeros(len(OPERATORS), dtype=int)
        self.pool = np.asarray(config.operator_pool, dtype=int)
        self.n_records = 0
        self.colony = self._initial_colony()

    def _initial_colony(self):
        foods = np.stack([self.problem.random_solution(self.rng)
                          for _ in range(self.config.colony_size)])
        fitnesses = np.array([self.problem.evaluate(x) for x in foods], dtype=float)
        best = int(np.argmax(fitnesses))
        return Colony(foods=foods, fitnesses=fitnesses,
                      trials=np.zeros(len(foods), dtype=int),
                      gbest=foods[best].copy(), gbest_fitness=float(fitnesses[best]))

    def _neighbor_of(self, i):
        k = int(self.rng.integers(self.colony.size - 1))
        return k + 1 if k >= i else k

    def propose(self, i, foods=None) -> Candidate:
        """Draw an operator and a neighbour, build and evaluate one child of source i."""
        colony = self.colony
        foods = colony.foods if foods is None else foods
        op = int(self.rng.choice(self.pool))
        ctx = OperatorContext(parent=colony.foods[i], neighbor=foods[self._neighbor_of(i)],
                              gbest=colony.gbest, rng=self.rng)
        child = apply_operator(op, ctx, self.problem)
        candidate = Candidate(
            source=i, op=op,
            parent=colony.foods[i].copy(), parent_fitness=float(colony.fitnesses[i]),
            child=child, child_fitness=self.problem.evaluate(child),
            trial=int(colony.trials[i]),
            op_success=int(self.success_counts[op]), op_total=int(self.usage_counts[op]),
        )
        self.usage_counts[op] += 1
        return candidate

    def accept(self, candidate, snapshot, population) -> bool:
        """Greedy selection; emits the case and updates counters."""
        improved = candidate.child_fitness > candidate.parent_fitness
        if improved:
            self.colony.replace(candidate.source, candidate.child, candidate.child_fitness)
            self.success_counts[candidate.op] += 1
        else:
            self.colony.trials[candidate.source] += 1
        if improved or self.config.record_failures:
            self._emit(candidate, snapshot, population, improved)
        return improved

    def generate_candidate(self, i, snapshot, population) -> bool:
        return self.accept(self.propose(i), snapshot, population)

    def _emit(self, candidate, snapshot, population, success):
        if self.recorder is None:
            return
        features = feature_vector(
            snapshot, candidate.parent, candidate.child,
            candidate.parent_fitness, candidate.child_fitness, candidate.trial,
            candidate.op_success, candidate.op_total, population=population)
        self.recorder.record(CaseRecord(
            problem=self.problem.kind, run_id=self.config.run_id,
            iteration=self.colony.iteration,
            phase=phase_of(self.colony.iteration, self.config.max_iter),
            op=candidate.op, features=features,
            parent_fitness=candidate.parent_fitness, child_fitness=candidate.child_fitness,
            success=success, atn_raw=float(np.mean(snapshot.trials)),
        ))
        self.n_records += 1

    def employed_phase(self):
        colony = self.colony
        parents = colony.foods.copy()
        candidates = [self.propose(i, foods=parents) for i in range(colony.size)]
        snapshot = PopulationSnapshot(
            parents=parents,
            children=np.stack([c.child for c in candidates]),
            parent_fitness=colony.fitnesses.copy(),
            child_fitness=np.array([c.child_fitness for c in candidates]),
            gbest=colony.gbest.copy(), gbest_fitness=colony.gbest_fitness,
            trials=colony.trials.copy(), trial_max=self.config.limit,
        )
        population = population_features(snapshot, self.config.eap_variant)
        for candidate in candidates:
            self.accept(candidate, snapshot, population)
        return snapshot, population

    def onlooker_phase(self, snapshot, population):
        for _ in range(self.colony.size):
            i = onlooker_select(self.colony.fitnesses, self.rng)
            self.generate_candidate(i, snapshot, population)

    def scout_phase(self):
        colony = self.colony
        for i in np.flatnonzero(colony.trials > self.config.limit):
            solution = self.problem.random_solution(self.rng)
            colony.foods[i] = solution
            colony.fitnesses[i] = self.problem.evaluate(solution)
            colony.trials[i] = 0
            if colony.fitnesses[i] > colony.gbest_fitness:
                colony.gbest = solution.copy()
                colony.gbest_fitness = float(colony.fitnesses[i])

    def run(self) -> RunResult:
        config = self.config
        result = RunResult(run_id=config.run_id, seed=config.seed,
                           gbest=self.colony.gbest, gbest_fitness=self.colony.gbest_fitness,
                           initial_fitness=self.colony.gbest_fitness)
        for iteration in range(config.max_iter):
            self.colony.iteration = iteration
            snapshot, population = self.employed_phase()
            self.onlooker_phase(snapshot, population)
            self.scout_phase()
            result.trace.append(self.colony.gbest_fitness)
            logger.debug("run %d iteration %d: gbest %.6g, psd %.4f",
                         config.run_id, iteration, self.colony.gbest_fitness, population["psd"])

        result.gbest = self.colony.gbest.copy()
        result.gbest_fitness = self.colony.gbest_fitness
        result.success_counts = self.success_counts.copy()
        result.usage_counts = self.usage_counts.copy()
        result.n_records = self.n_records
        logger.info("run %d (seed %d): best %.6g after %d iterations, %d cases",
                    config.run_id, config.seed, result.gbest_fitness, config.max_iter,
                    result.n_records)
        return result


def run(config, recorder=None) -> RunResult:
    """Execute one seeded run; invalid configurations fail before any work."""
    return BeeColony(config, recorder).run()
