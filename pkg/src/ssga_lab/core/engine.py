import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ssga_lab.core.bitstring import BitVector, mutate, onemax, uniform_crossover
from ssga_lab.core.custom_types import EvalMode, GAConfig, RunStats
from ssga_lab.rng import make_rng

logger = logging.getLogger(__name__)

MAX_ITERATIONS_FACTOR = 10


@dataclass
class Population:
    """
    Multiset of individuals with cached OneMax values.

    Attributes:
        members (List[BitVector]): Genotypes, one entry per individual.
        fitness (List[int]): fitness[i] is onemax(members[i], target).
    """
    members: List[BitVector]
    fitness: List[int] = field(default_factory=list)

    @classmethod
    def evaluate(cls, members: Sequence[BitVector], target: BitVector) -> "Population":
        members = list(members)
        return cls(members=members, fitness=[onemax(x, target) for x in members])

    def __len__(self) -> int:
        return len(self.members)

    @property
    def best_fitness(self) -> int:
        return max(self.fitness)

    @property
    def worst_fitness(self) -> int:
        return min(self.fitness)


def majority_genotype(pop: Population) -> Tuple[BitVector, int]:
    """
    The most frequent genotype and its multiplicity.

    Ties between equally frequent genotypes go to the lexicographically
    smallest one.
    """
    if len(pop) == 0:
        raise ValueError("population is empty")
    counts = Counter(pop.members)
    top = max(counts.values())
    majority = min(x for x, count in counts.items() if count == top)
    return majority, top


def diversity_of(pop: Population) -> Tuple[int, int]:
    """Returns (majority_count, D) with D the number of non-majority individuals."""
    _, majority_count = majority_genotype(pop)
    return majority_count, len(pop) - majority_count


@dataclass(frozen=True)
class StepOutcome:
    """
    What one iteration of the GA did.

    Attributes:
        offspring (BitVector): The new individual after crossover and mutation.
        fitness (int): Its OneMax value.
        evaluated (bool): False when the offspring is a copy of a parent.
        removed (BitVector): The individual deleted in the selection phase.
        parents (Tuple[BitVector, BitVector]): The selected parents; both are the
            same individual when crossover is off.
    """
    offspring: BitVector
    fitness: int
    evaluated: bool
    removed: BitVector
    parents: Tuple[BitVector, BitVector]


class SteadyStateGA:
    """
    The steady-state (mu+1) GA on OneMax_z.

    Each step selects two parents uniformly at random with replacement, applies
    uniform crossover and then mutation, inserts the offspring and removes one
    individual of minimum fitness chosen uniformly at random (the offspring
    included). With ``use_crossover=False`` the offspring is a mutated copy of
    a single uniformly chosen parent.

    Both evaluation counters are maintained on every run: COUNT_ALL charges
    every offspring, SKIP_CLONES charges only offspring that differ from both
    parents. The config's eval_mode decides which counter the budget applies to.

    Args:
        config (GAConfig): Run parameters.
        target (BitVector): The hidden string z.
        use_crossover (bool): False for the mutation-only baseline.
        population (Optional[Sequence[BitVector]]): Start from these individuals
            instead of mu uniform random ones; they are not charged as evaluations.
        rng (Optional[np.random.Generator]): Generator, defaults to one seeded from config.seed.

    Raises:
        ValueError: If the target or a given population does not match the config.

    Example:
        ```python
        config = GAConfig(n=100, mu=5, mutation=StandardBitMutation(c=1.0), seed=1)
        stats = SteadyStateGA(config, BitVector.ones(100)).run()
        ```
    """

    def __init__(
        self,
        config: GAConfig,
        target: BitVector,
        use_crossover: bool = True,
        population: Optional[Sequence[BitVector]] = None,
        rng: Optional[np.random.Generator] = None,
    ):
        if len(target) != config.n:
            raise ValueError(f"target has length {len(target)}, config expects n={config.n}")

        self.config = config
        self.target = target
        self.use_crossover = use_crossover
        self.rng = rng if rng is not None else make_rng(config.seed)

        if population is None:
            initial = [BitVector.random(config.n, self.rng) for _ in range(config.mu)]
            charged = config.mu
        else:
            initial = list(population)
            charged = 0
            if len(initial) != config.mu:
                raise ValueError(f"population has {len(initial)} members, config expects mu={config.mu}")
            if any(len(x) != config.n for x in initial):
                raise ValueError("population members must have length n")

        self.population = Population.evaluate(initial, target)

        self.iterations: int = 0
        self.evaluations_count_all: int = charged
        self.evaluations_skip_clones: int = charged
        self.level_passage: Dict[int, int] = {}
        self.diversity_trace: List[Tuple[int, int, int]] = []

        self._best_seen = self.population.best_fitness
        for level in range(self._best_seen):
            self.level_passage[level] = 0
        self.success: bool = self._best_seen == config.n

        if config.trace_diversity:
            self._record_trace()

    def _record_trace(self) -> None:
        _, d = diversity_of(self.population)
        self.diversity_trace.append((self.iterations, self.population.best_fitness, d))

    def _select(self) -> BitVector:
        return self.population.members[int(self.rng.integers(self.config.mu))]

    def step(self) -> StepOutcome:
        """
        Executes one iteration: selection, variation, insertion and removal.
        """
        x = self._select()
        if self.use_crossover:
            y = self._select()
            child = uniform_crossover(x, y, self.rng)
        else:
            y = x
            child = x
        child = mutate(child, self.config.mutation, self.rng)

        self.iterations += 1
        self.evaluations_count_all += 1
        # a clone's fitness is known from its parent
        evaluated = child != x and child != y
        if evaluated:
            self.evaluations_skip_clones += 1

        fitness = onemax(child, self.target)
        if fitness > self._best_seen:
            for level in range(self._best_seen, fitness):
                self.level_passage[level] = self.iterations
            self._best_seen = fitness
        if fitness == self.config.n:
            self.success = True

        members = self.population.members + [child]
        scores = self.population.fitness + [fitness]
        worst = min(scores)
        candidates = [i for i, f in enumerate(scores) if f == worst]
        drop = candidates[int(self.rng.integers(len(candidates)))]
        removed = members.pop(drop)
        scores.pop(drop)
        self.population = Population(members=members, fitness=scores)

        if self.config.trace_diversity and self.iterations % self.config.trace_every == 0:
            self._record_trace()

        return StepOutcome(
            offspring=child, fitness=fitness, evaluated=evaluated, removed=removed, parents=(x, y),
        )

    def _spent(self) -> int:
        if self.config.eval_mode == EvalMode.SKIP_CLONES:
            return self.evaluations_skip_clones
        return self.evaluations_count_all

    def stats(self) -> RunStats:
        return RunStats(
            evaluations_count_all=self.evaluations_count_all,
            evaluations_skip_clones=self.evaluations_skip_clones,
            iterations=self.iterations,
            level_passage=dict(self.level_passage),
            diversity_trace=list(self.diversity_trace),
            success=self.success,
            best_fitness=self.population.best_fitness,
        )

    def run(self) -> RunStats:
        """
        Iterates until the target is sampled or the evaluation budget is spent.

        Under SKIP_CLONES the iteration count is additionally capped at
        MAX_ITERATIONS_FACTOR times the budget, since clones cost nothing.
        """
        budget = self.config.budget
        max_iterations = MAX_ITERATIONS_FACTOR * budget
        while (
            not self.success
            and self._spent() < budget
            and self.iterations < max_iterations
        ):
            self.step()

        if not self.success:
            logger.warning(
                "budget of %d evaluations exhausted at fitness %d/%d (mu=%d)",
                budget, self.population.best_fitness, self.config.n, self.config.mu,
            )
        else:
            logger.debug(
                "optimum after %d iterations (%d evaluations, %d without clones)",
                self.iterations, self.evaluations_count_all, self.evaluations_skip_clones,
            )
        return self.stats()


def ga_run(config: GAConfig, target: Optional[BitVector] = None) -> RunStats:
    """Runs the (mu+1) GA; the target defaults to the all-ones string."""
    target = target if target is not None else BitVector.ones(config.n)
    return SteadyStateGA(config, target).run()


def ga_run_mutation_only(config: GAConfig, target: Optional[BitVector] = None) -> RunStats:
    """Runs the crossover-free baseline: offspring are mutated copies of one parent."""
    target = target if target is not None else BitVector.ones(config.n)
    return SteadyStateGA(config, target, use_crossover=False).run()
