"""
Monte Carlo experiments: chain simulation, GA campaigns and drift estimation.

Every random draw comes from a generator derived from the master seed and the
replicate's position in the experiment grid, so results do not depend on the
number of worker processes or on the order in which replicates finish.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Sequence, Tuple, TypeVar, Union

import numpy as np
from scipy import stats

from ssga_lab.analysis.absorption import assemble_system, solve_expected_times
from ssga_lab.analysis.bounds import leading_constant_sbm, optimize_c
from ssga_lab.analysis.chain import build_chain, chain_spec_for
from ssga_lab.core.bitstring import BitVector
from ssga_lab.core.custom_types import (
    ChainSpec,
    DriftCell,
    EvalMode,
    ExperimentConfig,
    GAConfig,
    McEstimate,
    MutationSpec,
    RunStats,
    StandardBitMutation,
    TransitionTable,
)
from ssga_lab.core.engine import Population, SteadyStateGA, diversity_of
from ssga_lab.rng import make_rng, replicate_rng, replicate_seed

logger = logging.getLogger(__name__)

MAX_CHAIN_STEPS = 10 ** 9
MIN_DRIFT_SAMPLES = 100

T = TypeVar("T")
R = TypeVar("R")


class NonTerminationError(RuntimeError):
    """Raised when a simulated chain cannot or does not reach its absorbing state."""


def run_pool(fn: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """Maps fn over tasks, in a process pool when workers > 1; results keep task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def mc_chain_absorption(
    chain: Union[ChainSpec, TransitionTable],
    start_state: int,
    replicates: int,
    seed: int,
    max_steps: int = MAX_CHAIN_STEPS,
) -> McEstimate:
    """
    Simulates the chain from ``start_state`` until absorption.

    All replicates advance together: each one waits a geometric number of
    steps in its current state and then jumps to a neighbour or the absorbing
    state with the renormalised transition probabilities.

    Raises:
        ValueError: If start_state is not transient or replicates < 1.
        NonTerminationError: If absorption is impossible or a replicate
            exceeds max_steps.
    """
    table = build_chain(chain) if isinstance(chain, ChainSpec) else chain
    m = table.m
    if not (0 <= start_state < m):
        raise ValueError(f"start state must lie in [0, {m - 1}], got {start_state}")
    if replicates < 1:
        raise ValueError(f"replicates must be at least 1, got {replicates}")
    if all(table.exit_probability(i) == 0 for i in range(m)):
        raise NonTerminationError("every exit probability is zero")

    down = np.array([table.get(i, i - 1) if i > 0 else 0.0 for i in range(m)])
    up = np.array([table.get(i, i + 1) if i < m - 1 else 0.0 for i in range(m)])
    exits = np.array([table.exit_probability(i) for i in range(m)])
    leave = down + up + exits

    rng = make_rng(seed)
    state = np.full(replicates, start_state, dtype=np.int64)
    steps = np.zeros(replicates, dtype=np.int64)
    active = np.arange(replicates)

    while active.size:
        current = state[active]
        rates = leave[current]
        if (rates <= 0).any():
            raise NonTerminationError(f"state {int(current[rates <= 0][0])} never moves")
        steps[active] += rng.geometric(np.minimum(rates, 1.0))
        if (steps[active] > max_steps).any():
            raise NonTerminationError(f"a replicate exceeded {max_steps} steps")

        u = rng.random(active.size) * rates
        go_down = u < down[current]
        go_up = ~go_down & (u < down[current] + up[current])
        absorbed = ~go_down & ~go_up

        state[active[go_down]] -= 1
        state[active[go_up]] += 1
        state[active[absorbed]] = m
        active = active[~absorbed]

    return McEstimate.from_samples(steps)


@dataclass(frozen=True)
class SignTestResult:
    """
    One-sided paired sign test of "a is smaller than b".

    Attributes:
        wins (int): Pairs with a < b.
        losses (int): Pairs with a > b.
        ties (int): Pairs dropped because a == b.
        p_value (float): Binomial tail probability of at least ``wins`` successes.
    """
    wins: int
    losses: int
    ties: int
    p_value: float


def paired_sign_test(a: Sequence[float], b: Sequence[float]) -> SignTestResult:
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} != {len(b)}")
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    wins, losses = int((diff < 0).sum()), int((diff > 0).sum())
    ties = len(diff) - wins - losses
    if wins + losses == 0:
        return SignTestResult(wins=0, losses=0, ties=ties, p_value=1.0)
    p_value = stats.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue
    return SignTestResult(wins=wins, losses=losses, ties=ties, p_value=float(p_value))


@dataclass(frozen=True)
class _GATask:
    config: GAConfig
    use_crossover: bool


def _run_ga_task(task: _GATask) -> RunStats:
    target = BitVector.ones(task.config.n)
    return SteadyStateGA(task.config, target, use_crossover=task.use_crossover).run()


@dataclass
class CampaignCell:
    """
    Replicated runs of one (n, mu, c, variant) combination.

    Attributes:
        n (int): Problem size.
        mu (int): Population size.
        c (float): Mutation rate numerator.
        variant (str): "crossover" or "mutation_only".
        runs (List[RunStats]): One entry per replicate, in replicate order.
    """
    n: int
    mu: int
    c: float
    variant: str
    runs: List[RunStats] = field(default_factory=list)

    def evaluations(self, mode: EvalMode) -> List[int]:
        return [run.evaluations(mode) for run in self.runs]

    def summary(self) -> Dict[str, Any]:
        """
        Per-cell row. Means and standard errors cover successful runs only;
        budget-exhausted runs are counted in ``exhausted``.
        """
        succeeded = [run for run in self.runs if run.success]
        scale = self.n * math.log(self.n)
        row: Dict[str, Any] = {
            "n": self.n,
            "mu": self.mu,
            "c": self.c,
            "variant": self.variant,
            "replicates": len(self.runs),
            "exhausted": len(self.runs) - len(succeeded),
        }
        for mode in EvalMode:
            if succeeded:
                estimate = McEstimate.from_samples([run.evaluations(mode) for run in succeeded])
                row[f"mean_{mode.value}"] = estimate.mean
                row[f"stderr_{mode.value}"] = estimate.std_error
                row[f"normalized_{mode.value}"] = estimate.mean / scale
            else:
                row[f"mean_{mode.value}"] = None
                row[f"stderr_{mode.value}"] = None
                row[f"normalized_{mode.value}"] = None
            row[f"gamma_{mode.value}"] = leading_constant_sbm(self.mu, self.c, mode)
        row["asymptotic"] = False
        return row


CAMPAIGN_COLUMNS = [
    "n", "mu", "c", "variant", "replicates", "exhausted",
    "mean_count_all", "stderr_count_all", "normalized_count_all", "gamma_count_all",
    "mean_skip_clones", "stderr_skip_clones", "normalized_skip_clones", "gamma_skip_clones",
    "asymptotic",
]


def ga_campaign(config: ExperimentConfig) -> List[CampaignCell]:
    """
    Runs the GA over the (n, mu, c) grid of ``config``.

    Replicate r of a cell uses the same derived seed for the crossover GA and
    the mutation-only baseline, so the two variants form matched pairs.
    """
    cells: List[CampaignCell] = []
    grid = [(n, mu, rate) for n in config.sizes for mu in config.mus for rate in config.rates]
    variants = [("crossover", True)]
    if config.include_mutation_only:
        variants.append(("mutation_only", False))

    for index, (n, mu, rate) in enumerate(grid):
        c = rate if rate is not None else optimize_c(mu, EvalMode.COUNT_ALL)[0]
        logger.info("campaign cell n=%d mu=%d c=%.4f: %d replicates", n, mu, c, config.replicates)
        for variant, use_crossover in variants:
            tasks = [
                _GATask(
                    config=GAConfig(
                        n=n,
                        mu=mu,
                        mutation=StandardBitMutation(c=c),
                        eval_mode=config.eval_mode,
                        seed=replicate_seed(config.seed, index, r),
                    ),
                    use_crossover=use_crossover,
                )
                for r in range(config.replicates)
            ]
            runs = run_pool(_run_ga_task, tasks, config.workers)
            cell = CampaignCell(n=n, mu=mu, c=c, variant=variant, runs=runs)
            exhausted = sum(not run.success for run in runs)
            if exhausted:
                logger.warning("cell n=%d mu=%d %s: %d runs exhausted their budget",
                               n, mu, variant, exhausted)
            cells.append(cell)
    return cells


def compare_variants(cells: Iterable[CampaignCell], mode: EvalMode) -> List[Dict[str, Any]]:
    """Paired sign test of crossover against mutation-only for every cell that ran both."""
    by_key: Dict[Tuple[int, int, float], Dict[str, CampaignCell]] = {}
    for cell in cells:
        by_key.setdefault((cell.n, cell.mu, cell.c), {})[cell.variant] = cell
    rows = []
    for (n, mu, c), pair in by_key.items():
        if "crossover" not in pair or "mutation_only" not in pair:
            continue
        result = paired_sign_test(pair["crossover"].evaluations(mode), pair["mutation_only"].evaluations(mode))
        rows.append({
            "n": n, "mu": mu, "c": c, "mode": mode.value,
            "wins": result.wins, "losses": result.losses, "ties": result.ties,
            "p_value": result.p_value,
        })
    return rows


def potential_of(pop: Population, level: int, times: Sequence[float]) -> float:
    """
    Potential of a population at fitness level ``level``.

    With D the number of non-majority individuals and m = len(times): E[T_D]
    for D < m - 1, E[T_{m-1}] for every larger D, and 0 once an individual
    above the level exists.
    """
    if pop.best_fitness > level:
        return 0.0
    _, d = diversity_of(pop)
    return float(times[min(d, len(times) - 1)])


def state_population(n: int, level: int, mu: int, state: int, rng: np.random.Generator) -> List[BitVector]:
    """
    mu - state copies of a genotype with ``level`` ones and ``state`` copies
    of a genotype obtained from it by moving one 1-bit to a 0-position.

    Raises:
        ValueError: If the state cannot be realised at this level.
    """
    if not (0 <= level <= n - 1):
        raise ValueError(f"level must lie in [0, {n - 1}], got {level}")
    if not (0 <= 2 * state < mu):
        raise ValueError(f"state {state} has no strict majority in a population of {mu}")
    if state > 0 and level == 0:
        raise ValueError("diversity at level 0 needs at least one 1-bit to move")
    bits = np.zeros(n, dtype=bool)
    bits[rng.choice(n, size=level, replace=False)] = True
    majority = BitVector(bits)
    if state == 0:
        return [majority] * mu
    one = rng.choice(np.flatnonzero(bits))
    zero = rng.choice(np.flatnonzero(~bits))
    minority = majority.flip(np.array([one, zero]))
    return [majority] * (mu - state) + [minority] * state


def level_times(mu: int, level: int, n: int, mutation: MutationSpec) -> List[float]:
    """E[T_0^j] .. E[T_{m-1}^j] for the chain of this level."""
    return solve_expected_times(assemble_system(build_chain(chain_spec_for(mu, level, n, mutation))))


def estimate_drift(
    mu: int,
    n: int,
    levels: Iterable[int],
    states: Iterable[int],
    samples: int,
    mutation: MutationSpec,
    seed: int,
    min_samples: int = MIN_DRIFT_SAMPLES,
) -> List[DriftCell]:
    """
    One-step expected potential drop E[g_t - g_{t+1} | D_t = i] at each level.

    Every sample restarts from a fresh state-i population at level j and runs
    a single GA iteration. Cells that cannot be realised or get fewer than
    ``min_samples`` samples are reported without an estimate.
    """
    target = BitVector.ones(n)
    config = GAConfig(n=n, mu=mu, mutation=mutation, seed=seed)
    cells: List[DriftCell] = []
    for level in levels:
        times = level_times(mu, level, n, mutation)
        for state in states:
            cell = DriftCell(level=level, state=state)
            if samples < min_samples or state >= len(times):
                logger.warning("drift cell j=%d i=%d left empty (%d samples)", level, state, samples)
                cells.append(cell)
                continue
            rng = replicate_rng(seed, level, state)
            try:
                members = state_population(n, level, mu, state, rng)
            except ValueError as e:
                logger.warning("drift cell j=%d i=%d left empty: %s", level, state, e)
                cells.append(cell)
                continue
            start = Population.evaluate(members, target)
            before = potential_of(start, level, times)
            drops = np.empty(samples)
            for s in range(samples):
                ga = SteadyStateGA(config, target, population=members, rng=rng)
                ga.step()
                drops[s] = before - potential_of(ga.population, level, times)
            cell.drift = McEstimate.from_samples(drops)
            logger.debug("drift j=%d i=%d: %.4f +- %.4f", level, state, cell.drift.mean, cell.drift.std_error)
            cells.append(cell)
    return cells
