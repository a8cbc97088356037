"""
Closed-form runtime bounds of the (mu+1) GA on OneMax.

Every constant here multiplies n ln n. ``xi2`` is the probability that fresh
diversity at a level is lost before crossover turns it into an improvement;
``xi_star = (1 - xi2) mu / (mu + 1)`` is the weight with which two-bit
mutations count against one-bit mutations in the leading constant.
"""

import logging
import math
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from ssga_lab.analysis.absorption import assemble_system, solve_expected_times, xi_recursion
from ssga_lab.analysis.chain import build_chain
from ssga_lab.core.custom_types import (
    BoundReport,
    ChainSpec,
    EvalMode,
    LevelBound,
    MutationSpec,
    StandardBitMutation,
    SummedBound,
)

logger = logging.getLogger(__name__)

C_MIN = 1e-3
C_MAX = 8.0
C_GRID_STEP = 0.01
C_TOLERANCE = 1e-6

FIGURE_MU_RANGE = (5, 200)


@lru_cache(maxsize=None)
def xi2_of_mu(mu: int, p0: float = 0.5) -> float:
    """
    xi2 for population size mu.

    The rows of states 1..m-1 depend on neither j nor n and scale linearly in
    p0, so the result is the same for every p0 in (0, 1).
    """
    if mu < 3:
        raise ValueError(f"population size must be at least 3, got {mu}")
    if not (0 < p0 < 1):
        raise ValueError(f"p0 must lie in (0, 1), got {p0}")
    # the level and the row of state 0 do not enter xi2
    rest = (1 - p0) / 2
    spec = ChainSpec(mu=mu, j=1, n=2, p0=p0, p1=rest, p2=rest)
    xi, _ = xi_recursion(assemble_system(build_chain(spec)))
    return xi[0]


def xi_star(mu: int) -> float:
    return (1 - xi2_of_mu(mu)) * mu / (mu + 1)


def leading_constant_general(mu: int, p0: float, p1: float, p2: float, mode: EvalMode) -> float:
    """
    1 / (p1 + 2 p2 xi_star) for any unbiased mutation; (1 - p0) times that
    when clones of a parent are not evaluated.

    Raises:
        ValueError: If the probabilities are invalid or p1 = p2 = 0.
    """
    if min(p0, p1, p2) < 0 or p0 + p1 + p2 > 1 + 1e-12:
        raise ValueError(f"invalid flip probabilities ({p0}, {p1}, {p2})")
    denominator = p1 + 2 * p2 * xi_star(mu)
    if denominator <= 0:
        raise ValueError("leading constant is unbounded when p1 = p2 = 0")
    constant = 1 / denominator
    if mode == EvalMode.SKIP_CLONES:
        constant *= 1 - p0
    return constant


def leading_constant_sbm(mu: int, c, mode: EvalMode):
    """
    e^c / (c + c^2 xi_star) for standard bit mutation with rate c/n, times
    (1 - e^-c) under SKIP_CLONES. Accepts a scalar or a numpy array of c.
    """
    c_values = np.asarray(c, dtype=float)
    if (c_values <= 0).any():
        raise ValueError(f"mutation rate numerator must be positive, got {c}")
    constant = np.exp(c_values) / (c_values + c_values ** 2 * xi_star(mu))
    if mode == EvalMode.SKIP_CLONES:
        constant = -np.expm1(-c_values) * constant
    return float(constant) if constant.ndim == 0 else constant


def _c_grid() -> np.ndarray:
    return np.append(np.arange(C_MIN, C_MAX, C_GRID_STEP), C_MAX)


def optimize_c(mu: int, mode: EvalMode) -> Tuple[float, float]:
    """
    Minimises the standard bit mutation constant over c in [1e-3, 8].

    A coarse grid locates the global minimum; golden-section search refines
    it inside the neighbouring grid cells. A minimum at the edge of the range
    is refined within the edge cell only.

    Returns:
        (c_star, gamma_star)
    """
    grid = _c_grid()
    values = leading_constant_sbm(mu, grid, mode)
    best = int(np.argmin(values))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    interior = 0 < best < len(grid) - 1 and values[best] < min(values[best - 1], values[best + 1])

    def objective(c: float) -> float:
        return leading_constant_sbm(mu, c, mode)

    if interior:
        result = minimize_scalar(objective, bracket=(lo, grid[best], hi), method="golden",
                                 tol=C_TOLERANCE / grid[best])
    else:
        result = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                                 options={"xatol": C_TOLERANCE})
    c_star, gamma_star = float(result.x), float(result.fun)
    if gamma_star > values[best]:
        c_star, gamma_star = float(grid[best]), float(values[best])
    logger.debug("mu=%d mode=%s: grid minimum at c=%.3f, refined to c*=%.6f gamma*=%.6f",
                 mu, mode.value, grid[best], c_star, gamma_star)
    return c_star, gamma_star


def per_level_bound(spec: ChainSpec) -> LevelBound:
    """
    Bound on E[T_0^j]: main term n/(n-j) / (p1 + 2 mu p2/(mu+1) j/n (1 - xi2))
    plus the tail sum_{k=2..m} 1/p_{k-1,m}.

    The main term equals n_{1,1} of the level-j chain exactly; the tail bounds
    the remaining entries of the first row of the fundamental matrix.
    """
    mu, j, n = spec.mu, spec.j, spec.n
    if j >= n:
        raise ValueError(f"level j must be below n, got j={j}, n={n}")
    denominator = spec.p1 + 2 * mu * spec.p2 / (mu + 1) * j / n * (1 - xi2_of_mu(mu))
    main_term = n / (n - j) / denominator if denominator > 0 else math.inf
    table = build_chain(spec)
    exits = [table.exit_probability(i) for i in range(1, spec.m)]
    tail = sum(1 / p if p > 0 else math.inf for p in exits)
    return LevelBound(main_term=main_term, tail=tail)


def figure_data(mu_range: Iterable[int], figure: int) -> List[Dict[str, float]]:
    """
    Rows {"mu", "constant"} for one of the two figures.

    Figure 1 is the two-bit-mutation limit (mu+1)/(2 mu (1 - xi2)); figure 2
    is the optimised standard bit mutation constant with every offspring
    evaluated.
    """
    mus = list(mu_range)
    low, high = FIGURE_MU_RANGE
    if any(mu < low or mu > high for mu in mus):
        raise ValueError(f"figure data is defined for mu in [{low}, {high}], got {mus}")
    if figure == 1:
        return [{"mu": mu, "constant": (mu + 1) / (2 * mu * (1 - xi2_of_mu(mu)))} for mu in mus]
    if figure == 2:
        return [{"mu": mu, "constant": optimize_c(mu, EvalMode.COUNT_ALL)[1]} for mu in mus]
    raise ValueError(f"unknown figure {figure}, expected 1 or 2")


def optimization_sweep(mus: Iterable[int], modes: Iterable[EvalMode]) -> List[Dict[str, object]]:
    """Rows {"mu", "c_star", "gamma_star", "mode"} of optimize_c over a grid."""
    rows = []
    for mode in modes:
        for mu in mus:
            c_star, gamma_star = optimize_c(mu, mode)
            rows.append({"mu": mu, "c_star": c_star, "gamma_star": gamma_star, "mode": mode.value})
    return rows


def best_corner_constant(mu: int, p0: float) -> Dict[str, object]:
    """
    Compares the two extreme ways of spending the mutation mass 1 - p0: only
    one-bit flips (p2 = 0) or only two-bit flips (p1 = 0). The first wins
    when xi_star <= 1/2.
    """
    if not (0 <= p0 < 1):
        raise ValueError(f"p0 must lie in [0, 1), got {p0}")
    rest = 1 - p0
    one_bit = leading_constant_general(mu, p0, rest, 0.0, EvalMode.COUNT_ALL)
    two_bit = leading_constant_general(mu, p0, 0.0, rest, EvalMode.COUNT_ALL)
    return {
        "mu": mu,
        "xi_star": xi_star(mu),
        "one_bit": one_bit,
        "two_bit": two_bit,
        "best": "one_bit" if one_bit <= two_bit else "two_bit",
    }


def summed_chain_bound(mu: int, n: int, mutation: MutationSpec) -> SummedBound:
    """
    sum_{j=0}^{n-1} E[T_0^j], the level-by-level runtime bound at finite n,
    next to the sum of the per-level main terms and the asymptotic constant.
    """
    if n < 2:
        raise ValueError(f"problem size must be at least 2, got {n}")
    p0, p1, p2 = mutation.flip_probabilities(n)
    expected_total = 0.0
    for level in range(n):
        table = build_chain(ChainSpec(mu=mu, j=level, n=n, p0=p0, p1=p1, p2=p2))
        expected_total += solve_expected_times(assemble_system(table))[0]

    j = np.arange(n)
    main_terms = n / (n - j) / (p1 + 2 * mu * p2 / (mu + 1) * j / n * (1 - xi2_of_mu(mu)))
    main_term_total = float(main_terms.sum())

    if isinstance(mutation, StandardBitMutation):
        constant = leading_constant_sbm(mu, mutation.c, EvalMode.COUNT_ALL)
    else:
        constant = leading_constant_general(mu, p0, p1, p2, EvalMode.COUNT_ALL)

    scale = n * math.log(n)
    return SummedBound(
        mu=mu,
        n=n,
        expected_total=expected_total,
        main_term_total=main_term_total,
        expected_normalized=expected_total / scale,
        main_term_normalized=main_term_total / scale,
        leading_constant=constant,
    )


def bound_report(mu: int, c: Optional[float] = None, p: Optional[Tuple[float, float, float]] = None,
                 optimal_mode: Optional[EvalMode] = None) -> BoundReport:
    """
    Collects xi2, xi_star and the requested constants for one mu.

    Args:
        mu (int): Population size.
        c (Optional[float]): Standard bit mutation rate numerator.
        p (Optional[Tuple[float, float, float]]): (p0, p1, p2) of a general operator.
        optimal_mode (Optional[EvalMode]): Also optimise c for this accounting scheme;
            the optimum replaces c when c is not given.
    """
    report = BoundReport(mu=mu, xi2=xi2_of_mu(mu), xi_star=xi_star(mu))
    if p is not None:
        p0, p1, p2 = p
        report.gamma_all_evals = leading_constant_general(mu, p0, p1, p2, EvalMode.COUNT_ALL)
        report.gamma_skip_clones = leading_constant_general(mu, p0, p1, p2, EvalMode.SKIP_CLONES)
    if optimal_mode is not None:
        report.optimal_c, _ = optimize_c(mu, optimal_mode)
        if c is None:
            c = report.optimal_c
    if c is not None:
        report.c = c
        report.gamma_sbm_all = leading_constant_sbm(mu, c, EvalMode.COUNT_ALL)
        report.gamma_sbm_skip = leading_constant_sbm(mu, c, EvalMode.SKIP_CLONES)
    return report
