"""
The invariant suite behind ``ssga-lab validate``.

Checks are grouped by kind. Invariants are exact properties of the model and
solver; empirical checks compare simulation with analysis at fixed seeds;
claims are the published numeric statements about the leading constants,
reported next to the values this model actually produces.
"""

import logging
from typing import Callable, List, Sequence, Tuple

import numpy as np

from ssga_lab.analysis.absorption import analyze_chain
from ssga_lab.analysis.bounds import (
    FIGURE_MU_RANGE,
    best_corner_constant,
    leading_constant_general,
    leading_constant_sbm,
    optimize_c,
    per_level_bound,
    xi2_of_mu,
    xi_star,
)
from ssga_lab.analysis.chain import chain_spec_for
from ssga_lab.core.custom_types import (
    CheckKind,
    EvalMode,
    ExperimentConfig,
    StandardBitMutation,
    ValidationCheck,
)
from ssga_lab.harness.experiments import compare_variants, estimate_drift, ga_campaign, mc_chain_absorption

logger = logging.getLogger(__name__)

SWEEP_N = 1000
SWEEP_MUS = range(3, 65)
SWEEP_RATES = (0.5, 1.0, 2.0)
FIGURE_MUS = range(5, 51)
XI_MUS = range(FIGURE_MU_RANGE[0], FIGURE_MU_RANGE[1] + 1)
XI_TOLERANCE = 1e-12


def sweep_grid(n: int = SWEEP_N) -> List[Tuple[int, float, int]]:
    """(mu, c, j) for mu in 3..64, c in {0.5, 1, 2}, j in {1, n/2, n-1}."""
    return [(mu, c, j) for mu in SWEEP_MUS for c in SWEEP_RATES for j in (1, n // 2, n - 1)]


def _check(name: str, kind: CheckKind, passed: bool, detail: str = "") -> ValidationCheck:
    level = logging.INFO if passed or kind == CheckKind.CLAIM else logging.ERROR
    logger.log(level, "%s [%s]: %s %s", name, kind.value, "pass" if passed else "fail", detail)
    return ValidationCheck(name=name, kind=kind, passed=bool(passed), detail=detail)


def check_xi_star() -> List[ValidationCheck]:
    small = [xi_star(3), xi_star(4)]
    return [
        _check("xi_star_mu_3_and_4", CheckKind.INVARIANT,
               all(abs(v - 1 / 3) <= 1e-12 for v in small), f"xi*(3)={small[0]!r} xi*(4)={small[1]!r}"),
        _check("xi_star_transition_between_4_and_5", CheckKind.CLAIM,
               xi_star(4) <= 0.5 < xi_star(5), f"xi*(5)={xi_star(5)!r}"),
    ]


def _first_violation(values: Sequence[float], mus: Sequence[int], increasing: bool) -> Tuple[List[int], str]:
    bad = [
        mu for mu, (a, b) in zip(mus, zip(values, values[1:]))
        if (b < a - XI_TOLERANCE if increasing else b > a + XI_TOLERANCE)
    ]
    if not bad:
        return bad, f"monotone on mu={mus[0]}..{mus[-1]}"
    first = bad[0]
    k = mus.index(first)
    return bad, (f"first violation mu={first}->{first + 1}: {values[k]!r} -> {values[k + 1]!r}; "
                 f"{len(bad)}/{len(mus) - 1} steps violate")


def check_xi_monotonicity() -> List[ValidationCheck]:
    """xi2 should fall and xi* rise with mu; reports the first mu where they do not."""
    mus = list(XI_MUS)
    xi2 = [xi2_of_mu(mu) for mu in mus]
    stars = [xi_star(mu) for mu in mus]
    bad_xi2, xi2_detail = _first_violation(xi2, mus, increasing=False)
    bad_star, star_detail = _first_violation(stars, mus, increasing=True)
    return [
        _check("xi2_nonincreasing_in_mu", CheckKind.CLAIM, not bad_xi2, xi2_detail),
        _check("xi_star_nondecreasing_in_mu", CheckKind.CLAIM, not bad_star, star_detail),
    ]


def check_optimised_constants() -> List[ValidationCheck]:
    all_evals = [optimize_c(mu, EvalMode.COUNT_ALL)[1] for mu in FIGURE_MUS]
    skip = [optimize_c(mu, EvalMode.SKIP_CLONES)[1] for mu in FIGURE_MUS]
    grid = np.linspace(0.01, 5.0, 500)
    small_mu = [float(np.min(leading_constant_sbm(mu, grid, EvalMode.SKIP_CLONES))) for mu in (3, 4)]
    span = f"mu=5: {all_evals[0]:.6f}, mu=50: {all_evals[-1]:.6f}"
    return [
        _check("sbm_constants_below_1_96", CheckKind.CLAIM, max(all_evals) < 1.96, span),
        _check("sbm_constants_below_1_7", CheckKind.CLAIM, max(all_evals) < 1.7, span),
        _check("sbm_constants_decreasing", CheckKind.CLAIM,
               all(a > b for a, b in zip(all_evals, all_evals[1:])), span),
        _check("sbm_skip_clones_below_1", CheckKind.CLAIM, max(skip) < 1,
               f"mu=5: {skip[0]:.6f}, mu=50: {skip[-1]:.6f}"),
        _check("sbm_skip_clones_small_mu_above_1", CheckKind.INVARIANT, min(small_mu) > 1,
               f"grid minima {small_mu}"),
    ]


def check_constant_algebra() -> List[ValidationCheck]:
    failures = []
    for mu in range(3, 21):
        for p0, p1, p2 in ((0.2, 0.5, 0.3), (0.5, 0.25, 0.25), (0.05, 0.05, 0.9)):
            one = leading_constant_general(mu, p0, p1, p2, EvalMode.COUNT_ALL)
            two = leading_constant_general(mu, p0, p1, p2, EvalMode.SKIP_CLONES)
            if abs(two - (1 - p0) * one) > 1e-12 * one:
                failures.append((mu, p0))
        corner = best_corner_constant(mu, 0.2)
        expected = "one_bit" if corner["xi_star"] <= 0.5 else "two_bit"
        if corner["best"] != expected:
            failures.append((mu, "corner"))
    return [_check("constant_algebra", CheckKind.INVARIANT, not failures, f"failures {failures}")]


def check_solver_sweep(n: int = SWEEP_N) -> List[ValidationCheck]:
    """Solver cross-validation and bound dominance on the full sweep grid."""
    problems = {"agreement": [], "residual": [], "signs": [], "sdd": [], "premise": [], "dominance": []}
    not_monotone = []
    for mu, c, j in sweep_grid(n):
        spec = chain_spec_for(mu, j, n, StandardBitMutation(c=c))
        result = analyze_chain(spec)
        d = result.diagnostics
        times = result.expected_times
        cell = (mu, c, j)
        if d.n11_agreement > 1e-10:
            problems["agreement"].append(cell)
        if d.residual_norm > 1e-10 * max(times):
            problems["residual"].append(cell)
        if not d.signs_ok:
            problems["signs"].append(cell)
        if not d.sdd_ok:
            problems["sdd"].append(cell)
        if d.monotone_premise and not d.monotone_ok:
            problems["premise"].append(cell)
        if not d.monotone_ok:
            not_monotone.append(cell)
        bound = per_level_bound(spec)
        if bound.total < times[0] * (1 - 1e-12):
            problems["dominance"].append(cell)

    cells = len(sweep_grid(n))
    checks = [
        _check(f"solver_{name}", CheckKind.INVARIANT, not bad, f"{len(bad)}/{cells} cells fail {bad[:5]}")
        for name, bad in problems.items()
    ]
    checks.append(_check("absorption_times_nonincreasing_everywhere", CheckKind.CLAIM, not not_monotone,
                         f"{len(not_monotone)}/{cells} cells have E[T_i] increasing somewhere"))
    return checks


def check_chain_monte_carlo(replicates: int, seed: int) -> List[ValidationCheck]:
    spec = chain_spec_for(5, 500, 1000, StandardBitMutation(c=1.0))
    analytic = analyze_chain(spec).expected_times[0]
    estimate = mc_chain_absorption(spec, 0, replicates, seed)
    gap = abs(estimate.mean - analytic)
    passed = gap <= max(0.01 * analytic, 3 * estimate.std_error)
    return [_check("chain_monte_carlo", CheckKind.EMPIRICAL, passed,
                   f"mc={estimate.mean:.4f}+-{estimate.std_error:.4f} analytic={analytic:.4f}")]


def check_ga_direction(n: int, replicates: int, seed: int, workers: int) -> List[ValidationCheck]:
    config = ExperimentConfig(sizes=[n], mus=[5], rates=[None], replicates=replicates, seed=seed,
                              include_mutation_only=True, workers=workers)
    cells = ga_campaign(config)
    comparison = compare_variants(cells, EvalMode.COUNT_ALL)[0]
    counters_ok = all(
        run.evaluations_skip_clones <= run.evaluations_count_all for cell in cells for run in cell.runs
    )
    return [
        _check("crossover_beats_mutation_only", CheckKind.EMPIRICAL, comparison["p_value"] < 0.01,
               f"wins={comparison['wins']} losses={comparison['losses']} p={comparison['p_value']:.3g}"),
        _check("skip_clones_counter_below_count_all", CheckKind.INVARIANT, counters_ok),
    ]


def check_drift(samples: int, seed: int) -> List[ValidationCheck]:
    n = 1000
    cell = estimate_drift(5, n, [n // 2], [0], samples, StandardBitMutation(c=1.0), seed)[0]
    passed = cell.drift is not None and cell.drift.mean >= 0.9
    detail = "no estimate" if cell.drift is None else f"{cell.drift.mean:.4f}+-{cell.drift.std_error:.4f}"
    return [_check("drift_state_0", CheckKind.EMPIRICAL, passed, detail)]


def run_validation(
    seed: int = 0,
    full: bool = False,
    mc_replicates: int = 10 ** 6,
    ga_n: int = 500,
    ga_replicates: int = 200,
    drift_samples: int = 10 ** 4,
    workers: int = 1,
) -> List[ValidationCheck]:
    """
    Runs the analytic checks and, with ``full``, the Monte Carlo ones.
    """
    steps: List[Callable[[], Sequence[ValidationCheck]]] = [
        check_xi_star,
        check_xi_monotonicity,
        check_optimised_constants,
        check_constant_algebra,
        check_solver_sweep,
    ]
    if full:
        steps += [
            lambda: check_chain_monte_carlo(mc_replicates, seed),
            lambda: check_ga_direction(ga_n, ga_replicates, seed, workers),
            lambda: check_drift(drift_samples, seed),
        ]
    checks: List[ValidationCheck] = []
    for step in steps:
        checks.extend(step())
    return checks


def validation_passed(checks: Sequence[ValidationCheck]) -> bool:
    """Claims are informative; every other kind must pass."""
    return all(check.passed for check in checks if check.kind != CheckKind.CLAIM)
