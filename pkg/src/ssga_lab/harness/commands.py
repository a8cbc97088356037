"""
Lab commands.

Each subcommand of the ``ssga-lab`` CLI is a Command: a name, its arguments
and an executable returning (status, message, payload). The Lab class holds
the registry the CLI is generated from.

Example:
    ```python
    lab = Lab()
    result = lab.get_command("optimize-c").execute(mus=[5], mode="count_all", seed=0)
    result.rows
    ```
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

from ssga_lab.analysis.absorption import analyze_chain
from ssga_lab.analysis.bounds import FIGURE_MU_RANGE, bound_report, figure_data, optimization_sweep
from ssga_lab.analysis.chain import build_chain, chain_spec_for, table_to_records
from ssga_lab.core.custom_types import (
    Argument,
    ArgumentError,
    Command,
    CommandResultStatus,
    EvalMode,
    ExperimentConfig,
    GAConfig,
    StandardBitMutation,
)
from ssga_lab.core.engine import ga_run, ga_run_mutation_only
from ssga_lab.harness.experiments import (
    CAMPAIGN_COLUMNS,
    compare_variants,
    estimate_drift,
    ga_campaign,
    mc_chain_absorption,
)
from ssga_lab.harness.validation import run_validation, validation_passed

logger = logging.getLogger(__name__)

Payload = Tuple[CommandResultStatus, str, Dict[str, Any]]

_CHAIN_ARGS = [
    Argument(name="mu", description="Population size", type="int", optional=False),
    Argument(name="j", description="Fitness level (number of 1-bits)", type="int", optional=False),
    Argument(name="n", description="Problem size", type="int", optional=False),
    Argument(name="c", description="Standard bit mutation rate numerator", type="float", default=1.0),
]

_MODES = [mode.value for mode in EvalMode]


def _modes(mode: str) -> List[EvalMode]:
    return list(EvalMode) if mode == "both" else [EvalMode(mode)]


def _simulate_ga(n: int, mu: int, c: float, eval_mode: str, max_evaluations: Optional[int],
                 mutation_only: bool, trace_every: Optional[int], seed: int, **_: Any) -> Payload:
    config = GAConfig(
        n=n,
        mu=mu,
        mutation=StandardBitMutation(c=c),
        eval_mode=EvalMode(eval_mode),
        max_evaluations=max_evaluations,
        seed=seed,
        trace_every=trace_every or 1,
        trace_diversity=trace_every is not None,
    )
    stats = (ga_run_mutation_only if mutation_only else ga_run)(config)
    row = {
        "n": n, "mu": mu, "c": c,
        "variant": "mutation_only" if mutation_only else "crossover",
        "success": stats.success,
        "best_fitness": stats.best_fitness,
        "iterations": stats.iterations,
        "evaluations_count_all": stats.evaluations_count_all,
        "evaluations_skip_clones": stats.evaluations_skip_clones,
    }
    info = {
        "level_passage": {str(k): v for k, v in sorted(stats.level_passage.items())},
        "diversity_trace": [list(entry) for entry in stats.diversity_trace],
        "asymptotic": False,
    }
    # an exhausted budget is a result, reported through the success column
    message = "optimum found" if stats.success else "evaluation budget exhausted"
    return CommandResultStatus.DONE, message, {"rows": [row], "columns": list(row), "info": info}


def _campaign(sizes: List[int], mus: List[int], rates: Optional[List[float]], replicates: int,
              eval_mode: str, mutation_only: bool, seed: int, workers: int, **_: Any) -> Payload:
    config = ExperimentConfig(
        sizes=sizes,
        mus=mus,
        rates=rates if rates else [None],
        replicates=replicates,
        seed=seed,
        eval_mode=EvalMode(eval_mode),
        include_mutation_only=mutation_only,
        workers=workers,
    )
    cells = ga_campaign(config)
    rows = [cell.summary() for cell in cells]
    info = {"sign_tests": compare_variants(cells, EvalMode(eval_mode))}
    return CommandResultStatus.DONE, f"{len(cells)} cells", {"rows": rows, "columns": CAMPAIGN_COLUMNS, "info": info}


def _mc_chain(mu: int, j: int, n: int, c: float, start_state: int, replicates: int,
              seed: int, **_: Any) -> Payload:
    spec = chain_spec_for(mu, j, n, StandardBitMutation(c=c))
    if not (0 <= start_state < spec.m):
        raise ArgumentError(f"start state must lie in [0, {spec.m - 1}], got {start_state}")
    estimate = mc_chain_absorption(spec, start_state, replicates, seed)
    analytic = analyze_chain(spec).expected_times[start_state]
    row = {
        "mu": mu, "j": j, "n": n, "c": c, "start_state": start_state,
        "mean": estimate.mean, "std_error": estimate.std_error, "replicates": estimate.replicates,
        "analytic": analytic,
    }
    return CommandResultStatus.DONE, "simulated", {"rows": [row], "columns": list(row)}


def _analyze_chain(mu: int, j: int, n: int, c: float, **_: Any) -> Payload:
    spec = chain_spec_for(mu, j, n, StandardBitMutation(c=c))
    result = analyze_chain(spec)
    rows = [
        {"state": i, "expected_time": t, "variance": v}
        for i, (t, v) in enumerate(zip(result.expected_times, result.variances))
    ]
    info = {
        "spec": spec.model_dump(mode="json"),
        "transitions": table_to_records(build_chain(spec)),
        "xi": result.xi,
        "xi2": result.xi2,
        "n11": result.n11,
        "diagnostics": result.diagnostics.model_dump(mode="json"),
    }
    d = result.diagnostics
    ok = d.sdd_ok and d.signs_ok and d.n11_agreement <= 1e-10
    status = CommandResultStatus.DONE if ok else CommandResultStatus.FAILED
    return status, "solved", {"rows": rows, "columns": ["state", "expected_time", "variance"], "info": info}


def _leading_constants(mus: List[int], c: Optional[float], p0: Optional[float], p1: Optional[float],
                       p2: Optional[float], **_: Any) -> Payload:
    p = None
    if any(v is not None for v in (p0, p1, p2)):
        if any(v is None for v in (p0, p1, p2)):
            raise ArgumentError("give all of p0, p1 and p2 or none of them")
        p = (p0, p1, p2)
    rows = [bound_report(mu, c=c, p=p).model_dump(mode="json") for mu in mus]
    return CommandResultStatus.DONE, f"{len(rows)} population sizes", {"rows": rows, "columns": list(rows[0])}


def _optimize_c(mus: List[int], mode: str, **_: Any) -> Payload:
    rows = optimization_sweep(mus, _modes(mode))
    return CommandResultStatus.DONE, "optimised", {"rows": rows, "columns": ["mu", "c_star", "gamma_star", "mode"]}


def _figures(mu_min: int, mu_max: int, figure: int, **_: Any) -> Payload:
    if mu_min > mu_max:
        raise ArgumentError(f"empty range: mu-min={mu_min} > mu-max={mu_max}")
    low, high = FIGURE_MU_RANGE
    if mu_min < low or mu_max > high:
        raise ArgumentError(f"mu must lie in [{low}, {high}], got [{mu_min}, {mu_max}]")
    rows = figure_data(range(mu_min, mu_max + 1), figure)
    return CommandResultStatus.DONE, f"figure {figure}", {"rows": rows, "columns": ["mu", "constant"]}


def _drift(mu: int, n: int, levels: Optional[List[int]], states: Optional[List[int]], samples: int,
           c: float, seed: int, **_: Any) -> Payload:
    levels = levels or [n // 2]
    states = states or list(range((mu + 1) // 2))
    cells = estimate_drift(mu, n, levels, states, samples, StandardBitMutation(c=c), seed)
    rows = [
        {
            "level": cell.level,
            "state": cell.state,
            "drift": cell.drift.mean if cell.drift else None,
            "std_error": cell.drift.std_error if cell.drift else None,
            "samples": cell.drift.replicates if cell.drift else 0,
        }
        for cell in cells
    ]
    return CommandResultStatus.DONE, f"{len(rows)} cells", {
        "rows": rows, "columns": ["level", "state", "drift", "std_error", "samples"],
    }


def _validate(full: bool, mc_replicates: int, ga_n: int, ga_replicates: int, drift_samples: int,
              seed: int, workers: int, **_: Any) -> Payload:
    checks = run_validation(
        seed=seed, full=full, mc_replicates=mc_replicates, ga_n=ga_n,
        ga_replicates=ga_replicates, drift_samples=drift_samples, workers=workers,
    )
    rows = [check.model_dump(mode="json") for check in checks]
    passed = validation_passed(checks)
    failed = [check.name for check in checks if not check.passed]
    status = CommandResultStatus.DONE if passed else CommandResultStatus.FAILED
    message = f"{len(checks) - len(failed)}/{len(checks)} checks passed"
    return status, message, {"rows": rows, "columns": ["name", "kind", "passed", "detail"]}


class Lab:
    """
    Registry of the lab's commands.

    Attributes:
        commands (Dict[str, Command]): Command name -> command.
    """

    def __init__(self) -> None:
        commands = [
            Command(
                name="simulate-ga",
                description="Run the (mu+1) GA once on OneMax with the all-ones target",
                args=[
                    Argument(name="n", description="Problem size", type="int", optional=False),
                    Argument(name="mu", description="Population size", type="int", default=5),
                    Argument(name="c", description="Mutation rate numerator", type="float", default=1.0),
                    Argument(name="eval-mode", description="Counter the budget applies to",
                             default=EvalMode.COUNT_ALL.value, choices=_MODES),
                    Argument(name="max-evaluations", description="Evaluation budget", type="positive_int"),
                    Argument(name="mutation-only", description="Run the crossover-free baseline", type="flag"),
                    Argument(name="trace-every", description="Record diversity every k iterations",
                             type="positive_int"),
                ],
                executable=_simulate_ga,
            ),
            Command(
                name="campaign",
                description="Replicated GA runs over an (n, mu, c) grid",
                args=[
                    Argument(name="sizes", description="Problem sizes", type="int_list", default=[500]),
                    Argument(name="mus", description="Population sizes", type="int_list", default=[5]),
                    Argument(name="rates", description="Rate numerators c; omit for the optimal c",
                             type="float_list"),
                    Argument(name="replicates", description="Replicates per cell", type="positive_int", default=20),
                    Argument(name="eval-mode", description="Counter used for sign tests",
                             default=EvalMode.COUNT_ALL.value, choices=_MODES),
                    Argument(name="mutation-only", description="Also run the crossover-free baseline", type="flag"),
                ],
                default_format="csv",
                executable=_campaign,
            ),
            Command(
                name="mc-chain",
                description="Monte Carlo absorption time of the level-j diversity chain",
                args=_CHAIN_ARGS + [
                    Argument(name="start-state", description="Initial transient state", type="int", default=0),
                    Argument(name="replicates", description="Simulated chains", type="positive_int",
                             default=10000),
                ],
                default_format="csv",
                executable=_mc_chain,
            ),
            Command(
                name="analyze-chain",
                description="Build and solve the level-j diversity chain with diagnostics",
                args=list(_CHAIN_ARGS),
                executable=_analyze_chain,
            ),
            Command(
                name="leading-constants",
                description="xi2, xi* and the leading constants for each mu",
                args=[
                    Argument(name="mus", description="Population sizes", type="int_list", default=[5]),
                    Argument(name="c", description="Standard bit mutation rate numerator", type="float"),
                    Argument(name="p0", description="Probability of flipping no bit", type="float"),
                    Argument(name="p1", description="Probability of flipping one bit", type="float"),
                    Argument(name="p2", description="Probability of flipping two bits", type="float"),
                ],
                default_format="csv",
                executable=_leading_constants,
            ),
            Command(
                name="optimize-c",
                description="Mutation rate minimising the leading constant; CSV columns mu,c_star,gamma_star,mode",
                args=[
                    Argument(name="mus", description="Population sizes", type="int_list", default=[5]),
                    Argument(name="mode", description="Accounting scheme", default="both",
                             choices=_MODES + ["both"]),
                ],
                default_format="csv",
                executable=_optimize_c,
            ),
            Command(
                name="figures",
                description="Leading constant per mu; CSV columns mu,constant",
                args=[
                    Argument(name="mu-min", description="Smallest mu", type="int", default=5),
                    Argument(name="mu-max", description="Largest mu", type="int", default=50),
                    Argument(name="figure", description="1: two-bit limit, 2: optimised standard bit mutation",
                             type="int", default=2, choices=["1", "2"]),
                ],
                default_format="csv",
                executable=_figures,
            ),
            Command(
                name="drift",
                description="Empirical one-step potential drift per (level, state)",
                args=[
                    Argument(name="mu", description="Population size", type="int", default=5),
                    Argument(name="n", description="Problem size", type="int", default=1000),
                    Argument(name="levels", description="Levels j, default n/2", type="int_list"),
                    Argument(name="states", description="States i, default all", type="int_list"),
                    Argument(name="samples", description="One-step samples per cell", type="positive_int",
                             default=10000),
                    Argument(name="c", description="Mutation rate numerator", type="float", default=1.0),
                ],
                default_format="csv",
                executable=_drift,
            ),
            Command(
                name="validate",
                description="Run the invariant suite; exit status 1 if an invariant or empirical check fails",
                args=[
                    Argument(name="full", description="Include the Monte Carlo checks", type="flag"),
                    Argument(name="mc-replicates", description="Chain replicates", type="positive_int",
                             default=10 ** 6),
                    Argument(name="ga-n", description="Problem size of the GA check", type="positive_int",
                             default=500),
                    Argument(name="ga-replicates", description="Paired GA replicates", type="positive_int",
                             default=200),
                    Argument(name="drift-samples", description="Drift samples", type="positive_int",
                             default=10 ** 4),
                ],
                executable=_validate,
            ),
        ]
        self.commands: Dict[str, Command] = {command.name: command for command in commands}

    @property
    def available_commands(self) -> List[str]:
        return list(self.commands.keys())

    def get_command(self, name: str) -> Command:
        """
        Retrieve a command by name.

        Raises:
            ValueError: If no command has that name.
        """
        if name not in self.commands:
            raise ValueError(
                f"Command '{name}' not found. Available commands: {', '.join(self.available_commands)}"
            )
        return self.commands[name]
