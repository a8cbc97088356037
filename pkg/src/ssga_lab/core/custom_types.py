import math
from typing import Any, Callable, Dict, List, Optional, Tuple, Union
from enum import Enum
from dataclasses import dataclass, field

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing_extensions import Annotated, Literal, Self
import numpy as np
from scipy import stats

SCHEMA_VERSION = 1
PROBABILITY_TOLERANCE = 1e-12


class EvalMode(str, Enum):
    """
    Evaluation accounting schemes for the (mu+1) GA.

    Values:
        COUNT_ALL: every offspring costs one fitness evaluation
        SKIP_CLONES: offspring identical to one of its parents is not evaluated
    """
    COUNT_ALL = "count_all"
    SKIP_CLONES = "skip_clones"


class ExplicitFlipDistribution(BaseModel):
    """
    Unbiased mutation given by its distribution over the number of flipped bits.

    Attributes:
        kind (str): Discriminator, always "explicit".
        probabilities (List[float]): p_0..p_K, the probability of flipping exactly i bits.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["explicit"] = "explicit"
    probabilities: List[float]

    @field_validator("probabilities")
    @classmethod
    def _check_distribution(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("flip distribution must not be empty")
        if any(p < 0 for p in value):
            raise ValueError(f"flip probabilities must be non-negative, got {value}")
        if abs(math.fsum(value) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"flip probabilities must sum to 1, got {math.fsum(value)!r}")
        return value

    @property
    def max_flips(self) -> int:
        return len(self.probabilities) - 1

    def flip_probabilities(self, n: int) -> Tuple[float, float, float]:
        """Returns (p0, p1, p2) for a problem of size n."""
        if self.max_flips > n:
            raise ValueError(f"cannot flip up to {self.max_flips} bits of a length-{n} string")
        padded = list(self.probabilities) + [0.0, 0.0, 0.0]
        return padded[0], padded[1], padded[2]


class StandardBitMutation(BaseModel):
    """
    Standard bit mutation: each bit flips independently with probability c/n.

    Attributes:
        kind (str): Discriminator, always "sbm".
        c (float): Mutation rate numerator, strictly positive.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["sbm"] = "sbm"
    c: float = Field(gt=0)

    def rate(self, n: int) -> float:
        rate = self.c / n
        if rate > 1:
            raise ValueError(f"mutation rate c/n must be at most 1, got {self.c}/{n}")
        return rate

    def flip_probabilities(self, n: int) -> Tuple[float, float, float]:
        """Exact binomial probabilities of flipping 0, 1 and 2 bits."""
        p0, p1, p2 = stats.binom.pmf([0, 1, 2], n, self.rate(n))
        return float(p0), float(p1), float(p2)


MutationSpec = Annotated[
    Union[ExplicitFlipDistribution, StandardBitMutation],
    Field(discriminator="kind"),
]


def default_budget(n: int) -> int:
    """50 n ln n evaluations, with ln n floored at 1 for tiny problems."""
    return int(math.ceil(50 * n * max(math.log(n), 1.0)))


class GAConfig(BaseModel):
    """
    Parameters of one (mu+1) GA run.

    Attributes:
        n (int): Problem size.
        mu (int): Population size, at least 3.
        mutation (MutationSpec): Mutation operator.
        eval_mode (EvalMode): Accounting scheme that decides success budgeting.
        max_evaluations (Optional[int]): Evaluation budget, defaults to 50 n ln n.
        seed (int): Seed of the run's generator.
        trace_every (int): Sampling period of the diversity trace.
        trace_diversity (bool): Whether to record the diversity trace at all.
    """
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    mu: int = Field(ge=3)
    mutation: MutationSpec
    eval_mode: EvalMode = EvalMode.COUNT_ALL
    max_evaluations: Optional[int] = Field(default=None, gt=0)
    seed: int = 0
    trace_every: int = Field(default=1, ge=1)
    trace_diversity: bool = False

    @model_validator(mode="after")
    def _check_mutation_fits(self) -> Self:
        # raises for c/n > 1 or K > n
        self.mutation.flip_probabilities(self.n)
        return self

    @property
    def budget(self) -> int:
        if self.max_evaluations is not None:
            return self.max_evaluations
        return default_budget(self.n)


class RunStats(BaseModel):
    """
    Telemetry of one GA run.

    Attributes:
        evaluations_count_all (int): Evaluations when every offspring is evaluated.
        evaluations_skip_clones (int): Evaluations when parent clones are not evaluated.
        iterations (int): Offspring created.
        level_passage (Dict[int, int]): Level j -> iteration of the first sample with fitness > j.
        diversity_trace (List[Tuple[int, int, int]]): Sampled (iteration, level, diversity).
        success (bool): Whether the target was sampled within the budget.
        best_fitness (int): Best fitness in the final population.
    """
    evaluations_count_all: int
    evaluations_skip_clones: int
    iterations: int
    level_passage: Dict[int, int] = Field(default_factory=dict)
    diversity_trace: List[Tuple[int, int, int]] = Field(default_factory=list)
    success: bool
    best_fitness: int

    def evaluations(self, mode: EvalMode) -> int:
        if mode == EvalMode.SKIP_CLONES:
            return self.evaluations_skip_clones
        return self.evaluations_count_all


class ChainSpec(BaseModel):
    """
    Parameters of the level-j diversity chain.

    Attributes:
        mu (int): Population size, at least 3.
        j (int): Current level, number of 1-bits, in [0, n-1].
        n (int): Problem size.
        p0 (float): Probability that mutation flips no bit.
        p1 (float): Probability that mutation flips exactly one bit.
        p2 (float): Probability that mutation flips exactly two bits.
    """
    model_config = ConfigDict(frozen=True)

    mu: int = Field(ge=3)
    j: int = Field(ge=0)
    n: int = Field(ge=1)
    p0: float = Field(ge=0, le=1)
    p1: float = Field(ge=0, le=1)
    p2: float = Field(ge=0, le=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> Self:
        if self.j > self.n - 1:
            raise ValueError(f"level j must lie in [0, n-1], got j={self.j}, n={self.n}")
        if self.p0 + self.p1 + self.p2 > 1 + PROBABILITY_TOLERANCE:
            raise ValueError(
                f"p0 + p1 + p2 must not exceed 1, got {self.p0 + self.p1 + self.p2!r}"
            )
        return self

    @property
    def m(self) -> int:
        """Number of transient states, ceil(mu/2)."""
        return (self.mu + 1) // 2


@dataclass(frozen=True)
class TransitionTable:
    """
    Sparse transition probabilities of a tridiagonal-plus-exit chain.

    States 0..m-1 are transient, state m is absorbing.

    Attributes:
        m (int): Number of transient states.
        p (Dict[Tuple[int, int], float]): (i, k) -> probability of moving from i to k.
    """
    m: int
    p: Dict[Tuple[int, int], float] = field(default_factory=dict)

    def get(self, i: int, k: int) -> float:
        return self.p.get((i, k), 0.0)

    def exit_probability(self, i: int) -> float:
        return self.get(i, self.m)


class ChainDiagnostics(BaseModel):
    """
    Outcome of validating a transition table.

    Attributes:
        ok (bool): True when every check passed.
        row_sum_residuals (List[float]): |sum_k p(i,k) - 1| per transient row.
        out_of_range (List[Tuple[int, int]]): Entries outside [0, 1].
        topology_violations (List[Tuple[int, int]]): Non-zero entries off the allowed pattern.
        exit_monotone (bool): p(i+1,m) >= p(i,m) on 1 <= i, i+1 < mu/2.
    """
    ok: bool
    row_sum_residuals: List[float]
    out_of_range: List[Tuple[int, int]] = Field(default_factory=list)
    topology_violations: List[Tuple[int, int]] = Field(default_factory=list)
    exit_monotone: bool = True


@dataclass(frozen=True)
class TridiagonalSystem:
    """
    The matrix I - Q of an absorbing chain in tridiagonal storage.

    Rows are 0-based here; row r corresponds to row r+1 of the usual 1-based
    notation and to transient state r.

    Attributes:
        diag (Tuple[float, ...]): a_{r,r}.
        sub (Tuple[float, ...]): a_{r,r-1} for r = 1..m-1.
        sup (Tuple[float, ...]): a_{r,r+1} for r = 0..m-2.
        exits (Tuple[float, ...]): Exit probability of each row, a_{r,r} + a_{r,r-1} + a_{r,r+1}.
        sdd (bool): Every row is strictly diagonally dominant.
    """
    diag: Tuple[float, ...]
    sub: Tuple[float, ...]
    sup: Tuple[float, ...]
    exits: Tuple[float, ...]
    sdd: bool

    @property
    def m(self) -> int:
        return len(self.diag)


class SolverDiagnostics(BaseModel):
    """
    Matrix-theoretic checks of one solve.

    Attributes:
        sdd_ok (bool): I - Q is strongly diagonally dominant.
        signs_ok (bool): Every entry of the inverse is non-negative and within its bound.
        residual_norm (float): ||(I - Q) t - 1||_inf.
        monotone_ok (bool): E[T_0] >= E[T_1] >= ... > 0.
        monotone_premise (bool): Exit probabilities do not decrease from state 0 upwards.
        n11_agreement (float): Relative gap between the recursion and elimination n_{1,1}.
    """
    sdd_ok: bool
    signs_ok: bool
    residual_norm: float
    monotone_ok: bool = True
    monotone_premise: bool = True
    n11_agreement: float = 0.0


class AbsorptionResult(BaseModel):
    """
    Expected absorption times of a diversity chain.

    Attributes:
        expected_times (List[float]): E[T_0] .. E[T_{m-1}].
        variances (List[float]): Var[T_0] .. Var[T_{m-1}].
        xi (List[float]): xi_2 .. xi_m.
        n11 (float): First diagonal entry of the fundamental matrix.
        diagnostics (SolverDiagnostics): Checks performed alongside the solve.
    """
    expected_times: List[float]
    variances: List[float] = Field(default_factory=list)
    xi: List[float]
    n11: float
    diagnostics: SolverDiagnostics

    @property
    def xi2(self) -> float:
        return self.xi[0]


class BoundReport(BaseModel):
    """
    Leading constants of the runtime bounds for one population size.

    Attributes:
        mu (int): Population size.
        xi2 (float): Probability that fresh diversity is lost before a crossover improvement.
        xi_star (float): (1 - xi2) mu / (mu + 1).
        gamma_all_evals (Optional[float]): General-operator constant, every offspring evaluated.
        gamma_skip_clones (Optional[float]): General-operator constant, clones not evaluated.
        c (Optional[float]): Standard bit mutation rate numerator.
        gamma_sbm_all (Optional[float]): Standard bit mutation constant, every offspring evaluated.
        gamma_sbm_skip (Optional[float]): Standard bit mutation constant, clones not evaluated.
        optimal_c (Optional[float]): Rate minimising the requested constant.
    """
    mu: int
    xi2: float
    xi_star: float
    gamma_all_evals: Optional[float] = None
    gamma_skip_clones: Optional[float] = None
    c: Optional[float] = None
    gamma_sbm_all: Optional[float] = None
    gamma_sbm_skip: Optional[float] = None
    optimal_c: Optional[float] = None


class LevelBound(BaseModel):
    """
    Upper bound on the expected time to leave fitness level j.

    Attributes:
        main_term (float): n/(n-j) / (p1 + 2 mu p2/(mu+1) j/n (1 - xi2)).
        tail (float): sum over k = 2..m of 1/p_{k-1,m}; infinite when p0 = 0.
    """
    main_term: float
    tail: float

    @property
    def total(self) -> float:
        return self.main_term + self.tail


class SummedBound(BaseModel):
    """
    Sum over all levels j = 0..n-1 of the level-exit times.

    Attributes:
        mu (int): Population size.
        n (int): Problem size.
        expected_total (float): sum_j E[T_0^j] from the solved chains.
        main_term_total (float): sum_j of the per-level main terms.
        expected_normalized (float): expected_total / (n ln n).
        main_term_normalized (float): main_term_total / (n ln n).
        leading_constant (float): The asymptotic constant for the same operator.
    """
    mu: int
    n: int
    expected_total: float
    main_term_total: float
    expected_normalized: float
    main_term_normalized: float
    leading_constant: float


class McEstimate(BaseModel):
    """
    Monte Carlo mean with its standard error.

    Attributes:
        mean (float): Sample mean.
        std_error (float): Sample standard deviation over sqrt(replicates).
        replicates (int): Number of samples.
    """
    mean: float
    std_error: float
    replicates: int

    @classmethod
    def from_samples(cls, samples: Any) -> "McEstimate":
        values = np.asarray(samples, dtype=float)
        if values.size == 0:
            raise ValueError("cannot summarise an empty sample")
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        return cls(
            mean=float(values.mean()),
            std_error=std / math.sqrt(values.size),
            replicates=int(values.size),
        )


class DriftCell(BaseModel):
    """
    Empirical one-step potential drop at level j conditioned on D_t = i.

    Attributes:
        level (int): Fitness level j.
        state (int): Diversity state i.
        drift (Optional[McEstimate]): None when the cell has too few samples.
    """
    level: int
    state: int
    drift: Optional[McEstimate] = None


class CheckKind(str, Enum):
    """
    How a validation check counts towards the outcome.

    Values:
        INVARIANT: exact mathematical property, failure fails validation
        EMPIRICAL: statistical property with fixed seeds, failure fails validation
        CLAIM: published numeric statement, reported only
    """
    INVARIANT = "invariant"
    EMPIRICAL = "empirical"
    CLAIM = "claim"


class ValidationCheck(BaseModel):
    """
    Outcome of one validation check.

    Attributes:
        name (str): Check identifier.
        kind (CheckKind): Whether the check can fail validation.
        passed (bool): Outcome.
        detail (str): Measured values behind the outcome.
    """
    name: str
    kind: CheckKind
    passed: bool
    detail: str = ""


class ExperimentConfig(BaseModel):
    """
    Parameter record shared by the harness commands.

    Attributes:
        sizes (List[int]): Problem sizes n.
        mus (List[int]): Population sizes.
        rates (List[Optional[float]]): Mutation rates c; None means the optimal c for mu.
        replicates (int): Replicates per cell, at least 1.
        seed (int): Master seed.
        eval_mode (EvalMode): Accounting scheme used for summaries.
        include_mutation_only (bool): Also run the crossover-free baseline.
        workers (int): Process pool size.
        output (Optional[str]): Output path, stdout when None.
    """
    sizes: List[int] = Field(default_factory=lambda: [500])
    mus: List[int] = Field(default_factory=lambda: [5])
    rates: List[Optional[float]] = Field(default_factory=lambda: [1.0])
    replicates: int = Field(default=20, ge=1)
    seed: int
    eval_mode: EvalMode = EvalMode.COUNT_ALL
    include_mutation_only: bool = False
    workers: int = Field(default=1, ge=1)
    output: Optional[str] = None

    @field_validator("sizes")
    @classmethod
    def _check_sizes(cls, value: List[int]) -> List[int]:
        if not value or any(n < 2 for n in value):
            raise ValueError(f"problem sizes must be at least 2, got {value}")
        return value

    @field_validator("mus")
    @classmethod
    def _check_mus(cls, value: List[int]) -> List[int]:
        if not value or any(mu < 3 for mu in value):
            raise ValueError(f"population sizes must be at least 3, got {value}")
        return value


class ArgumentError(ValueError):
    """Raised by a command whose arguments are invalid in combination."""


class Argument(BaseModel):
    """
    Represents an argument definition for a lab command.

    Attributes:
        name (str): The name of the argument, used as --name on the command line.
        description (str): A clear description of what the argument does.
        type (str): One of "int", "positive_int", "float", "str", "int_list", "float_list", "flag".
        optional (bool): Whether this argument may be omitted.
        default (Any): Value used when the argument is omitted.
        choices (Optional[List[str]]): Allowed values, if restricted.
    """
    name: str
    description: str
    type: str = "str"
    optional: bool = True
    default: Any = None
    choices: Optional[List[str]] = None


class CommandResultStatus(str, Enum):
    """
    Enum representing the possible status outcomes of a command.

    Values:
        DONE: Command completed and every check it performs passed
        FAILED: Command raised, or a validation it performs failed
        INVALID: Command rejected its arguments
    """
    DONE = "done"
    FAILED = "failed"
    INVALID = "invalid"


class CommandResult(BaseModel):
    """
    Represents the result of executing a lab command.

    Attributes:
        command (str): Name of the command.
        status (CommandResultStatus): DONE/FAILED.
        feedback_message (Optional[str]): Human-readable summary.
        rows (List[Dict[str, Any]]): Tabular payload, written as CSV or JSON.
        info (Dict[str, Any]): Extra payload written only in JSON form.
        columns (Optional[List[str]]): CSV column order.
    """
    command: str
    status: CommandResultStatus
    feedback_message: Optional[str] = None
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    info: Dict[str, Any] = Field(default_factory=dict)
    columns: Optional[List[str]] = None


class Command(BaseModel):
    """
    Defines a callable subcommand of the lab.

    The executable returns (status, message, payload) where payload may carry
    "rows", "columns" and "info" keys.

    Attributes:
        name (str): Subcommand name.
        description (str): Help text.
        args (List[Argument]): Accepted arguments besides the common ones.
        default_format (str): "csv" or "json".
        executable (Callable): Implementation.
    """
    name: str
    description: str
    args: List[Argument] = Field(default_factory=list)
    default_format: str = "json"
    executable: Callable[..., Tuple[CommandResultStatus, str, Dict[str, Any]]]

    def execute(self, **kwargs: Any) -> CommandResult:
        """
        Executes the command with the provided arguments.

        Exceptions raised by the executable are caught and returned as a FAILED
        CommandResult; model validation errors and ArgumentError become INVALID.
        """
        try:
            status, feedback, payload = self.executable(**kwargs)
            return CommandResult(
                command=self.name,
                status=status,
                feedback_message=feedback,
                rows=payload.get("rows", []),
                columns=payload.get("columns"),
                info=payload.get("info", {}),
            )
        except (ValidationError, ArgumentError) as e:
            return CommandResult(
                command=self.name,
                status=CommandResultStatus.INVALID,
                feedback_message=f"Invalid arguments for {self.name}: {e}",
            )
        except Exception as e:
            return CommandResult(
                command=self.name,
                status=CommandResultStatus.FAILED,
                feedback_message=f"Error executing {self.name}: {e}",
            )
