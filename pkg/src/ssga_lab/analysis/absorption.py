"""
Expected absorption times of tridiagonal-plus-exit chains.

The matrix I - Q is kept in tridiagonal storage with 0-based rows: row r is
row r+1 in the usual 1-based notation a_{ik} = -p_{i-1,k-1} and belongs to
transient state r. Absorption times are computed two independent ways, by
elimination on (I - Q) t = 1 and by the continued-fraction recursion for the
first diagonal entry of the fundamental matrix, and the two are compared.
"""

import logging
from typing import List, Sequence, Tuple, Union

import numpy as np

from ssga_lab.analysis.chain import build_chain
from ssga_lab.core.custom_types import (
    AbsorptionResult,
    ChainSpec,
    SolverDiagnostics,
    TransitionTable,
    TridiagonalSystem,
)

logger = logging.getLogger(__name__)

MONOTONE_TOLERANCE = 1e-12
SIGN_TOLERANCE = 1e-12


class ZeroPivotError(ValueError):
    """Raised when elimination or the xi recursion meets a zero pivot."""


def assemble_system(t: TransitionTable) -> TridiagonalSystem:
    """
    Builds I - Q from a transition table.

    The diagonal is the total outgoing probability of each transient state,
    a_{r,r} = 1 - p_{r,r}, summed from the off-diagonal moves so no
    cancellation occurs for small probabilities.
    """
    m = t.m
    sub = tuple(-t.get(r, r - 1) for r in range(1, m))
    sup = tuple(-t.get(r, r + 1) for r in range(m - 1))
    exits = tuple(t.exit_probability(r) for r in range(m))
    diag = tuple(
        (-sub[r - 1] if r > 0 else 0.0) + (-sup[r] if r < m - 1 else 0.0) + exits[r]
        for r in range(m)
    )
    margins = _row_margins(diag, sub, sup)
    sdd = all(margin > 0 for margin in margins)
    if not sdd:
        logger.warning("I - Q is not strongly diagonally dominant (row margins %s)", margins)
    return TridiagonalSystem(diag=diag, sub=sub, sup=sup, exits=exits, sdd=sdd)


def _row_margins(diag: Sequence[float], sub: Sequence[float], sup: Sequence[float]) -> List[float]:
    m = len(diag)
    margins = []
    for r in range(m):
        off = (abs(sub[r - 1]) if r > 0 else 0.0) + (abs(sup[r]) if r < m - 1 else 0.0)
        margins.append(abs(diag[r]) - off)
    return margins


def row_margins(sys: TridiagonalSystem) -> List[float]:
    """|a_rr| - sum of |off-diagonal| per row; equals the exit probability of each state."""
    return _row_margins(sys.diag, sys.sub, sys.sup)


def _thomas(sys: TridiagonalSystem, rhs: Sequence[float]) -> np.ndarray:
    # Gaussian elimination without pivoting, valid for SDD systems
    m = sys.m
    c = np.zeros(m)
    d = np.zeros(m)
    pivot = sys.diag[0]
    if pivot == 0:
        raise ZeroPivotError("zero pivot in row 0")
    c[0] = sys.sup[0] / pivot if m > 1 else 0.0
    d[0] = rhs[0] / pivot
    for r in range(1, m):
        pivot = sys.diag[r] - sys.sub[r - 1] * c[r - 1]
        if pivot == 0 or not np.isfinite(pivot):
            raise ZeroPivotError(f"zero pivot in row {r}")
        c[r] = sys.sup[r] / pivot if r < m - 1 else 0.0
        d[r] = (rhs[r] - sys.sub[r - 1] * d[r - 1]) / pivot
    x = np.zeros(m)
    x[m - 1] = d[m - 1]
    for r in range(m - 2, -1, -1):
        x[r] = d[r] - c[r] * x[r + 1]
    return x


def multiply(sys: TridiagonalSystem, x: Sequence[float]) -> np.ndarray:
    """(I - Q) x."""
    m = sys.m
    y = np.array(sys.diag, dtype=float) * np.asarray(x, dtype=float)
    for r in range(m):
        if r > 0:
            y[r] += sys.sub[r - 1] * x[r - 1]
        if r < m - 1:
            y[r] += sys.sup[r] * x[r + 1]
    return y


def solve_expected_times(sys: TridiagonalSystem) -> List[float]:
    """
    Solves (I - Q) t = 1; t[r] is the expected absorption time from state r.

    Raises:
        ZeroPivotError: If the system is degenerate.
    """
    return _thomas(sys, np.ones(sys.m)).tolist()


def fundamental_matrix(sys: TridiagonalSystem) -> np.ndarray:
    """N = (I - Q)^{-1}, one elimination per column."""
    m = sys.m
    columns = [_thomas(sys, np.eye(m)[k]) for k in range(m)]
    return np.column_stack(columns)


def absorption_variances(sys: TridiagonalSystem, times: Sequence[float]) -> List[float]:
    """Var[T_r] = 2 (N t)_r - t_r (t_r + 1)."""
    t = np.asarray(times, dtype=float)
    second = _thomas(sys, t)
    return (2 * second - t * (t + 1)).tolist()


def xi_recursion(sys: TridiagonalSystem) -> Tuple[List[float], float]:
    """
    Backward continued-fraction recursion for xi_2..xi_m and n_{1,1}.

    With 1-based rows, xi_m = -a_{m,m-1}/a_{m,m},
    xi_i = -a_{i,i-1}/(a_{i,i} + a_{i,i+1} xi_{i+1}) and
    n_{1,1} = 1/(a_{1,1} + a_{1,2} xi_2). The xi are reported as probabilities:
    in transition-probability form xi_i = p_{i-1,i-2}/(p_{i-1,m} + p_{i-1,i-2}
    + p_{i-1,i}(1 - xi_{i+1})).

    Raises:
        ZeroPivotError: If a denominator vanishes.
    """
    m = sys.m
    if m == 1:
        if sys.diag[0] == 0:
            raise ZeroPivotError("zero diagonal in a single-state system")
        return [], 1.0 / sys.diag[0]

    xi = [0.0] * m
    if sys.diag[m - 1] == 0:
        raise ZeroPivotError(f"zero diagonal in row {m - 1}")
    xi[m - 1] = -sys.sub[m - 2] / sys.diag[m - 1]
    for r in range(m - 2, 0, -1):
        denominator = sys.diag[r] + sys.sup[r] * xi[r + 1]
        if denominator == 0:
            raise ZeroPivotError(f"vanishing denominator in row {r}")
        xi[r] = -sys.sub[r - 1] / denominator
    denominator = sys.diag[0] + sys.sup[0] * xi[1]
    if denominator == 0:
        raise ZeroPivotError("vanishing denominator in row 0")
    return xi[1:], 1.0 / denominator


def check_sign_structure(sys: TridiagonalSystem) -> bool:
    """
    Verifies that (I - Q)^{-1} is entrywise non-negative and obeys the
    diagonal bounds |n_ik| <= n_kk <= 1/(|a_kk| - sum_l |a_kl|); for the first
    row this reads n_{1,k} <= 1/p_{k-1,m}.
    """
    n = fundamental_matrix(sys)
    scale = max(float(np.abs(n).max()), 1.0)
    if (n < -SIGN_TOLERANCE * scale).any():
        return False
    margins = row_margins(sys)
    for k in range(sys.m):
        column = n[:, k]
        if (column > n[k, k] * (1 + 1e-9) + SIGN_TOLERANCE * scale).any():
            return False
        if margins[k] > 0 and n[k, k] > (1 + 1e-9) / margins[k]:
            return False
    return True


def check_monotonicity(result: AbsorptionResult) -> bool:
    """True iff E[T_0] >= E[T_1] >= ... >= E[T_{m-1}] > 0."""
    times = result.expected_times
    if not times or times[-1] <= 0:
        return False
    return all(
        earlier >= later - MONOTONE_TOLERANCE * abs(earlier)
        for earlier, later in zip(times, times[1:])
    )


def monotonicity_premise(t: TransitionTable) -> bool:
    """
    p_{i+1,m} >= p_{i,m} for every transient i, state 0 included.

    Under this premise the absorption times decrease with the state. It fails
    whenever mutation alone improves more easily than recombination does from
    state 1, which is the case on low and middle levels.
    """
    return all(t.exit_probability(i + 1) >= t.exit_probability(i) for i in range(t.m - 1))


def analyze_chain(chain: Union[ChainSpec, TransitionTable]) -> AbsorptionResult:
    """Builds (if needed), assembles and solves a chain and runs every diagnostic."""
    table = build_chain(chain) if isinstance(chain, ChainSpec) else chain
    sys = assemble_system(table)
    times = solve_expected_times(sys)
    xi, n11 = xi_recursion(sys)

    residual = float(np.abs(multiply(sys, times) - 1.0).max())
    n11_elimination = float(_thomas(sys, np.eye(sys.m)[0])[0])
    agreement = abs(n11 - n11_elimination) / abs(n11_elimination)

    result = AbsorptionResult(
        expected_times=times,
        variances=absorption_variances(sys, times),
        xi=xi,
        n11=n11,
        diagnostics=SolverDiagnostics(
            sdd_ok=sys.sdd,
            signs_ok=check_sign_structure(sys),
            residual_norm=residual,
            n11_agreement=agreement,
        ),
    )
    result.diagnostics.monotone_ok = check_monotonicity(result)
    result.diagnostics.monotone_premise = monotonicity_premise(table)
    return result
