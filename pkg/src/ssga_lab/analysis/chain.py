"""
The level-j diversity chain: m = ceil(mu/2) transient states counting how many
individuals differ from the majority genotype, plus one absorbing state for
"an individual above level j has been sampled".

All probabilities are computed with the formulas factored exactly as they are
stated for the chain, so tests can compare them term by term.
"""

import logging
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from ssga_lab.core.custom_types import (
    PROBABILITY_TOLERANCE,
    ChainDiagnostics,
    ChainSpec,
    MutationSpec,
    TransitionTable,
)

logger = logging.getLogger(__name__)


class ChainConstructionError(ValueError):
    """
    Raised when a computed transition probability is invalid.

    Attributes:
        state (int): Row of the offending entry.
        target (int): Column of the offending entry.
    """

    def __init__(self, state: int, target: int, message: str):
        super().__init__(f"invalid transition ({state}, {target}): {message}")
        self.state = state
        self.target = target


def chain_spec_for(mu: int, j: int, n: int, mutation: MutationSpec) -> ChainSpec:
    """ChainSpec whose p0, p1, p2 are the operator's exact flip probabilities at size n."""
    p0, p1, p2 = mutation.flip_probabilities(n)
    return ChainSpec(mu=mu, j=j, n=n, p0=p0, p1=p1, p2=p2)


def exit_probability(mu: int, i: int, p0: float) -> float:
    """p_{i,m} for i > 0: a minority and a majority parent recombine into an improvement."""
    return 2 * (i / mu) * ((mu - i) / mu) * (p0 / 4)


def _gain_from_one(mu: int, p0: float) -> float:
    # p_{1,2}
    return p0 * (
        (1 / mu) ** 2 * (mu - 1) / (mu + 1)
        + 2 * (1 / mu) * ((mu - 1) / mu) * (1 / 4) * ((mu - 1) / (mu + 1))
    )


def _loss_from_one(mu: int, p0: float) -> float:
    # p_{1,0}
    return p0 * (((mu - 1) / mu) ** 2 + 2 * (1 / mu) * ((mu - 1) / mu) * (1 / 4)) * (1 / (mu + 1))


def _gain(mu: int, i: int, p0: float) -> float:
    # p_{i,i+1}, m-1 > i > 1
    return p0 * (
        (i / mu) ** 2 * min((mu - i) / (mu + 1), 1 / 4)
        + 2 * (i / mu) * ((mu - i) / mu) * (1 / 4) * ((mu - i) / (mu + 1))
    )


def _loss(mu: int, i: int, p0: float) -> float:
    # p_{i,i-1}, m > i > 1
    return p0 * (
        ((mu - i) / mu) ** 2
        + 2 * (i / mu) * ((mu - i) / mu) * (1 / 4)
        + (i / mu) ** 2 * (1 / 16)
    ) * (i / (mu + 1))


def _checked_row(state: int, off_diagonal: Mapping[int, float]) -> Dict[Tuple[int, int], float]:
    row: Dict[Tuple[int, int], float] = {}
    for target, value in off_diagonal.items():
        if not (0.0 <= value <= 1.0):
            raise ChainConstructionError(state, target, f"probability {value!r} outside [0, 1]")
        row[(state, target)] = value
    stay = 1.0 - sum(off_diagonal.values())
    if stay < -PROBABILITY_TOLERANCE:
        raise ChainConstructionError(state, state, f"outgoing mass exceeds 1 (self-loop {stay!r})")
    row[(state, state)] = max(stay, 0.0)
    return row


def build_chain(spec: ChainSpec) -> TransitionTable:
    """
    Transition probabilities of the level-j chain for the given parameters.

    For m = 2 the only transient states are 0 and 1; row 1 then has just the
    p_{1,0} loss and the p_{1,m} exit.

    Raises:
        ChainConstructionError: If an entry falls outside [0, 1] or a row's
            outgoing mass exceeds 1.
    """
    mu, j, n = spec.mu, spec.j, spec.n
    p0, p1, p2 = spec.p0, spec.p1, spec.p2
    m = spec.m

    p: Dict[Tuple[int, int], float] = {}
    p.update(_checked_row(0, {
        1: mu / (mu + 1) * 2 * j * (n - j) * p2 / n ** 2,
        m: (n - j) * p1 / n,
    }))
    for i in range(1, m):
        moves = {m: exit_probability(mu, i, p0)}
        moves[i - 1] = _loss_from_one(mu, p0) if i == 1 else _loss(mu, i, p0)
        if i < m - 1:
            moves[i + 1] = _gain_from_one(mu, p0) if i == 1 else _gain(mu, i, p0)
        p.update(_checked_row(i, moves))
    p[(m, m)] = 1.0

    table = TransitionTable(m=m, p=p)
    residuals = validate_chain(table).row_sum_residuals
    worst = int(np.argmax(residuals))
    if residuals[worst] > PROBABILITY_TOLERANCE:
        raise ChainConstructionError(worst, worst, f"row sum off by {residuals[worst]!r}")
    logger.debug("built chain mu=%d j=%d n=%d with m=%d transient states", mu, j, n, m)
    return table


def validate_chain(t: TransitionTable) -> ChainDiagnostics:
    """
    Checks row stochasticity, entry ranges, the tridiagonal-plus-exit topology
    and that exit probabilities do not decrease from state 1 upwards.
    """
    m = t.m
    residuals: List[float] = []
    for i in range(m):
        total = sum(value for (row, _), value in t.p.items() if row == i)
        residuals.append(abs(total - 1.0))

    out_of_range = sorted(key for key, value in t.p.items() if not (0.0 <= value <= 1.0))
    topology = sorted(
        (i, k) for (i, k), value in t.p.items()
        if value != 0.0 and not (abs(i - k) <= 1 or k == m) and i != m
    )
    exit_monotone = all(
        t.exit_probability(i + 1) >= t.exit_probability(i) for i in range(1, m - 1)
    )
    ok = (
        not out_of_range
        and not topology
        and exit_monotone
        and all(r <= PROBABILITY_TOLERANCE for r in residuals)
    )
    return ChainDiagnostics(
        ok=ok,
        row_sum_residuals=residuals,
        out_of_range=out_of_range,
        topology_violations=topology,
        exit_monotone=exit_monotone,
    )


def table_from_rows(rows: Sequence[Mapping[int, float]]) -> TransitionTable:
    """
    Hand-built table from transient rows; each row maps target -> probability,
    with target len(rows) meaning absorption. Self-loops are filled in.
    """
    m = len(rows)
    p: Dict[Tuple[int, int], float] = {}
    for i, row in enumerate(rows):
        moves = {k: float(v) for k, v in row.items() if k != i}
        p[(i, i)] = 1.0 - sum(moves.values())
        p.update({(i, k): v for k, v in moves.items()})
    p[(m, m)] = 1.0
    return TransitionTable(m=m, p=p)


def table_to_matrix(t: TransitionTable) -> np.ndarray:
    """Dense m x (m+1) array of the transient rows."""
    matrix = np.zeros((t.m, t.m + 1))
    for (i, k), value in t.p.items():
        if i < t.m:
            matrix[i, k] = value
    return matrix


def table_to_records(t: TransitionTable) -> List[Dict[str, Any]]:
    """Row-major sparse list of {"i", "k", "p"} records."""
    return [{"i": i, "k": k, "p": value} for (i, k), value in sorted(t.p.items())]


def table_from_records(m: int, records: Iterable[Mapping[str, Any]]) -> TransitionTable:
    return TransitionTable(m=m, p={(int(r["i"]), int(r["k"])): float(r["p"]) for r in records})
