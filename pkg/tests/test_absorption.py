import numpy as np
import pytest
from scipy.linalg import solve_banded

from ssga_lab.analysis.absorption import (
    ZeroPivotError,
    analyze_chain,
    assemble_system,
    check_monotonicity,
    check_sign_structure,
    fundamental_matrix,
    monotonicity_premise,
    solve_expected_times,
    xi_recursion,
)
from ssga_lab.analysis.chain import build_chain, chain_spec_for, table_from_rows, table_to_matrix
from ssga_lab.core.custom_types import StandardBitMutation, TridiagonalSystem


def _spec(mu, j, n=1000, c=1.0):
    return chain_spec_for(mu, j, n, StandardBitMutation(c=c))


def _dense_times(table):
    q = table_to_matrix(table)[:, :table.m]
    return np.linalg.solve(np.eye(table.m) - q, np.ones(table.m))


def test_geometric_single_state():
    """Test a single transient state with exit probability 1/2"""
    result = analyze_chain(table_from_rows([{1: 0.5}]))
    assert result.expected_times == [pytest.approx(2.0)]
    assert result.variances == [pytest.approx(2.0)]
    assert result.xi == []
    assert result.n11 == pytest.approx(2.0)


def test_assemble_system_entries():
    """Test I - Q in tridiagonal storage"""
    t = table_from_rows([{1: 0.2, 3: 0.1}, {0: 0.3, 2: 0.1, 3: 0.05}, {1: 0.4, 3: 0.2}])
    sys = assemble_system(t)
    assert sys.diag == pytest.approx((0.3, 0.45, 0.6))
    assert sys.sub == pytest.approx((-0.3, -0.4))
    assert sys.sup == pytest.approx((-0.2, -0.1))
    assert sys.exits == pytest.approx((0.1, 0.05, 0.2))
    assert sys.sdd


def test_elimination_matches_dense_and_banded_solvers():
    """Test Thomas elimination against numpy and scipy"""
    table = build_chain(_spec(17, 400))
    sys = assemble_system(table)
    times = np.array(solve_expected_times(sys))
    np.testing.assert_allclose(times, _dense_times(table), rtol=1e-10)

    m = sys.m
    banded = np.zeros((3, m))
    banded[0, 1:] = sys.sup
    banded[1, :] = sys.diag
    banded[2, :-1] = sys.sub
    np.testing.assert_allclose(times, solve_banded((1, 1), banded, np.ones(m)), rtol=1e-10)


def test_xi_recursion_mu3():
    """Test xi2 = 5/9 for mu=3"""
    xi, n11 = xi_recursion(assemble_system(build_chain(_spec(3, 500))))
    assert xi == [pytest.approx(5 / 9, abs=1e-12)]
    spec = _spec(3, 500)
    p01 = 3 / 4 * 2 * 500 * 500 * spec.p2 / 1000 ** 2
    assert n11 == pytest.approx(1 / (500 * spec.p1 / 1000 + p01 * (1 - 5 / 9)), rel=1e-12)


def test_xi_recursion_mu4():
    """Test xi2 = 7/12 for mu=4"""
    xi, _ = xi_recursion(assemble_system(build_chain(_spec(4, 10))))
    assert xi == [pytest.approx(7 / 12, abs=1e-12)]


def test_xi_recursion_probability_form():
    """Test the recursion against its transition-probability form"""
    table = build_chain(_spec(9, 300))
    m = table.m
    xi, _ = xi_recursion(assemble_system(table))
    expected = [0.0] * (m + 2)
    expected[m] = table.get(m - 1, m - 2) / (table.exit_probability(m - 1) + table.get(m - 1, m - 2))
    for i in range(m - 1, 1, -1):
        row = i - 1
        expected[i] = table.get(row, row - 1) / (
            table.exit_probability(row) + table.get(row, row - 1) + table.get(row, row + 1) * (1 - expected[i + 1])
        )
    assert xi == pytest.approx(expected[2:m + 1], rel=1e-12)
    assert all(0 < x < 1 for x in xi)


def test_n11_agrees_with_fundamental_matrix():
    """Test the recursion's n11 equals the inverse's first entry"""
    for mu in (3, 8, 33, 64):
        sys = assemble_system(build_chain(_spec(mu, 999, c=2.0)))
        _, n11 = xi_recursion(sys)
        assert n11 == pytest.approx(fundamental_matrix(sys)[0, 0], rel=1e-10)


def test_sign_structure_on_chains():
    """Test non-negativity and the diagonal bounds of the inverse"""
    for mu in (3, 6, 21, 50):
        for j in (1, 500, 999):
            assert check_sign_structure(assemble_system(build_chain(_spec(mu, j))))


def test_first_row_bounded_by_exit_probabilities():
    """Test n_{1,k} <= 1/p_{k-1,m}"""
    table = build_chain(_spec(12, 700))
    inverse = fundamental_matrix(assemble_system(table))
    for k in range(table.m):
        assert inverse[0, k] <= 1 / table.exit_probability(k) * (1 + 1e-12)


def test_variances_match_dense_formula():
    """Test Var[T] = (2N - I)t - t^2"""
    table = build_chain(_spec(7, 250))
    result = analyze_chain(table)
    q = table_to_matrix(table)[:, :table.m]
    n = np.linalg.inv(np.eye(table.m) - q)
    t = n @ np.ones(table.m)
    expected = (2 * n - np.eye(table.m)) @ t - t ** 2
    np.testing.assert_allclose(result.variances, expected, rtol=1e-8)


def test_monotone_on_top_level():
    """Test absorption times decrease with the state when the premise holds"""
    for mu in (3, 5, 10, 64):
        table = build_chain(_spec(mu, 999))
        assert monotonicity_premise(table)
        result = analyze_chain(table)
        assert result.diagnostics.monotone_ok


def test_times_increase_on_middle_level():
    """Test mu=3 at j=n/2: leaving state 0 by mutation is faster than from state 1"""
    table = build_chain(_spec(3, 500))
    result = analyze_chain(table)
    assert not monotonicity_premise(table)
    assert result.expected_times[1] > result.expected_times[0]
    assert not check_monotonicity(result)
    assert not result.diagnostics.monotone_ok


def test_diagnostics_of_analyze_chain():
    """Test the residual and agreement reported by analyze_chain"""
    result = analyze_chain(_spec(40, 999, c=0.5))
    d = result.diagnostics
    assert d.sdd_ok and d.signs_ok
    assert d.residual_norm <= 1e-10 * max(result.expected_times)
    assert d.n11_agreement <= 1e-10
    assert result.xi2 == result.xi[0]


def test_zero_pivot():
    """Test a state that never leaves makes the system singular"""
    sys = assemble_system(table_from_rows([{1: 0.0}]))
    assert not sys.sdd
    with pytest.raises(ZeroPivotError):
        solve_expected_times(sys)
    with pytest.raises(ZeroPivotError):
        xi_recursion(sys)


def test_not_sdd_without_exit_from_state_zero():
    """Test p1 = p2 = 0 leaves state 0 without outgoing mass"""
    table = table_from_rows([{1: 0.0, 2: 0.0}, {0: 0.1, 2: 0.1}])
    sys = assemble_system(table)
    assert not sys.sdd
    with pytest.raises(ZeroPivotError):
        solve_expected_times(sys)


def test_sign_structure_rejects_negative_inverse():
    """Test an I - Q whose inverse has a negative entry fails the check"""
    sys = TridiagonalSystem(diag=(1.0, 1.0), sub=(0.5,), sup=(-0.5,), exits=(0.5, 1.5), sdd=True)
    assert fundamental_matrix(sys)[1, 0] == pytest.approx(-0.4)
    assert not check_sign_structure(sys)


@pytest.mark.parametrize("j", [1, 500, 999])
def test_mu3_times_by_cramers_rule(j):
    """Test the two-state solve against the closed-form 2x2 inverse"""
    sys = assemble_system(build_chain(_spec(3, j)))
    a11, a22 = sys.diag
    (a12,), (a21,) = sys.sup, sys.sub
    det = a11 * a22 - a12 * a21
    t0, t1 = solve_expected_times(sys)
    assert t0 == pytest.approx((a22 - a12) / det, rel=1e-12)
    assert t1 == pytest.approx((a11 - a21) / det, rel=1e-12)

    inverse = fundamental_matrix(sys)
    n12 = -a12 / det
    assert inverse[0, 1] == pytest.approx(n12, rel=1e-12)
    assert n12 <= 1 / sys.exits[1] * (1 + 1e-12)
