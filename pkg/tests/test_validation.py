import pytest

from ssga_lab.core.custom_types import CheckKind, ValidationCheck
from ssga_lab.harness.validation import check_xi_monotonicity, check_xi_star, validation_passed


@pytest.fixture(scope="module")
def xi_checks():
    """Monotonicity claims over the figure range of mu"""
    return {check.name: check for check in check_xi_monotonicity()}


def test_xi2_claim_reports_first_violation(xi_checks):
    """Test xi2 is reported as rising first between mu = 5 and 6"""
    check = xi_checks["xi2_nonincreasing_in_mu"]
    assert check.kind == CheckKind.CLAIM
    assert not check.passed
    assert "first violation mu=5->6" in check.detail


def test_xi_star_claim_reports_first_violation(xi_checks):
    """Test xi* is reported as falling first between mu = 5 and 6"""
    check = xi_checks["xi_star_nondecreasing_in_mu"]
    assert check.kind == CheckKind.CLAIM
    assert not check.passed
    assert "first violation mu=5->6" in check.detail
    assert "steps violate" in check.detail


def test_xi_star_invariant_holds():
    """Test xi* = 1/3 at mu = 3 and 4 is an invariant that passes"""
    (invariant,) = [check for check in check_xi_star() if check.kind == CheckKind.INVARIANT]
    assert invariant.passed


def test_failed_claims_do_not_fail_validation(xi_checks):
    """Test only invariant and empirical failures fail the suite"""
    claims = list(xi_checks.values())
    assert validation_passed(claims)
    broken = ValidationCheck(name="x", kind=CheckKind.INVARIANT, passed=False)
    assert not validation_passed(claims + [broken])
    empirical = ValidationCheck(name="y", kind=CheckKind.EMPIRICAL, passed=False)
    assert not validation_passed(claims + [empirical])
