import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lfsurv import (DomainError, Exponential, Gompertz, PiecewiseConstant, SurvivalDataset,
                    ValidationError, Weibull, integrate_weighted, make_family)
from lfsurv.weights import SmoothWeight, StepWeight, WeightPlan

from conftest import FAMILY_SPECS, central_diff, family_and_point, rel_err

FAMILIES = sorted(FAMILY_SPECS)


def test_exponential_example():
    fam = make_family("exponential")
    th = np.array([0.5])
    assert_allclose(fam.alpha([0.3, 7.0], th), 0.5)
    assert_allclose(fam.cumhaz(2.0, th), 1.0)
    assert_allclose(fam.psi(1.0, th), [[2.0]])


def test_weibull_reduces_to_unit_exponential():
    fam = Weibull()
    s = np.array([0.1, 1.0, 4.0])
    assert_allclose(fam.alpha(s, [1.0]), 1.0)
    assert_allclose(fam.cumhaz(s, [1.0]), s)


def test_weibull_psi_form():
    fam = Weibull()
    s = np.array([0.2, 1.5, 3.0])
    th = 1.7
    assert_allclose(fam.psi(s, [th])[:, 0], (1 + np.log(s ** th)) / th, rtol=1e-14)


def test_make_family_errors():
    with pytest.raises(ValidationError):
        make_family("lognormal")
    with pytest.raises(ValidationError):
        make_family("piecewise_constant")
    with pytest.raises(ValidationError):
        make_family("piecewise", {"cuts": [0.5, 1.0]})
    with pytest.raises(ValidationError):
        make_family("exponential", {"cuts": [0.0]})
    assert make_family("piecewise", {"cuts": [0, 1]}).dim == 2


def test_domain_checks():
    with pytest.raises(DomainError):
        Exponential().check([-1.0])
    with pytest.raises(DomainError):
        Gompertz().check([0.0, 1.0])
    assert Gompertz().in_domain([1.0, -3.0])


@pytest.mark.parametrize("name", FAMILIES)
def test_derivatives_match_finite_differences(name):
    rng = np.random.default_rng(11)
    for _ in range(20):
        fam, th = family_and_point(name, rng)
        s = rng.uniform(0.05, 4.0, 5)
        assert rel_err(central_diff(lambda t: fam.cumhaz(s, t), th), fam.cumhaz_grad(s, th)) < 1e-5
        assert rel_err(central_diff(lambda t: fam.cumhaz_grad(s, t), th), fam.cumhaz_hess(s, th)) < 1e-5
        assert rel_err(central_diff(lambda t: fam.log_alpha(s, t), th), fam.psi(s, th)) < 1e-5
        assert rel_err(central_diff(lambda t: fam.psi(s, t), th), fam.dpsi(s, th)) < 1e-5


@pytest.mark.parametrize("name", FAMILIES)
def test_cumhaz_is_integral_of_alpha(name):
    rng = np.random.default_rng(3)
    fam, th = family_and_point(name, rng)
    val = integrate_weighted(fam, th, "alpha", t1=3.2, force_quadrature=True)
    # shape < 1 puts an integrable singularity at 0, where the error estimate is only approximate
    assert_allclose(val, fam.cumhaz(3.2, th)[0], rtol=1e-9)


@pytest.mark.parametrize("name", FAMILIES)
def test_inverse_cumhaz(name):
    rng = np.random.default_rng(5)
    fam, th = family_and_point(name, rng)
    t = rng.uniform(0.01, 3.0, 10)
    assert_allclose(fam.inverse_cumhaz(fam.cumhaz(t, th), th), t, rtol=1e-10)


def test_gompertz_inverse_against_bisection_oracle(oracle):
    fam = Gompertz()
    for row in oracle["gompertz_inverse"]:
        assert_allclose(fam.inverse_cumhaz(row["u"], [row["a"], row["b"]]), row["t"], rtol=1e-13)
    # defective: total hazard a/|b| = 5 is never reached
    assert np.isinf(fam.inverse_cumhaz(6.0, [1.0, -0.2])[0])


def test_gompertz_series_branch_is_continuous():
    fam = Gompertz()
    t = np.array([0.999, 1.0, 1.001])
    for b in (0.0999999, 0.1000001, -0.0999999, -0.1000001, 1e-12):
        A = fam.cumhaz(t, [0.7, b])
        exact = 0.7 * np.expm1(b * t) / b
        assert_allclose(A, exact, rtol=1e-13)


def test_integrate_weighted_examples():
    fam = Exponential()
    assert_allclose(integrate_weighted(fam, [2.0], "alpha", t0=0.0, t1=3.0), 6.0)
    yw = StepWeight([1.0, 2.0], [1.0, 2 / 3, 1 / 3])
    assert_allclose(integrate_weighted(fam, [1.0], "alpha", yw, 0.0, 3.0), 2.0, rtol=1e-15)
    assert_allclose(integrate_weighted(fam, [1.0], "alpha", yw, 0.0, 3.0, force_quadrature=True),
                    2.0, rtol=1e-12)
    for name in FAMILIES:
        f, th = family_and_point(name, np.random.default_rng(0))
        assert np.all(integrate_weighted(f, th, "psipsi_alpha", None, 1.3, 1.3) == 0)


@pytest.mark.parametrize("name", ["exponential", "piecewise_constant"])
def test_closed_form_matches_quadrature(name):
    rng = np.random.default_rng(8)
    fam, th = family_and_point(name, rng)
    w = StepWeight([0.4, 1.7, 2.2], [1.0, 0.5, 2.0, 0.25])
    for g in ("alpha", "psi_alpha", "hess_alpha"):
        a = integrate_weighted(fam, th, g, w, 0.0, 3.0)
        b = integrate_weighted(fam, th, g, w, 0.0, 3.0, tol=1e-10, force_quadrature=True)
        assert_allclose(a, b, rtol=1e-9, atol=1e-14)


def test_smooth_weight_quadrature():
    fam = Weibull()
    w = SmoothWeight(lambda s: np.exp(-s), support=(0.0, np.inf))
    # int_0^2 e^{-s} * 2 s ds
    exact = 2 * (1 - 3 * math.exp(-2))
    assert_allclose(integrate_weighted(fam, [2.0], "alpha", w, 0.0, 2.0), exact, rtol=1e-10)


def test_piecewise_counts():
    fam = PiecewiseConstant([0.0, 2.0])
    ds = SurvivalDataset([1.0, 3.0, 4.0], [1, 1, 0])
    d, E = fam.segment_counts(ds)
    assert_allclose(d, [1, 1])
    assert_allclose(E, [1 + 2 + 2, 1 + 2])


def test_window_plan_resolves():
    ds = SurvivalDataset([1.0, 2.0], [1, 1])
    w = WeightPlan("window", window=(0.5, 1.5)).resolve(ds)
    assert_allclose(w([0.5, 0.6, 1.5, 1.6]), [0, 1, 1, 0])
