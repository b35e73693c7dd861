import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lfsurv import Exponential, ValidationError, coverage_study, make_truth, simulate_sample
from lfsurv.simulate import censor_rate_for_fraction, efficiency_formulas, efficiency_study


def test_uncensored_truth_all_events():
    ds = simulate_sample(make_truth("weibull", shape=2.0), 200, seed=1)
    assert ds.delta.sum() == 200


def test_uncensored_fraction():
    g = 0.5
    ds = simulate_sample(make_truth("exponential", censor_rate=g), 10000, seed=2)
    p = 1 / (1 + g)
    assert abs(ds.delta.mean() - p) < 4 * math.sqrt(p * (1 - p) / 10000)


def test_reproducible():
    truth = make_truth("gompertz", a=0.5, b=0.3, censor_rate=0.4)
    a = simulate_sample(truth, 50, seed=9, T=3.0)
    b = simulate_sample(truth, 50, seed=9, T=3.0)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.delta, b.delta)
    assert a.horizon == 3.0 and a.x.max() <= 3.0


def test_formulas_g_zero_coincide():
    f = efficiency_formulas(0.0, 0.1)
    assert_allclose(f["ml"], f["inverse_censoring_km"], rtol=1e-15)
    assert_allclose(f["ml_with_censoring"], f["ml"], rtol=1e-15)


def test_formula_ordering_and_corrected_value(oracle):
    f = efficiency_formulas(0.5, 0.1)
    assert f["inverse_yhat"] > f["inverse_censoring_km"] > f["ml"]
    assert_allclose(f["ml_with_censoring"], oracle["efficiency"]["ml_with_censoring"], rtol=1e-12)


def test_efficiency_study_small():
    res = efficiency_study(0.5, 0.1, n=300, reps=40, seed=3)
    assert set(res.n_var) == {"ml", "inverse_censoring_km", "inverse_yhat"}
    assert res.n_var["inverse_yhat"] > res.n_var["ml"]
    with pytest.raises(ValidationError):
        efficiency_study(reps=1)


def test_coverage_small_and_errors():
    truth = make_truth("exponential", censor_rate=0.5)
    res = coverage_study(truth, Exponential(), 200, 40, seed=1, T=3.0)
    assert res.failures == 0
    assert 0.6 <= res.coverage_model_robust[0.9] <= 1.0
    assert_allclose(res.theta0, [1.0], rtol=1e-8)
    with pytest.raises(ValidationError):
        coverage_study(truth, Exponential(), 200, 0, T=3.0)


def test_censor_rate_for_fraction():
    g = censor_rate_for_fraction("exponential", 1 / 3, rate=1.0)
    assert_allclose(g, 0.5, rtol=1e-10)
