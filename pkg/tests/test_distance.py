import numpy as np
import pytest
from numpy.testing import assert_allclose

from lfsurv import (Exponential, ValidationError, cox_distance, cox_least_false, hazard_distance,
                    kl_identity_check, least_false_oracle, make_family, make_truth)
from lfsurv.distance import distance_gradient


def test_in_family_is_zero():
    truth = make_truth("weibull", shape=1.7, rate=0.8, censor_rate=0.3)
    fam = make_family("weibull2")
    assert abs(hazard_distance(truth, fam, [1.7, 0.8], T=3.0)) < 1e-13


def test_exponential_minimiser(oracle):
    o = oracle["least_false_weibull"]
    truth = make_truth("weibull", shape=1.5, censor_rate=0.5)
    res = least_false_oracle(Exponential(), truth.alpha0, truth.y, o["T"])
    assert_allclose(res.theta0, [o["theta0_unit"]], rtol=1e-9)
    assert np.linalg.norm(distance_gradient(truth, Exponential(), res.theta0, T=o["T"])) < 1e-6
    d0 = hazard_distance(truth, Exponential(), res.theta0, T=o["T"])
    for th in np.random.default_rng(0).uniform(0.2, 3.0, 100):
        assert hazard_distance(truth, Exponential(), [th], T=o["T"]) >= d0


def test_nonnegative_random_draws():
    rng = np.random.default_rng(4)
    fam = make_family("gompertz")
    for _ in range(100):
        truth = make_truth("weibull", shape=rng.uniform(0.5, 3), rate=rng.uniform(0.3, 2),
                           censor_rate=rng.uniform(0, 1))
        th = [rng.uniform(0.1, 2), rng.uniform(-1, 1)]
        assert hazard_distance(truth, fam, th, T=rng.uniform(0.5, 4)) >= -1e-14


def test_kl_example(oracle):
    o = oracle["kl"]
    truth = make_truth("exponential", rate=1.0)
    r = kl_identity_check(truth, Exponential(), [2.0], o["T"])
    assert r.residual <= 1e-7
    assert_allclose([r.distance, r.kl, r.boundary], [o["distance"], o["kl"], o["boundary"]],
                    rtol=1e-10)


def test_kl_at_truth_zero():
    r = kl_identity_check(make_truth("exponential", rate=1.3), Exponential(), [1.3], 4.0)
    assert abs(r.distance) < 1e-15 and abs(r.kl) < 1e-15


def test_kl_large_horizon():
    # A(T) = 40: the boundary term is below 1e-16, so d equals the plain KL
    truth = make_truth("exponential", rate=1.0)
    r = kl_identity_check(truth, Exponential(), [0.6], 40.0)
    assert abs(r.boundary) < 1e-15
    assert abs(r.distance - r.kl) < 1e-7


def test_kl_needs_uncensored_truth():
    with pytest.raises(ValidationError):
        kl_identity_check(make_truth("exponential", censor_rate=1.0), Exponential(), [1.0], 2.0)


def test_cox_distances_at_truth():
    truth = make_truth("exponential", rate=0.8, beta0=0.7, censor_rate=0.4)
    assert abs(cox_distance(truth, [0.7], 3.0)) < 1e-13
    assert abs(cox_distance(truth, [0.7], 3.0, mode="parametric", fam=Exponential(),
                            theta=[0.8])) < 1e-13


def test_cox_semiparametric_grid_argmin():
    truth = make_truth("exponential", rate=1.0, beta0=0.5, censor_rate=0.3)
    grid = np.linspace(-0.5, 1.5, 41)
    vals = [cox_distance(truth, [b], 4.0) for b in grid]
    assert_allclose(grid[int(np.argmin(vals))], 0.5)
    assert min(vals) >= -1e-14


def test_cox_scale_invariance():
    truth = make_truth("weibull", shape=1.5, beta0=0.4, censor_rate=0.5)
    h = lambda z: np.exp(0.9 * np.asarray(z).ravel())
    base = cox_distance(truth, h, 3.0)
    for c in (0.5, 2.0):
        assert_allclose(cox_distance(truth, lambda z, c=c: c * h(z), 3.0), base, rtol=1e-12)


def test_cox_least_false_recovers_truth():
    truth = make_truth("weibull", shape=1.5, beta0=0.7, censor_rate=0.5)
    assert_allclose(cox_least_false(truth, 3.0), [0.7], atol=1e-6)


def test_truth_consistency():
    for kind, kw in [("exponential", {}), ("weibull", {"shape": 2.0}),
                     ("gompertz", {"a": 0.5, "b": 0.3}), ("gompertz", {"a": 0.5, "b": -0.3})]:
        truth = make_truth(kind, **kw)
        assert truth.check_consistency(2.5) < 1e-8
        u = np.array([0.1, 0.7, 1.2])
        assert_allclose(truth.A0(truth.inverse_A0(u)), u, rtol=1e-10)
