"""Property-based checks of invariants that hold for every dataset."""
import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st
from numpy.testing import assert_allclose

from lfsurv import (Exponential, SurvivalDataset, WeightPlan, counting_view, fit_ml,
                    hazard_distance, influence_empirical, kaplan_meier, make_family,
                    make_truth, nelson_aalen)
from lfsurv.local import kernel_function
from lfsurv.quadrature import integrate

SETTINGS = settings(max_examples=60, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])


@st.composite
def datasets(draw, min_size=2, max_size=40, min_events=1):
    n = draw(st.integers(min_size, max_size))
    # a coarse grid forces plenty of ties
    x = draw(st.lists(st.integers(1, 30), min_size=n, max_size=n))
    d = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    k = min(min_events, n)
    d = [True] * k + d[k:]
    return SurvivalDataset(np.array(x, float) / 10.0, np.array(d, int))


@SETTINGS
@given(datasets())
def test_counting_identities(ds):
    cv = counting_view(ds)
    assert cv.dN.sum() == ds.delta.sum()
    assert cv.at_risk(0.0) == ds.n
    grid = np.linspace(0.0, ds.x.max() + 1.0, 50)
    y = cv.yhat(grid)
    assert np.all(np.diff(y) <= 0) and y.min() >= 0 and y.max() <= 1


@SETTINGS
@given(datasets())
def test_km_is_product_integral_of_na(ds):
    na, km = nelson_aalen(ds), kaplan_meier(ds)
    jumps = np.diff(np.concatenate([[0.0], na.values]))
    assert_allclose(km(na.jump_times), np.cumprod(1.0 - jumps), atol=1e-14)


@SETTINGS
@given(st.lists(st.integers(1, 20), min_size=1, max_size=30))
def test_km_uncensored_is_ecdf(xs):
    x = np.array(xs, float)
    ds = SurvivalDataset(x, np.ones_like(x, dtype=int))
    grid = np.arange(0, 22) + 0.5
    ecdf = np.array([(x <= g).mean() for g in grid])
    assert_allclose(kaplan_meier(ds)(grid), 1.0 - ecdf, atol=1e-14)


@SETTINGS
@given(datasets())
def test_exponential_closed_forms(ds):
    fam = Exponential()
    assert_allclose(fit_ml(ds, fam).theta_hat[0], ds.delta.sum() / ds.x.sum(), rtol=1e-10)
    T = ds.x.max()
    fr = fit_ml(ds, fam, w=WeightPlan("inverse_yhat"))
    assert_allclose(fr.theta_hat[0], nelson_aalen(ds)(T) / T, rtol=1e-10)


@SETTINGS
@given(datasets(min_size=4, min_events=3), st.sampled_from(["exponential", "weibull"]))
def test_influence_sums_and_sphering(ds, name):
    fam = make_family(name)
    fr = fit_ml(ds, fam)
    rep = influence_empirical(ds, fam, fr)
    scale = 1.0 + np.abs(rep.per_record).max()
    assert np.abs(rep.per_record.sum(axis=0)).max() <= 1e-8 * scale
    if rep.sigma_hat.min() > 1e-10:
        cov = rep.sphered.T @ rep.sphered / ds.n
        assert_allclose(cov, np.eye(fam.dim), atol=1e-8)


@SETTINGS
@given(datasets(), st.randoms(use_true_random=False))
def test_fit_permutation_invariant(ds, rnd):
    idx = list(range(ds.n))
    rnd.shuffle(idx)
    fam = Exponential()
    a = fit_ml(ds, fam)
    b = fit_ml(ds.subset(np.array(idx)), fam)
    assert_allclose(a.theta_hat, b.theta_hat, rtol=1e-12)
    assert_allclose(a.sandwich, b.sandwich, rtol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 2.5), st.floats(0.05, 4.0), st.floats(0.5, 4.0),
       st.sampled_from([None, 0.5]))
def test_distance_nonnegative(shape, theta, T, cr):
    truth = make_truth("weibull", censor_rate=cr, shape=shape)
    d = hazard_distance(truth, Exponential(), [theta], T=T)
    assert float(np.asarray(d).ravel()[0]) >= -1e-12


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["epanechnikov", "gaussian_truncated", "uniform_window"]),
       st.floats(0.05, 3.0), st.lists(st.floats(0.0, 5.0), min_size=1, max_size=10))
def test_kernel_symmetry(kernel, h, us):
    K = kernel_function(kernel, h)
    u = np.array(us)
    if kernel == "uniform_window":
        # half-open window; symmetric off the right edge
        u = u[np.abs(u - h / 2) > 1e-12]
    assert_allclose(K(u), K(-u))
    assert np.all(K(u) >= 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-5.0, 5.0))
def test_integrate_empty_interval(t):
    assert integrate(lambda s: np.exp(s), [t, t]) == 0.0
