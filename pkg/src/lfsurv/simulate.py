"""Monte Carlo studies: simulated samples, coverage and efficiency.

Randomness flows from one master seed. Replication ``r`` of a study uses the
``r``-th child of ``SeedSequence(seed)`` (``SeedSequence.spawn``), so any
replication can be regenerated alone and results do not depend on
execution order.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._defaults import DEFAULTS
from .dataset import SurvivalDataset
from .distance import TruthSpec, _population_weight, make_truth
from .errors import LFSurvError, ValidationError
from .fit import confidence_region, estimate, fit_ml, least_false_oracle
from .weights import WeightPlan


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def replication_seeds(seed, reps):
    """Child seed sequences for ``reps`` replications of master ``seed``."""
    return np.random.SeedSequence(int(seed)).spawn(int(reps))


def simulate_sample(truth: TruthSpec, n, seed=0, T=None):
    """Draw ``n`` censored records from ``truth``.

    Lifetimes solve ``A0(t) h0(z) = E`` with ``E`` standard exponential;
    censoring times come from the truth's censoring law. With ``T`` given,
    records beyond ``T`` are censored at ``T``. The dataset keeps the full
    censoring-time column.

    Parameters
    ----------
    truth : TruthSpec
    n : int
    seed : int, SeedSequence or Generator
    T : float, optional
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = _rng(seed)
    E = rng.standard_exponential(n)
    z = None
    if truth.covariate_law is not None and truth.h0 is not None:
        z = truth.covariate_law.sample(rng, n)
        E = E / np.asarray(truth.h0(z), dtype=np.float64).ravel()
    x0 = np.asarray(truth.inverse_A0(E), dtype=np.float64)
    c = np.asarray(truth.censor_sample(rng, n), dtype=np.float64)
    x = np.minimum(x0, c)
    delta = (x0 <= c).astype(np.int64)
    if T is None:
        T = float(x.max())
    x_t = np.minimum(x, T)
    delta = np.where(x > T, 0, delta)
    c_t = np.minimum(c, T)
    c_t = np.where(delta == 0, x_t, np.maximum(c_t, x_t))
    return SurvivalDataset(x_t, delta, z, horizon=T, censor_times=c_t)


# --------------------------------------------------------------------------
# efficiency of weighted estimators


def efficiency_formulas(g, eps, theta0=1.0):
    """Analytic ``n Var`` of the three estimators under exponential truth.

    Returns a dict with the published expressions for the unit-weight,
    ``1/G``-weighted and ``1/y``-weighted estimators, plus
    ``ml_with_censoring = theta0^2 (1 + g) / (1 - eps^(1 + g))``, the
    unit-weight variance once the censoring at rate ``g theta0`` is
    accounted for (it equals the first expression only when ``g = 0``).
    """
    L = math.log(1.0 / eps)
    t2 = theta0 ** 2
    ml = t2 / (1.0 - eps)
    if abs(1.0 - g) < 1e-12:
        m1 = t2 * L / (1.0 - eps) ** 2
    else:
        m1 = t2 * (1.0 - eps ** (1.0 - g)) / ((1.0 - g) * (1.0 - eps) ** 2)
    m2 = t2 * ((1.0 / eps) ** (1.0 + g) - 1.0) / ((1.0 + g) * L ** 2)
    corrected = t2 * (1.0 + g) / (1.0 - eps ** (1.0 + g))
    return {"ml": ml, "inverse_censoring_km": m1, "inverse_yhat": m2,
            "ml_with_censoring": corrected}


@dataclass
class EfficiencyResult:
    g: float
    eps: float
    n: int
    reps: int
    seed: int
    T: float
    estimates: dict
    n_var: dict
    formulas: dict
    failures: dict

    def ratios(self):
        """Empirical ``n Var`` over each published formula."""
        return {k: self.n_var[k] / self.formulas[k] for k in ("ml", "inverse_censoring_km", "inverse_yhat")}

    def to_dict(self):
        return {"g": self.g, "eps": self.eps, "n": self.n, "reps": self.reps, "seed": self.seed,
                "T": self.T, "n_var": self.n_var, "formulas": self.formulas,
                "ratios": self.ratios(), "failures": self.failures}


WEIGHTED_ESTIMATORS = ("ml", "inverse_censoring_km", "inverse_yhat")


def efficiency_study(g=0.5, eps=0.1, n=1000, reps=500, seed=0, theta0=1.0, workers=None):
    """Compare the unit, ``1/G_hat`` and ``n/Y`` weighted exponential estimators.

    Exponential lifetimes with rate ``theta0``, exponential censoring with
    rate ``g theta0`` and horizon ``T`` chosen so that ``exp(-theta0 T) = eps``.
    All three estimators target ``theta0``.
    """
    if reps < 2:
        raise ValidationError("efficiency study needs reps >= 2")
    T = math.log(1.0 / eps) / theta0
    truth = make_truth("exponential", rate=theta0, censor_rate=g * theta0 if g > 0 else None)
    plans = {"ml": WeightPlan("unit"), "inverse_censoring_km": WeightPlan("inverse_censoring_km"),
             "inverse_yhat": WeightPlan("inverse_yhat")}
    from .families import Exponential
    fam = Exponential()

    def one(child):
        ds = simulate_sample(truth, n, child, T=T)
        row = {}
        for k, plan in plans.items():
            try:
                row[k] = float(estimate(ds, fam, plan)[0])
            except LFSurvError:
                row[k] = np.nan
        return row

    rows = _map(one, replication_seeds(seed, reps), workers)
    est = {k: np.array([r[k] for r in rows]) for k in plans}
    n_var = {k: float(n * np.nanvar(v, ddof=1)) for k, v in est.items()}
    fails = {k: int(np.sum(~np.isfinite(v))) for k, v in est.items()}
    return EfficiencyResult(g=g, eps=eps, n=n, reps=reps, seed=int(seed), T=T, estimates=est,
                            n_var=n_var, formulas=efficiency_formulas(g, eps, theta0),
                            failures=fails)


# historical name used by the CLI scenario label
efficiency_study_5B = efficiency_study


# --------------------------------------------------------------------------
# coverage


@dataclass
class ScenarioResult:
    """Summary of a coverage study.

    Coverage entries map a nominal level to the fraction of replications
    whose region (ellipsoid) contained the least-false parameter.
    """

    scenario: str
    n: int
    reps: int
    seed: int
    theta0: np.ndarray
    estimates: np.ndarray
    robust_var: np.ndarray
    model_var: np.ndarray
    coverage_model_based: dict
    coverage_model_robust: dict
    failures: int
    bias: np.ndarray = field(default=None)

    @property
    def empirical_var(self):
        return np.var(self.estimates, axis=0, ddof=1)

    @property
    def median_abs_error(self):
        return np.median(np.abs(self.estimates - self.theta0), axis=0)

    def to_dict(self):
        return {"scenario": self.scenario, "n": self.n, "reps": self.reps, "seed": self.seed,
                "theta0": self.theta0.tolist(), "bias": self.bias.tolist(),
                "median_abs_error": self.median_abs_error.tolist(),
                "empirical_var": np.atleast_1d(self.empirical_var).tolist(),
                "mean_robust_var": self.robust_var.mean(axis=0).tolist(),
                "mean_model_var": self.model_var.mean(axis=0).tolist(),
                "coverage_model_based": {str(k): v for k, v in self.coverage_model_based.items()},
                "coverage_model_robust": {str(k): v for k, v in self.coverage_model_robust.items()},
                "failures": self.failures}


def coverage_study(truth, fam, n, reps, levels=None, seed=0, T=None, w=None,
                   scenario="custom", workers=None, theta0=None):
    """Fit ``fam`` to ``reps`` simulated samples and record coverage.

    Parameters
    ----------
    truth : TruthSpec
    fam : HazardFamily
    n, reps : int
    levels : sequence of float
        Nominal levels (default 0.90 and 0.95).
    T : float
        Observation horizon; required.
    w : weight plan, optional
    theta0 : array_like, optional
        Target; computed with :func:`~lfsurv.fit.least_false_oracle` when absent.
    """
    if reps < 1:
        raise ValidationError("reps must be at least 1")
    if T is None:
        raise ValidationError("coverage study needs a horizon T")
    levels = tuple(DEFAULTS["confidence_levels"] if levels is None else levels)
    plan = WeightPlan("unit") if w is None else (WeightPlan(w) if isinstance(w, str) else w)
    if theta0 is None:
        wt = None if plan.is_unit else _population_weight(truth, plan)
        theta0 = least_false_oracle(fam, truth.alpha0, truth.y, T, weight=wt).theta0
    theta0 = np.asarray(theta0, dtype=np.float64)

    def one(child):
        ds = simulate_sample(truth, n, child, T=T)
        try:
            fr = fit_ml(ds, fam, plan)
        except LFSurvError:
            return None
        cb = [confidence_region(fr, lv, "model_based").contains(theta0) for lv in levels]
        try:
            cr = [confidence_region(fr, lv, "model_robust").contains(theta0) for lv in levels]
        except LFSurvError:
            cr = [False] * len(levels)
        return fr.theta_hat, np.diag(fr.sandwich) / n, np.diag(fr.model_based_cov), cb, cr

    rows = [r for r in _map(one, replication_seeds(seed, reps), workers) if r is not None]
    if not rows:
        raise ValidationError("every replication failed")
    est = np.vstack([r[0] for r in rows])
    cb = np.array([r[3] for r in rows], dtype=float)
    cr = np.array([r[4] for r in rows], dtype=float)
    return ScenarioResult(
        scenario=scenario, n=n, reps=reps, seed=int(seed), theta0=theta0, estimates=est,
        robust_var=np.vstack([r[1] for r in rows]), model_var=np.vstack([r[2] for r in rows]),
        coverage_model_based={lv: float(cb[:, j].mean()) for j, lv in enumerate(levels)},
        coverage_model_robust={lv: float(cr[:, j].mean()) for j, lv in enumerate(levels)},
        failures=reps - len(rows), bias=est.mean(axis=0) - theta0)


def censor_rate_for_fraction(truth_kind, fraction, **params):
    """Exponential censoring rate giving the requested censored fraction."""
    from scipy import integrate, optimize
    base = make_truth(truth_kind, **params)

    def censored(g):
        val, _ = integrate.quad(lambda s: g * math.exp(-g * s) * math.exp(-float(base.A0(np.array([s]))[0])),
                                0.0, np.inf, limit=200)
        return val - fraction
    return float(optimize.brentq(censored, 1e-8, 1e3, xtol=1e-14))


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]
