"""Parametric and nonparametric bootstrap for the homogeneous model.

Schemes
-------
``parametric_km_censoring``
    Lifetimes from ``alpha(., theta_hat)`` by inverting ``A``; censoring
    times from the Kaplan-Meier estimate of the censoring law. Mass left
    after the last censoring jump sits at infinity (never censors).
``parametric_fixed_censoring``
    Lifetimes as above, censoring times fixed at the user-supplied column.
``nonparametric_pairs``
    Resample the ``(x_i, delta_i)`` pairs with replacement.

Every replicate ``b`` draws from its own generator seeded by
``SeedSequence(seed, spawn_key=(b,))``, so results do not depend on the
order or the concurrency in which replicates run. Pseudo-times beyond the
horizon ``T`` are censored at ``T``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._defaults import DEFAULTS
from .dataset import SurvivalDataset, kaplan_meier
from .errors import ConvergenceError, LFSurvError, ValidationError
from .fit import _plan, estimate, fit_ml

SCHEMES = ("parametric_km_censoring", "parametric_fixed_censoring", "nonparametric_pairs")
_ALIASES = {"parametric": "parametric_km_censoring", "nonparametric": "nonparametric_pairs",
            "parametric_fixed": "parametric_fixed_censoring"}


def replicate_rng(seed, b):
    """Generator for replicate ``b`` of a run with master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(b),)))


class CensoringSampler:
    """Draw censoring times from a Kaplan-Meier censoring curve.

    The atoms are the curve's jump times with masses ``G(t-) - G(t)``; the
    remaining mass ``G(last)`` is placed at ``+inf``.
    """

    def __init__(self, G):
        vals = np.concatenate([[1.0], G.values])
        self.atoms = np.concatenate([G.jump_times, [np.inf]])
        mass = np.concatenate([-np.diff(vals), [vals[-1]]])
        self.cdf = np.cumsum(np.clip(mass, 0.0, None))
        self.cdf[-1] = 1.0

    @classmethod
    def from_dataset(cls, ds):
        return cls(kaplan_meier(ds, target="censoring"))

    def sample(self, rng, size):
        u = rng.random(size)
        return self.atoms[np.searchsorted(self.cdf, u, side="right").clip(max=self.atoms.size - 1)]


def _assemble(x0, c, T, z=None, censor=None):
    x = np.minimum(x0, c)
    delta = (x0 <= c).astype(np.int64)
    return SurvivalDataset(np.minimum(x, T), np.where(x > T, 0, delta), z, horizon=T,
                           censor_times=None if censor is None else np.minimum(censor, T))


def _normalise_scheme(scheme):
    scheme = _ALIASES.get(scheme.replace("-", "_"), scheme.replace("-", "_"))
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown bootstrap scheme {scheme!r}; choose from {SCHEMES}")
    return scheme


def draw_replicate(ds, fam, theta, scheme, rng, sampler=None):
    """One bootstrap dataset under ``scheme``."""
    n, T = ds.n, ds.horizon
    if scheme == "nonparametric_pairs":
        return ds.subset(rng.integers(0, n, n))
    x0 = fam.inverse_cumhaz(rng.standard_exponential(n), theta)
    if scheme == "parametric_km_censoring":
        c = sampler.sample(rng, n)
        return _assemble(x0, c, T)
    if ds.censor_times is None:
        raise ValidationError("parametric_fixed_censoring needs a full censoring-time column")
    return _assemble(x0, ds.censor_times, T)


@dataclass
class BootstrapRun:
    """Replicate estimates and their summary.

    ``replicates`` holds only the valid rows (``B - failures`` of them).
    """

    scheme: str
    B: int
    seed: int
    theta_hat: np.ndarray
    replicates: np.ndarray
    failures: int
    failed_indices: list
    param_names: tuple = ()
    n: int = 0
    studentized: Optional[np.ndarray] = None
    summary: dict = field(default_factory=dict)

    @property
    def B_valid(self):
        return self.replicates.shape[0]

    def covariance(self):
        if self.B_valid < 2:
            return None
        return np.atleast_2d(np.cov(self.replicates, rowvar=False, ddof=1))

    def to_dict(self):
        return {"scheme": self.scheme, "B": self.B, "seed": self.seed,
                "theta_hat": self.theta_hat.tolist(), "failures": self.failures,
                "failed_indices": list(self.failed_indices), "summary": self.summary}

    def to_csv(self, path):
        names = list(self.param_names) or [str(j) for j in range(self.replicates.shape[1])]
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(names) + "\n")
            for row in self.replicates:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def summarize(reps, theta_hat, n, levels=None, studentized=None, se_hat=None):
    """Mean, variance, covariance, ``n``-scaled covariance and percentile intervals."""
    levels = DEFAULTS["percentile_levels"] if levels is None else levels
    B = reps.shape[0]
    out = {"B_valid": int(B)}
    if B == 0:
        return out
    out["mean"] = reps.mean(axis=0).tolist()
    if B >= 2:
        cov = np.atleast_2d(np.cov(reps, rowvar=False, ddof=1))
        out["variance"] = np.diag(cov).tolist()
        out["covariance"] = cov.tolist()
        out["n_times_covariance"] = (n * cov).tolist()
    else:
        out["variance"] = None
        out["covariance"] = None
        out["n_times_covariance"] = None
    lo, hi = levels
    out["percentile_levels"] = [lo, hi]
    out["percentile_interval"] = np.quantile(reps, [lo, hi], axis=0).T.tolist()
    if studentized is not None and se_hat is not None and studentized.shape[0] >= 2:
        tq = np.quantile(studentized, [hi, lo], axis=0)
        out["bootstrap_t_interval"] = np.stack(
            [theta_hat - tq[0] * se_hat, theta_hat - tq[1] * se_hat], axis=1).tolist()
    return out


def bootstrap(ds, fam, fr, scheme="nonparametric_pairs", B=None, seed=None, w=None,
              workers=None, bootstrap_t=False):
    """Bootstrap distribution of ``theta_hat``.

    Parameters
    ----------
    ds : SurvivalDataset
    fam : HazardFamily
    fr : FitResult
        Converged fit of ``fam`` on ``ds`` (with the same weight ``w``).
    scheme : str
        One of :data:`SCHEMES` (``parametric`` and ``nonparametric`` are aliases).
    B : int
        Number of replicates (default 1000).
    seed : int
    w : weight plan, optional
        Applied to every replicate fit.
    workers : int, optional
        Thread count; results are identical for any value.
    bootstrap_t : bool
        Also refit covariances and return studentized replicates.

    Raises
    ------
    ValidationError
        Unknown scheme, ``B < 1`` or missing censoring times.
    ConvergenceError
        Every replicate failed.
    """
    scheme = _normalise_scheme(scheme)
    B = DEFAULTS["bootstrap_B"] if B is None else int(B)
    seed = DEFAULTS["bootstrap_seed"] if seed is None else int(seed)
    if B < 1:
        raise ValidationError("B must be at least 1")
    if not fr.converged:
        raise ConvergenceError("bootstrap needs a converged base fit")
    if scheme == "parametric_fixed_censoring" and ds.censor_times is None:
        raise ValidationError("parametric_fixed_censoring needs a full censoring-time column")
    theta = fr.theta_hat
    plan = _plan(w)
    sampler = CensoringSampler.from_dataset(ds) if scheme == "parametric_km_censoring" else None
    se_hat = np.sqrt(np.diag(fr.sandwich) / ds.n)

    def one(b):
        rng = replicate_rng(seed, b)
        try:
            dsb = draw_replicate(ds, fam, theta, scheme, rng, sampler)
            if bootstrap_t:
                frb = fit_ml(dsb, fam, plan, init=theta)
                return frb.theta_hat, (frb.theta_hat - theta) / np.sqrt(np.diag(frb.sandwich) / dsb.n)
            return estimate(dsb, fam, plan, init=theta), None
        except (LFSurvError, np.linalg.LinAlgError, FloatingPointError):
            return None, None

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(B)))
    else:
        results = [one(b) for b in range(B)]
    ok = [r[0] for r in results if r[0] is not None]
    failed = [b for b, r in enumerate(results) if r[0] is None]
    if not ok:
        raise ConvergenceError(f"all {B} bootstrap replicates failed",
                               trace=[{"failed_indices": failed}])
    reps = np.vstack(ok)
    stud = np.vstack([r[1] for r in results if r[0] is not None]) if bootstrap_t else None
    run = BootstrapRun(scheme=scheme, B=B, seed=seed, theta_hat=theta.copy(), replicates=reps,
                       failures=len(failed), failed_indices=failed,
                       param_names=tuple(fam.param_names), n=ds.n, studentized=stud)
    run.summary = summarize(reps, theta, ds.n, studentized=stud,
                            se_hat=se_hat if bootstrap_t else None)
    return run


@dataclass
class VarianceRatioResult:
    ratio: float
    var_pb: np.ndarray
    var_nb: np.ndarray
    n: int
    B: int
    reps: int
    seed: int


def variance_ratio_experiment(n=200, B=500, seed=0, reps=200, theta=1.0):
    """Compare the sampling variability of two bootstrap variance estimates.

    For each of ``reps`` outer samples of ``n`` uncensored exponential
    lifetimes, the variance of the exponential MLE is estimated by a
    parametric and by a nonparametric bootstrap (``B`` replicates each,
    sharing the outer sample). Returns ``Var(V_pb) / Var(V_nb)`` across outer
    samples.

    The exponential MLE ``n / sum(x)`` is evaluated in closed form, so the
    replicates are computed as whole arrays.
    """
    if reps < 2:
        raise ValidationError("variance ratio needs reps >= 2")
    if n < 2 or B < 2:
        raise ValidationError("variance ratio needs n >= 2 and B >= 2")
    root = np.random.SeedSequence(int(seed))
    vpb = np.empty(reps)
    vnb = np.empty(reps)
    for r, child in enumerate(root.spawn(reps)):
        s_data, s_pb, s_nb = child.spawn(3)
        x = np.random.default_rng(s_data).exponential(1.0 / theta, n)
        th = n / x.sum()
        xs = np.random.default_rng(s_pb).exponential(1.0 / th, (B, n))
        vpb[r] = np.var(n / xs.sum(axis=1), ddof=1)
        idx = np.random.default_rng(s_nb).integers(0, n, (B, n))
        vnb[r] = np.var(n / x[idx].sum(axis=1), ddof=1)
    ratio = float(np.var(vpb, ddof=1) / np.var(vnb, ddof=1))
    return VarianceRatioResult(ratio=ratio, var_pb=vpb, var_nb=vnb, n=n, B=B, reps=reps,
                               seed=int(seed))
