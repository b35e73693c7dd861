"""Proportional hazards regression with model-robust covariances.

Two modes share one result type:

``parametric``
    Hazard ``alpha(s, theta) exp(beta^T z)`` with a parametric baseline
    family, fitted by full likelihood over ``(theta, beta)``.
``semiparametric``
    Cox partial likelihood in ``beta`` with Breslow handling of tied event
    times (all tied events share one risk-set denominator).

In both modes ``K_hat = (1/n) sum L_i L_i^T`` from per-record score
contributions and ``sandwich = J^-1 K J^-1``; estimated covariances of the
estimates are ``sandwich / n`` and ``J^-1 / n``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, quadrature
from ._defaults import DEFAULTS
from .bootstrap import BootstrapRun, CensoringSampler, _assemble, replicate_rng, summarize
from .errors import (BoundaryError, ConvergenceError, LFSurvError, SeparationError,
                     ValidationError)
from .fit import _inv, fit_ml
from .influence import report_from_L
from .optimize import newton_maximize


@dataclass
class CoxFitResult:
    """Fitted proportional hazards model.

    ``params`` stacks ``(theta, beta)`` in parametric mode and is ``beta``
    in semiparametric mode; all matrices follow that ordering.
    """

    mode: str
    family: Optional[str]
    theta_hat: Optional[np.ndarray]
    beta_hat: np.ndarray
    n: int
    loglik: float
    J_hat: np.ndarray
    K_hat: np.ndarray
    sandwich: np.ndarray
    model_based_cov: np.ndarray
    L_vectors: np.ndarray = field(repr=False)
    converged: bool = True
    iterations: int = 0
    gradient_norm: float = 0.0
    trace: list = field(default_factory=list, repr=False)
    param_names: tuple = ()

    @property
    def params(self):
        if self.theta_hat is None:
            return self.beta_hat
        return np.concatenate([self.theta_hat, self.beta_hat])

    @property
    def robust_cov(self):
        return self.sandwich / self.n

    def to_dict(self, trace=True):
        d = {"mode": self.mode, "family": self.family,
             "theta_hat": None if self.theta_hat is None else self.theta_hat.tolist(),
             "beta_hat": self.beta_hat.tolist(), "param_names": list(self.param_names),
             "n": self.n, "loglik": self.loglik, "J_hat": self.J_hat.tolist(),
             "K_hat": self.K_hat.tolist(), "sandwich": self.sandwich.tolist(),
             "model_robust_cov": self.robust_cov.tolist(),
             "model_based_cov": self.model_based_cov.tolist(),
             "converged": self.converged, "iterations": self.iterations,
             "gradient_norm": self.gradient_norm}
        if trace:
            d["trace"] = self.trace
        return d


def _check_design(ds):
    if ds.q < 1:
        raise ValidationError("Cox regression needs at least one covariate column")
    const = np.flatnonzero(np.ptp(ds.z, axis=0) == 0)
    if const.size:
        raise ValidationError(f"covariate column(s) {const.tolist()} are constant")
    if ds.n_events == 0:
        raise BoundaryError("no events")


class _Diverged(Exception):
    pass


def _run_newton(evaluate, x0, in_domain, bound_slice, tol, max_iter):
    bound = DEFAULTS["cox_beta_bound"]

    def guarded(x):
        if np.linalg.norm(x[bound_slice]) > bound:
            raise _Diverged(x)
        return evaluate(x)

    try:
        return newton_maximize(guarded, x0, in_domain, tol=tol, max_iter=max_iter,
                               step_tol=1e-6)
    except _Diverged as exc:
        raise SeparationError(
            f"coefficients diverge (|beta| > {bound:g}); the likelihood is monotone, "
            "typically because a covariate separates the risk sets",
            trace=[{"x": np.asarray(exc.args[0]).tolist()}]) from None
    except ConvergenceError as exc:
        last = exc.trace[-1]["x"] if exc.trace else None
        if last is not None and np.linalg.norm(np.asarray(last)[bound_slice]) > 0.5 * bound:
            raise SeparationError(f"coefficients diverge: {exc}", trace=exc.trace) from None
        raise


# --------------------------------------------------------------------------
# parametric baseline


class ParametricCoxLikelihood:
    """Normalised log-likelihood of ``alpha(s, theta) exp(beta^T z)``."""

    def __init__(self, ds, fam):
        self.ds, self.fam = ds, fam
        self.p, self.q = fam.dim, ds.q
        self.ev = ds.delta > 0

    def split(self, params):
        return params[:self.p], params[self.p:]

    def in_domain(self, params):
        return self.fam.in_domain(params[:self.p]) and bool(np.all(np.isfinite(params)))

    def pieces(self, params):
        th, b = self.split(params)
        ds, fam = self.ds, self.fam
        r = np.exp(ds.z @ b)
        A = fam.cumhaz(ds.x, th)
        Ad = fam.cumhaz_grad(ds.x, th)
        return th, b, r, A, Ad

    def value(self, params):
        th, b, r, A, _ = self.pieces(params)
        ds = self.ds
        ev = self.ev
        v = np.sum(self.fam.log_alpha(ds.x[ev], th) + ds.z[ev] @ b) - np.sum(r * A)
        return float(v) / ds.n

    def L(self, params):
        th, b, r, A, Ad = self.pieces(params)
        ds = self.ds
        Lt = -r[:, None] * Ad
        if self.ev.any():
            Lt[self.ev] += self.fam.psi(ds.x[self.ev], th)
        Lb = ds.z * (ds.delta - r * A)[:, None]
        return np.hstack([Lt, Lb])

    def hessian(self, params):
        th, b, r, A, Ad = self.pieces(params)
        ds, fam, p = self.ds, self.fam, self.p
        Ah = fam.cumhaz_hess(ds.x, th)
        H = np.zeros((p + self.q, p + self.q))
        Htt = -np.einsum("i,ijk->jk", r, Ah)
        if self.ev.any():
            Htt += fam.dpsi(ds.x[self.ev], th).sum(axis=0)
        Htb = -(r[:, None] * Ad).T @ ds.z
        Hbb = -(ds.z * (r * A)[:, None]).T @ ds.z
        H[:p, :p], H[:p, p:], H[p:, :p], H[p:, p:] = Htt, Htb, Htb.T, Hbb
        H /= ds.n
        return 0.5 * (H + H.T)

    def evaluate(self, params):
        if not self.in_domain(params):
            return -np.inf, np.full(params.size, np.nan), np.full((params.size,) * 2, np.nan)
        with np.errstate(all="ignore"):
            return (self.value(params), self.L(params).sum(axis=0) / self.ds.n,
                    self.hessian(params))


def fit_cox_parametric(ds, fam, init=None, tol=None, max_iter=None):
    """Fit ``alpha(s, theta) exp(beta^T z)`` by maximum likelihood.

    Parameters
    ----------
    ds : SurvivalDataset
        Must have at least one non-constant covariate column.
    fam : HazardFamily
        Baseline family.
    init : array_like, optional
        Start for ``(theta, beta)``; defaults to the homogeneous fit and
        ``beta = 0``.

    Raises
    ------
    ValidationError
        No covariates or a constant covariate column.
    SingularMatrixError
        Collinear covariates.
    SeparationError, ConvergenceError
    """
    _check_design(ds)
    lik = ParametricCoxLikelihood(ds, fam)
    if init is None:
        try:
            th0 = fit_ml(ds, fam).theta_hat
        except LFSurvError:
            th0 = fam.default_init(ds)
        init = np.concatenate([th0, np.zeros(ds.q)])
    init = np.asarray(init, dtype=np.float64)
    res = _run_newton(lik.evaluate, init, lik.in_domain, slice(fam.dim, None), tol, max_iter)
    params = res.x
    J = -lik.hessian(params)
    Ji = _inv(J, "J_hat (collinear covariates?)")
    L = lik.L(params)
    K = L.T @ L / ds.n
    S = Ji @ K @ Ji
    names = tuple(fam.param_names) + tuple(f"beta{j + 1}" for j in range(ds.q))
    return CoxFitResult(mode="parametric", family=fam.name, theta_hat=params[:fam.dim],
                        beta_hat=params[fam.dim:], n=ds.n, loglik=res.value, J_hat=J,
                        K_hat=0.5 * (K + K.T), sandwich=0.5 * (S + S.T),
                        model_based_cov=Ji / ds.n, L_vectors=L, converged=res.converged,
                        iterations=res.iterations, gradient_norm=res.grad_norm,
                        trace=res.trace, param_names=names)


def parametric_j_blocks(ds, fam, theta, beta):
    """Information blocks from the risk-set averages ``Q0, Q1, Q2`` by quadrature.

    ``J11 = int Q0 psi psi^T alpha ds - int dpsi {dG0 - Q0 alpha ds}``,
    ``J12 = int psi Q1^T alpha ds``, ``J22 = int Q2 alpha ds`` with
    ``Q_k(s) = (1/n) sum_i Y_i(s) exp(beta^T z_i) z_i^{(k)}`` and
    ``G0 = N / n``. Independent of the closed-form cumulative hazards.
    """
    theta = fam.check(theta)
    beta = np.asarray(beta, dtype=np.float64)
    n, p, q = ds.n, fam.dim, ds.q
    r = np.exp(ds.z @ beta)
    # reverse cumulative sums give risk-set totals at each sorted record
    S0 = np.cumsum(r[::-1])[::-1] / n
    S1 = np.cumsum((r[:, None] * ds.z)[::-1], axis=0)[::-1] / n
    S2 = np.cumsum((r[:, None, None] * ds.z[:, :, None] * ds.z[:, None, :])[::-1],
                   axis=0)[::-1] / n
    x = ds.x

    def Q(s):
        k = np.searchsorted(x, s, side="left")
        k = np.minimum(k, n - 1)
        inside = np.searchsorted(x, s, side="left") < n
        return (np.where(inside, S0[k], 0.0), S1[k] * inside[:, None],
                S2[k] * inside[:, None, None])

    def f(s):
        q0, q1, q2 = Q(s)
        ps = fam.psi(s, theta)
        a = fam.alpha(s, theta)
        blk = np.zeros((s.size, p + q, p + q))
        blk[:, :p, :p] = ((ps[:, :, None] * ps[:, None, :] + fam.dpsi(s, theta))
                          * (q0 * a)[:, None, None])
        blk[:, :p, p:] = ps[:, :, None] * q1[:, None, :] * a[:, None, None]
        blk[:, p:, :p] = np.transpose(blk[:, :p, p:], (0, 2, 1))
        blk[:, p:, p:] = q2 * a[:, None, None]
        return blk

    b = fam.breakpoints
    P = np.unique(np.concatenate([[0.0], x, b[(b > 0) & (b < x.max())]]))
    J = quadrature.integrate(f, P)
    ev = ds.delta > 0
    J[:p, :p] -= fam.dpsi(x[ev], theta).sum(axis=0) / n
    return 0.5 * (J + J.T)


# --------------------------------------------------------------------------
# partial likelihood


class PartialLikelihood:
    """Breslow partial likelihood, normalised by ``n``."""

    def __init__(self, ds):
        self.ds = ds
        self.x = np.ascontiguousarray(ds.x)
        self.delta = np.ascontiguousarray(ds.delta)
        self.Z = np.ascontiguousarray(ds.z)

    def raw(self, beta):
        """Unnormalised ``(log L, score, information)``."""
        eta = np.ascontiguousarray(self.Z @ beta)
        ll, sc, info = _kernels.cox_breslow(self.x, self.delta, self.Z, eta)
        return float(ll), np.asarray(sc), np.asarray(info)

    def evaluate(self, beta):
        n = self.ds.n
        ll, sc, info = self.raw(beta)
        return ll / n, sc / n, -info / n

    def L(self, beta):
        eta = np.ascontiguousarray(self.Z @ beta)
        return np.asarray(_kernels.cox_residuals(self.x, self.delta, self.Z, eta))


def partial_loglik(ds, beta):
    """Unnormalised Breslow partial log-likelihood, score and information."""
    return PartialLikelihood(ds).raw(np.asarray(beta, dtype=np.float64))


def fit_cox_partial(ds, init=None, tol=None, max_iter=None):
    """Maximise the Cox partial likelihood.

    ``J_hat = (1/n) sum_events {S2/S0 - E E^T}`` and ``K_hat = (1/n) sum L_i L_i^T``
    with ``L_i = sum_k (z_i - E_k) (dN_i(t_k) - Y_i(t_k) exp(beta^T z_i) d_k / S0_k)``.

    Raises
    ------
    ValidationError
        No covariates, or a constant column.
    SeparationError
        ``|beta|`` exceeds the divergence bound (default 50).
    """
    _check_design(ds)
    lik = PartialLikelihood(ds)
    x0 = np.zeros(ds.q) if init is None else np.asarray(init, dtype=np.float64)
    res = _run_newton(lik.evaluate, x0, lambda b: bool(np.all(np.isfinite(b))),
                      slice(None), tol, max_iter)
    beta = res.x
    J = -res.hess
    J = 0.5 * (J + J.T)
    Ji = _inv(J, "J_hat (collinear covariates?)")
    L = lik.L(beta)
    K = L.T @ L / ds.n
    S = Ji @ K @ Ji
    names = tuple(f"beta{j + 1}" for j in range(ds.q))
    return CoxFitResult(mode="semiparametric", family=None, theta_hat=None, beta_hat=beta,
                        n=ds.n, loglik=res.value * ds.n, J_hat=J, K_hat=0.5 * (K + K.T),
                        sandwich=0.5 * (S + S.T), model_based_cov=Ji / ds.n, L_vectors=L,
                        converged=res.converged, iterations=res.iterations,
                        gradient_norm=res.grad_norm, trace=res.trace, param_names=names)


def cox_influence(fit, ds):
    """Empirical influence ``I_i = J^-1 L_i`` for either Cox mode."""
    if not fit.converged:
        raise ConvergenceError("influence needs a converged fit")
    return report_from_L(fit.L_vectors, fit.J_hat, ds.ids, fit.param_names)


# --------------------------------------------------------------------------
# regression bootstrap

COX_SCHEMES = ("scheme1_parametric", "scheme2_triplets")


def cox_bootstrap(ds, fit, scheme="scheme2_triplets", B=None, seed=None, fam=None,
                  workers=None):
    """Bootstrap a Cox fit.

    ``scheme1_parametric`` keeps every ``z_i``, draws lifetimes from
    ``alpha(s, theta_hat) exp(beta_hat^T z_i)`` and censoring times from the
    Kaplan-Meier censoring curve; it needs a parametric fit and its family.
    ``scheme2_triplets`` resamples ``(x, delta, z)`` with replacement.
    Replicates are refitted in the mode of ``fit``; failed refits (for
    example a resample with a constant covariate) are counted and skipped.
    """
    scheme = scheme.replace("-", "_")
    if scheme in ("scheme1", "1"):
        scheme = "scheme1_parametric"
    if scheme in ("scheme2", "2"):
        scheme = "scheme2_triplets"
    if scheme not in COX_SCHEMES:
        raise ValidationError(f"unknown Cox bootstrap scheme {scheme!r}")
    if scheme == "scheme1_parametric" and fit.mode != "parametric":
        raise ValidationError("scheme1_parametric needs a parametric Cox fit")
    if fit.mode == "parametric" and fam is None:
        raise ValidationError("parametric Cox bootstrap needs the baseline family")
    B = DEFAULTS["bootstrap_B"] if B is None else int(B)
    seed = DEFAULTS["bootstrap_seed"] if seed is None else int(seed)
    if B < 1:
        raise ValidationError("B must be at least 1")
    base = fit.params
    sampler = CensoringSampler.from_dataset(ds) if scheme == "scheme1_parametric" else None

    def refit(d):
        if fit.mode == "parametric":
            return fit_cox_parametric(d, fam, init=base).params
        return fit_cox_partial(d, init=base).params

    def one(b):
        rng = replicate_rng(seed, b)
        try:
            if scheme == "scheme2_triplets":
                d = ds.subset(rng.integers(0, ds.n, ds.n))
            else:
                r = np.exp(ds.z @ fit.beta_hat)
                x0 = fam.inverse_cumhaz(rng.standard_exponential(ds.n) / r, fit.theta_hat)
                d = _assemble(x0, sampler.sample(rng, ds.n), ds.horizon, z=ds.z)
            return refit(d)
        except (LFSurvError, np.linalg.LinAlgError):
            return None

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(B)))
    else:
        results = [one(b) for b in range(B)]
    ok = [r for r in results if r is not None]
    failed = [b for b, r in enumerate(results) if r is None]
    if not ok:
        raise ConvergenceError(f"all {B} bootstrap replicates failed")
    reps = np.vstack(ok)
    run = BootstrapRun(scheme=scheme, B=B, seed=seed, theta_hat=base.copy(), replicates=reps,
                       failures=len(failed), failed_indices=failed,
                       param_names=fit.param_names, n=ds.n)
    run.summary = summarize(reps, base, ds.n)
    return run
