"""Weighted maximum likelihood for censored data with model-robust covariances.

For a dataset with counting process ``N`` and at-risk process ``Y`` and a
weight ``W``, the normalised weighted log-likelihood is

    l_n(theta) = (1/n) int_0^T W {log alpha(s, theta) dN(s) - Y(s) alpha(s, theta) ds}
               = (1/n) sum_i [delta_i W(x_i) log alpha(x_i) - int_0^{x_i} W alpha ds].

Its maximiser estimates the least-false parameter. ``J_hat`` is the
negative Hessian of ``l_n`` and ``K_hat`` the empirical covariance of the
per-record score contributions

    L_i = W(x_i) psi(x_i) delta_i - int_0^{x_i} W psi alpha ds,

so that ``sandwich = J^-1 K J^-1`` estimates ``n Var(theta_hat)`` whether or
not the family contains the truth. Covariance estimates of ``theta_hat``
itself are ``sandwich / n`` (model-robust) and ``J^-1 / n`` (model-based).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels, quadrature
from ._defaults import DEFAULTS
from ._oracle import distance_parts, minimise_distance
from .errors import BoundaryError, ConvergenceError, SingularMatrixError, ValidationError
from .families import _as_weight
from .optimize import newton_maximize
from .weights import SmoothWeight, StepWeight, WeightPlan


def _plan(w):
    if w is None:
        return WeightPlan("unit")
    if isinstance(w, str):
        return WeightPlan(w)
    if isinstance(w, (StepWeight, SmoothWeight)):
        return WeightPlan("custom", custom=w)
    return w


class WeightedLikelihood:
    """Per-record pieces of the weighted log-likelihood for one dataset.

    Parameters
    ----------
    ds : SurvivalDataset
    fam : HazardFamily
    weight : WeightPlan, StepWeight, SmoothWeight or None
    """

    def __init__(self, ds, fam, weight=None):
        self.ds = ds
        self.fam = fam
        self.plan = _plan(weight)
        self.w = self.plan.resolve(ds)
        self.x = ds.x
        self.n = ds.n
        ev = ds.delta > 0
        self.ev = ev
        self.wx = self.w(ds.x)
        self.ev_w = self.wx[ev]
        self.ev_x = ds.x[ev]
        self._step = isinstance(self.w, StepWeight)
        self._unit = self._step and self.w.is_unit()
        if not self._step:
            self._setup_smooth()

    # cumulative weighted integrals per record ----------------------------
    def _cum_step(self, F, theta):
        """``int_0^{x_i} W dF`` for the family cumulative ``F``."""
        Fx = F(self.x, theta)
        shape = Fx.shape[1:]
        Fx2 = Fx.reshape(self.n, -1)
        if self._unit:
            return Fx
        Fk = F(self.w.knots, theta).reshape(self.w.knots.size, -1)
        out = _kernels.step_cumulative(self.x, self.w.knots, self.w.values, Fk, Fx2)
        return np.asarray(out).reshape((self.n,) + shape)

    def _setup_smooth(self):
        w = self.w
        lo, hi = w.support
        pts = np.concatenate([[0.0], self.x, np.asarray(w.breakpoints, float),
                              self.fam.breakpoints, [lo, hi]])
        pts = pts[np.isfinite(pts) & (pts >= 0) & (pts <= self.x.max())]
        self._cells = np.unique(np.concatenate([[0.0], pts]))
        self._rec_cell = np.searchsorted(self._cells, self.x)

    def _cum_smooth(self, g, theta):
        from .families import _integrand
        f = _integrand(self.fam, theta, g)
        w = self.w
        a, b = self._cells[:-1], self._cells[1:]
        lo, hi = w.support
        a2, b2 = np.clip(a, lo, hi), np.clip(b, lo, hi)

        def wf(s):
            v = np.asarray(f(s), dtype=np.float64)
            return w(s).reshape((-1,) + (1,) * (v.ndim - 1)) * v

        cells = quadrature.integrate_many(wf, a2, b2)
        cum = np.concatenate([np.zeros((1,) + cells.shape[1:]), np.cumsum(cells, axis=0)])
        return cum[self._rec_cell]

    def cumulative(self, which, theta):
        """Per-record ``int_0^{x_i} W g``; ``which`` in ``alpha``, ``psi_alpha``, ``hess_alpha``."""
        if self._step:
            F = {"alpha": self.fam.cumhaz, "psi_alpha": self.fam.cumhaz_grad,
                 "hess_alpha": self.fam.cumhaz_hess}[which]
            return self._cum_step(F, theta)
        return self._cum_smooth(which, theta)

    # likelihood pieces ----------------------------------------------------
    def value(self, theta):
        ev = np.sum(self.ev_w * self.fam.log_alpha(self.ev_x, theta)) if self.ev_x.size else 0.0
        return float(ev - np.sum(self.cumulative("alpha", theta))) / self.n

    def score(self, theta):
        return self.L(theta).sum(axis=0) / self.n

    def hessian(self, theta):
        p = self.fam.dim
        ev = np.zeros((p, p))
        if self.ev_x.size:
            ev = np.einsum("k,kij->ij", self.ev_w, self.fam.dpsi(self.ev_x, theta))
        H = (ev - self.cumulative("hess_alpha", theta).sum(axis=0)) / self.n
        return 0.5 * (H + H.T)

    def L(self, theta):
        """Per-record score contributions, ``(n, p)``."""
        out = -self.cumulative("psi_alpha", theta)
        if self.ev_x.size:
            out[self.ev] += self.ev_w[:, None] * self.fam.psi(self.ev_x, theta)
        return out

    def evaluate(self, theta):
        if not self.fam.in_domain(theta):
            return -np.inf, np.full(self.fam.dim, np.nan), np.full((self.fam.dim,) * 2, np.nan)
        with np.errstate(all="ignore"):
            return self.value(theta), self.score(theta), self.hessian(theta)


def log_likelihood(ds, fam, theta, w=None):
    """Normalised weighted log-likelihood ``(1/n) log L_n``."""
    theta = fam.check(theta)
    return WeightedLikelihood(ds, fam, w).value(theta)


def score(ds, fam, theta, w=None):
    """Gradient of :func:`log_likelihood`."""
    theta = fam.check(theta)
    return WeightedLikelihood(ds, fam, w).score(theta)


def hessian(ds, fam, theta, w=None):
    """Hessian of :func:`log_likelihood` (the negative of ``J_hat``)."""
    theta = fam.check(theta)
    return WeightedLikelihood(ds, fam, w).hessian(theta)


@dataclass
class FitResult:
    """Maximum (weighted) likelihood fit and its covariance estimates.

    ``sandwich`` is ``J^-1 K J^-1`` on the root-n scale; the estimated
    covariance of ``theta_hat`` is ``sandwich / n``. ``model_based_cov`` is
    ``J^-1 / n``.
    """

    family: str
    param_names: tuple
    weight: str
    n: int
    theta_hat: np.ndarray
    loglik: float
    J_hat: np.ndarray
    K_hat: np.ndarray
    sandwich: np.ndarray
    model_based_cov: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    L_vectors: np.ndarray = field(repr=False)
    trace: list = field(default_factory=list, repr=False)
    family_config: dict = field(default_factory=dict)

    @property
    def robust_cov(self):
        return self.sandwich / self.n

    @property
    def target(self):
        if self.weight == "unit":
            return "least-false parameter (unit weight)"
        return f"least-false parameter under {self.weight} weighting"

    def to_dict(self, trace=True):
        d = {
            "family": self.family,
            "family_config": self.family_config,
            "param_names": list(self.param_names),
            "weight": self.weight,
            "target": self.target,
            "n": self.n,
            "theta_hat": self.theta_hat.tolist(),
            "loglik": self.loglik,
            "J_hat": self.J_hat.tolist(),
            "K_hat": self.K_hat.tolist(),
            "sandwich": self.sandwich.tolist(),
            "model_robust_cov": self.robust_cov.tolist(),
            "model_based_cov": self.model_based_cov.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
        }
        if trace:
            d["trace"] = self.trace
        return d


def _inv(M, what):
    try:
        c = np.linalg.cond(M)
    except np.linalg.LinAlgError:
        c = np.inf
    if not np.isfinite(c) or c > 1e14:
        raise SingularMatrixError(f"{what} is singular (condition number {c:.3g})")
    Mi = np.linalg.inv(M)
    return 0.5 * (Mi + Mi.T)


def _check_events(lik):
    if lik.ds.n_events == 0:
        raise BoundaryError("no events: the likelihood is maximised on the boundary")
    if not np.any(lik.ev_w > 0):
        raise BoundaryError("no events carry positive weight")
    fam = lik.fam
    if fam.name == "piecewise_constant":
        d = np.bincount(fam._segment(lik.ev_x[lik.ev_w > 0]), minlength=fam.dim)
        empty = np.flatnonzero(d == 0)
        if empty.size:
            raise BoundaryError(f"pieces {empty.tolist()} hold no weighted events; "
                                "their rates are not estimable (MLE at 0)")


def _init(ds, fam, lik, init):
    if init is not None:
        return fam.check(init)
    guess = fam.default_init(ds)
    if fam.name == "exponential" and not lik._unit:
        # weighted occurrence / exposure ratio is the exact maximiser
        denom = float(np.sum(lik.cumulative("psi_alpha", guess)))
        num = float(np.sum(lik.ev_w))
        if denom > 0 and num > 0:
            guess = np.array([num / denom])
    if fam.name == "piecewise_constant" and not lik._unit:
        Ad = lik.cumulative("psi_alpha", np.ones(fam.dim)).sum(axis=0)
        num = np.bincount(fam._segment(lik.ev_x), weights=lik.ev_w, minlength=fam.dim)
        guess = np.where((Ad > 0) & (num > 0), num / np.where(Ad > 0, Ad, 1.0), guess)
    return guess


def estimate(ds, fam, w=None, init=None, tol=None, max_iter=None):
    """Point estimate only (no covariance work); raises on failure."""
    lik = WeightedLikelihood(ds, fam, w)
    _check_events(lik)
    res = newton_maximize(lik.evaluate, _init(ds, fam, lik, init), fam.in_domain,
                          tol=tol, max_iter=max_iter)
    return res.x


def fit_ml(ds, fam, w=None, init=None, tol=None, max_iter=None, k_formula="per_record_form"):
    """Maximise the weighted log-likelihood and estimate J, K and the sandwich.

    Parameters
    ----------
    ds : SurvivalDataset
    fam : HazardFamily
    w : WeightPlan, str, StepWeight or SmoothWeight, optional
        Likelihood weight, unit by default.
    init : array_like, optional
        Starting value; defaults to a family-specific guess.
    tol : float, optional
        Gradient-norm tolerance (default ``1e-9``).
    max_iter : int, optional
    k_formula : str
        Which ``K_hat`` expression to report; see :func:`k_hat`.

    Returns
    -------
    FitResult

    Raises
    ------
    BoundaryError
        No (positively weighted) events.
    ConvergenceError
        Newton failed; the exception carries the trace.
    SingularMatrixError
        ``J_hat`` is singular.
    """
    lik = WeightedLikelihood(ds, fam, w)
    _check_events(lik)
    tol = DEFAULTS["newton_tol"] if tol is None else tol
    res = newton_maximize(lik.evaluate, _init(ds, fam, lik, init), fam.in_domain,
                          tol=tol, max_iter=max_iter)
    theta = res.x
    J = -lik.hessian(theta)
    Ji = _inv(J, "J_hat")
    L = lik.L(theta)
    if k_formula in ("per_record_form", "per_record"):
        K = L.T @ L / ds.n
    else:
        K = k_hat(ds, fam, theta, lik.plan, formula=k_formula)
    K = 0.5 * (K + K.T)
    S = Ji @ K @ Ji
    S = 0.5 * (S + S.T)
    return FitResult(
        family=fam.name, param_names=tuple(fam.param_names), weight=lik.plan.description,
        n=ds.n, theta_hat=theta, loglik=res.value, J_hat=J, K_hat=K, sandwich=S,
        model_based_cov=Ji / ds.n, converged=res.converged, iterations=res.iterations,
        gradient_norm=res.grad_norm, L_vectors=L, trace=res.trace,
        family_config=fam.config())


# --------------------------------------------------------------------------
# the three K_hat expressions


def _partition(ds, fam, T):
    b = fam.breakpoints
    pts = np.concatenate([[0.0, T], ds.x, b[(b > 0) & (b < T)]])
    return np.unique(pts[pts <= T])


def _cumulative_at(f, P, cell_weight, nodes):
    """``int_0^t c(s) f(s) ds`` at ``nodes``, ``c`` constant on the cells of ``P``."""
    cells = quadrature.integrate_many(f, P[:-1], P[1:])
    cells = cells * cell_weight.reshape((-1,) + (1,) * (cells.ndim - 1))
    cum = np.concatenate([np.zeros((1,) + cells.shape[1:]), np.cumsum(cells, axis=0)])

    def at(t):
        k = np.clip(np.searchsorted(P, t, side="left"), 1, P.size - 1)
        part = quadrature.integrate_many(f, P[k - 1], t)
        part = part * cell_weight[k - 1].reshape((-1,) + (1,) * (part.ndim - 1))
        return cum[k - 1] + part
    return at


def k_hat(ds, fam, theta, w=None, formula="per_record_form"):
    """Estimate ``K`` by one of three algebraically equivalent expressions.

    Parameters
    ----------
    formula : str
        ``per_record_form``: ``(1/n) sum L_i L_i^T``.
        ``integral_form``: ``(1/n) int psi psi^T dN
        + int (psi E^T + E psi^T) alpha dt`` with
        ``E(t) = (1/n) int_0^t psi {dN - Y alpha ds}``.
        ``double_integral_form``: ``(1/n) int psi psi^T dN - int_0^T int_0^t
        (psi(s) psi(t)^T + psi(t) psi(s)^T) alpha(s) ds {dN(t) - Y(t) alpha(t) dt} / n``.

    Notes
    -----
    The two integral expressions exist only for unit weights; they are
    evaluated by nested adaptive quadrature without using the closed-form
    ``A^d``, so they provide an independent check of the per-record form.
    """
    theta = fam.check(theta)
    plan = _plan(w)
    if formula in ("per_record_form", "per_record"):
        L = WeightedLikelihood(ds, fam, plan).L(theta)
        return L.T @ L / ds.n
    if formula not in ("integral_form", "double_integral_form"):
        raise ValidationError(f"unknown K formula {formula!r}")
    if not plan.is_unit:
        raise ValidationError(f"{formula} is only defined for unit weights; "
                              "use per_record_form")
    n, p = ds.n, fam.dim
    T = ds.horizon
    P = _partition(ds, fam, T)
    ev = ds.delta > 0
    xe = ds.x[ev]
    pe = fam.psi(xe, theta)
    first = pe.T @ pe / n

    def psi_alpha(s):
        return fam.psi(s, theta) * fam.alpha(s, theta)[:, None]

    ones = np.ones(P.size - 1)
    if formula == "integral_form":
        Ycell = ds.at_risk(P[1:])
        inner = _cumulative_at(psi_alpha, P, Ycell / n, None)
        cum_jump = np.concatenate([np.zeros((1, p)), np.cumsum(pe, axis=0) / n])

        def E(t):
            jumps = cum_jump[np.searchsorted(xe, t, side="right")]
            return jumps - inner(t)

        def outer(t):
            ps = fam.psi(t, theta)
            Et = E(t)
            a = fam.alpha(t, theta)[:, None, None]
            return (ps[:, :, None] * Et[:, None, :] + Et[:, :, None] * ps[:, None, :]) * a

        second = quadrature.integrate(outer, P)
        return first + second

    G = _cumulative_at(psi_alpha, P, ones, None)

    def M(t):
        ps = fam.psi(t, theta)
        g = G(t)
        return ps[:, :, None] * g[:, None, :] + g[:, :, None] * ps[:, None, :]

    jump_part = M(xe).sum(axis=0) / n if xe.size else np.zeros((p, p))

    def comp(t):
        y = ds.at_risk(t) / n
        return M(t) * (y * fam.alpha(t, theta))[:, None, None]

    comp_part = quadrature.integrate(comp, P)
    return first - (jump_part - comp_part)


def j_hat(ds, fam, theta, w=None, method="closed_form"):
    """``J_hat`` as the negative Hessian, or by quadrature of its integral form.

    ``method="quadrature"`` evaluates ``(1/n) int W Y psi psi^T alpha ds
    - (1/n) int W dpsi {dN - Y alpha ds}`` directly.
    """
    theta = fam.check(theta)
    lik = WeightedLikelihood(ds, fam, w)
    if method == "closed_form":
        return -lik.hessian(theta)
    if method != "quadrature":
        raise ValidationError(f"unknown method {method!r}")
    n = ds.n
    wf = lik.w
    T = ds.x.max()
    P = _partition(ds, fam, T)
    if isinstance(wf, StepWeight):
        P = np.unique(np.concatenate([P, wf.knots[(wf.knots > 0) & (wf.knots < T)]]))
    else:
        P = np.unique(np.concatenate([P, [b for b in wf.support if 0 < b < T]]))

    def f(s):
        ps = fam.psi(s, theta)
        a = fam.alpha(s, theta)[:, None, None]
        y = ds.at_risk(s) * wf(s) / n
        return y[:, None, None] * (ps[:, :, None] * ps[:, None, :] + fam.dpsi(s, theta)) * a

    cont = quadrature.integrate(f, P)
    jumps = np.einsum("k,kij->ij", lik.ev_w, fam.dpsi(lik.ev_x, theta)) / n
    J = cont - jumps
    return 0.5 * (J + J.T)


def j_model(fam, theta, censor_survival, T, breaks=()):
    """Information ``int_0^T exp(-A) G psi psi^T alpha ds`` of the fitted model.

    This is the limit of ``n Var`` under parametric resampling from
    ``alpha(., theta)`` with censoring survival ``censor_survival``.
    """
    theta = fam.check(theta)

    def f(s):
        ps = fam.psi(s, theta)
        y = np.exp(-fam.cumhaz(s, theta)) * censor_survival(s)
        return (y * fam.alpha(s, theta))[:, None, None] * ps[:, :, None] * ps[:, None, :]

    b = np.concatenate([np.asarray(breaks, float), fam.breakpoints])
    P = np.unique(np.concatenate([[0.0, T], b[(b > 0) & (b < T)]]))
    return quadrature.integrate(f, P)


# --------------------------------------------------------------------------
# confidence regions


@dataclass
class ConfidenceRegion:
    """Ellipsoid ``{theta : (theta - c)^T M (theta - c) <= radius2}`` plus marginal intervals."""

    center: np.ndarray
    shape: np.ndarray
    radius2: float
    level: float
    mode: str
    lower: np.ndarray
    upper: np.ndarray

    def contains(self, theta):
        d = np.asarray(theta, dtype=np.float64) - self.center
        return bool(d @ self.shape @ d <= self.radius2)

    def covers(self, theta, coordinate=None):
        """Marginal interval coverage (all coordinates, or one)."""
        t = np.asarray(theta, dtype=np.float64)
        ok = (self.lower <= t) & (t <= self.upper)
        return bool(ok.all() if coordinate is None else ok[coordinate])

    def to_dict(self):
        return {"mode": self.mode, "level": self.level, "center": self.center.tolist(),
                "shape": self.shape.tolist(), "radius2": self.radius2,
                "lower": self.lower.tolist(), "upper": self.upper.tolist()}


def confidence_region(fr, level=0.90, mode="model_robust"):
    """Asymptotic confidence region for the least-false parameter.

    ``model_robust`` uses ``n (theta - theta_hat)^T J K^-1 J (theta - theta_hat)
    <= chi2_p(level)`` and marginal intervals from ``sandwich / n``;
    ``model_based`` replaces ``J K^-1 J`` by ``J``.
    """
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    p = fr.theta_hat.size
    if mode == "model_robust":
        Ki = _inv(fr.K_hat, "K_hat")
        M = fr.J_hat @ Ki @ fr.J_hat
        cov = fr.sandwich / fr.n
    elif mode == "model_based":
        M = fr.J_hat
        cov = fr.model_based_cov
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    z = stats.norm.ppf(0.5 + level / 2.0)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return ConfidenceRegion(center=fr.theta_hat.copy(), shape=fr.n * M,
                            radius2=float(stats.chi2.ppf(level, p)), level=level, mode=mode,
                            lower=fr.theta_hat - z * se, upper=fr.theta_hat + z * se)


# --------------------------------------------------------------------------
# least-false oracle


@dataclass
class OracleResult:
    theta0: np.ndarray
    distance: float
    hessian: np.ndarray
    converged: bool


def least_false_oracle(fam, true_hazard, y, T, weight=None, init=None, breaks=()):
    """Minimise the weighted hazard distance to an analytically given truth.

    Parameters
    ----------
    fam : HazardFamily
    true_hazard : callable
        ``s -> alpha(s)``.
    y : callable
        ``s -> y(s) = F[s, inf) G[s, inf)``.
    T : float
    weight : StepWeight, SmoothWeight or callable, optional
        Population weight ``w(s)`` (for example ``1 / G[s, inf)``).

    Returns
    -------
    OracleResult
        ``theta0`` minimises ``int w y {a (log a - log a_theta) - (a - a_theta)} ds``.
    """
    th, d, H, conv = minimise_distance(fam, true_hazard, y, T, weight, init, breaks)
    return OracleResult(theta0=th, distance=d, hessian=H, converged=conv)
