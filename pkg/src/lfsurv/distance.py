"""Distances between true and model hazards, and least-false targets.

The truth is given analytically by a :class:`TruthSpec`. The hazard
distance

    d[a, a_theta] = int_0^T w y {a (log a - log a_theta) - (a - a_theta)} ds,

with ``y(s) = F[s, inf) G[s, inf)``, is nonnegative pointwise and vanishes
only when the hazards agree. Without censoring it differs from the
Kullback-Leibler divergence of the densities on ``[0, T]`` by the boundary
term ``exp(-A(T)) {A(T) - A_theta(T)}``. For proportional hazards two
versions are provided: the covariate-averaged hazard distance, minimised by
the parametric fit, and the risk-set distance minimised by the partial
likelihood.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from . import quadrature
from ._oracle import distance_parts
from .errors import ValidationError
from .families import HazardFamily


@dataclass(frozen=True)
class CovariateLaw:
    """Finite-support covariate distribution."""

    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        pr = np.asarray(self.probs, dtype=np.float64).ravel()
        if pts.shape[0] == 0:
            raise ValidationError("covariate law has empty support")
        if pr.shape[0] != pts.shape[0] or np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-12:
            raise ValidationError("covariate probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)

    def sample(self, rng, n):
        return self.points[rng.choice(self.probs.size, size=n, p=self.probs)]


@dataclass(frozen=True)
class TruthSpec:
    """Analytically specified data-generating law.

    Attributes
    ----------
    alpha0, A0 : callable
        True (baseline) hazard and its integral.
    censor_survival : callable
        ``s -> G[s, inf)``.
    A0_inverse : callable, optional
        ``u -> t`` with ``A0(t) = u``; bisection is used when absent.
    censor_sample : callable, optional
        ``(rng, n) -> censoring times``.
    h0 : callable, optional
        Relative risk ``z -> h0(z)`` (rows of a 2-d array).
    covariate_law : CovariateLaw, optional
    name : str
    params : dict
        Parameters recorded in reports.
    """

    alpha0: Callable
    A0: Callable
    censor_survival: Callable
    A0_inverse: Optional[Callable] = None
    censor_sample: Optional[Callable] = None
    h0: Optional[Callable] = None
    covariate_law: Optional[CovariateLaw] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    uncensored: bool = False

    def survival(self, s):
        return np.exp(-self.A0(s))

    def y(self, s):
        return self.survival(s) * self.censor_survival(s)

    def y_given(self, s, hz):
        """``P(X >= s | z)`` for relative risk value ``hz``."""
        return np.exp(-self.A0(s) * hz) * self.censor_survival(s)

    def inverse_A0(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.A0_inverse is not None:
            return self.A0_inverse(u)
        out = np.empty_like(u)
        for k, uk in enumerate(u.ravel()):
            hi = 1.0
            while self.A0(np.array([hi]))[0] < uk:
                hi *= 2.0
                if hi > 1e12:
                    break
            out.ravel()[k] = optimize.brentq(lambda t: self.A0(np.array([t]))[0] - uk, 0.0, hi,
                                             xtol=1e-14, rtol=1e-14) if hi <= 1e12 else np.inf
        return out

    def check_consistency(self, T, tol=1e-8):
        """``|A0(T) - int_0^T alpha0|`` relative; raises when above ``tol``."""
        num = float(quadrature.integrate(self.alpha0, [0.0, T]))
        ref = float(self.A0(np.array([T]))[0])
        err = abs(num - ref) / max(abs(ref), 1e-300)
        if err > tol:
            raise ValidationError(f"A0 disagrees with the integral of alpha0 ({err:.3g})")
        return err


def _censoring(censor_rate):
    if censor_rate is None or censor_rate == 0:
        return (lambda s: np.ones_like(np.asarray(s, dtype=np.float64)),
                lambda rng, n: np.full(n, np.inf), True)
    g = float(censor_rate)
    if g < 0:
        raise ValidationError("censoring rate must be nonnegative")
    return (lambda s: np.exp(-g * np.asarray(s, dtype=np.float64)),
            lambda rng, n: rng.exponential(1.0 / g, n), False)


def _regression(beta0, p1):
    if beta0 is None:
        return None, None
    b = np.atleast_1d(np.asarray(beta0, dtype=np.float64))
    law = CovariateLaw(np.array([[0.0], [1.0]]), np.array([1.0 - p1, p1]))
    return (lambda z: np.exp(np.asarray(z, dtype=np.float64).reshape(-1, b.size) @ b)), law


def make_truth(kind, censor_rate=None, beta0=None, p_binary=0.5, **params):
    """Named truth presets.

    Parameters
    ----------
    kind : str
        ``exponential`` (``rate``), ``weibull`` (``shape``, ``rate``;
        ``A0 = (rate t)**shape``) or ``gompertz`` (``a``, ``b``).
    censor_rate : float, optional
        Exponential censoring with this rate; ``None`` or 0 means none.
    beta0 : float, optional
        Adds a binary covariate with ``P(z = 1) = p_binary`` and
        ``h0(z) = exp(beta0 z)``.
    """
    G, sampler, unc = _censoring(censor_rate)
    h0, law = _regression(beta0, p_binary)
    kind = kind.lower()
    if kind == "exponential":
        r = float(params.get("rate", 1.0))
        a0 = lambda s: np.full(np.shape(s), r)
        A0 = lambda t: r * np.asarray(t, dtype=np.float64)
        inv = lambda u: np.asarray(u, dtype=np.float64) / r
        rec = {"rate": r}
    elif kind == "weibull":
        k = float(params.get("shape", 1.5))
        r = float(params.get("rate", 1.0))
        a0 = lambda s: k * r * (r * np.asarray(s, dtype=np.float64)) ** (k - 1.0)
        A0 = lambda t: (r * np.asarray(t, dtype=np.float64)) ** k
        inv = lambda u: np.asarray(u, dtype=np.float64) ** (1.0 / k) / r
        rec = {"shape": k, "rate": r}
    elif kind == "gompertz":
        a = float(params.get("a", 1.0))
        b = float(params.get("b", 0.5))
        a0 = lambda s: a * np.exp(b * np.asarray(s, dtype=np.float64))
        A0 = lambda t: a * np.expm1(b * np.asarray(t, dtype=np.float64)) / b if b != 0 \
            else a * np.asarray(t, dtype=np.float64)
        inv = (lambda u: np.log1p(np.asarray(u, dtype=np.float64) * b / a) / b) if b > 0 else None
        rec = {"a": a, "b": b}
    else:
        raise ValidationError(f"unknown truth preset {kind!r}")
    rec = dict(rec, censor_rate=censor_rate, beta0=beta0,
               p_binary=p_binary if beta0 is not None else None)
    return TruthSpec(alpha0=a0, A0=A0, censor_survival=G, A0_inverse=inv, censor_sample=sampler,
                     h0=h0, covariate_law=law, name=kind, params=rec, uncensored=unc)


def _population_weight(truth, w):
    if w is None:
        return None
    from .weights import WeightPlan
    if isinstance(w, (str, WeightPlan)):
        plan = WeightPlan(w) if isinstance(w, str) else w
        return plan.limit(censor_survival=truth.censor_survival, survival=truth.survival)
    return w


def hazard_distance(truth, fam, theta, w=None, T=None):
    """Weighted hazard distance from the truth to ``alpha(., theta)`` on ``[0, T]``.

    ``w`` is a weight plan (its population limit is used) or a weight
    function.
    """
    if T is None or T <= 0:
        raise ValidationError("hazard_distance needs T > 0")
    theta = fam.check(theta)
    wt = _population_weight(truth, w)
    return distance_parts(fam, theta, truth.alpha0, truth.y, float(T), wt)


def distance_gradient(truth, fam, theta, w=None, T=None):
    """Gradient of :func:`hazard_distance` in ``theta``."""
    theta = fam.check(theta)
    wt = _population_weight(truth, w)
    return distance_parts(fam, theta, truth.alpha0, truth.y, float(T), wt, order=1)[1]


@dataclass
class KLCheck:
    distance: float
    kl: float
    boundary: float
    residual: float


def kl_identity_check(truth, fam, theta, T):
    """Compare the hazard distance with KL divergence minus the boundary term.

    Left side: the distance with ``y = exp(-A)``. Right side:
    ``int_0^T f log(f / f_theta) dt - exp(-A(T)) {A(T) - A_theta(T)}``
    with densities ``f = alpha exp(-A)``. The two sides come from separate
    quadratures; ``residual`` is their absolute difference.
    """
    if not truth.uncensored:
        raise ValidationError("the KL identity needs an uncensored truth (G = 1)")
    theta = fam.check(theta)
    T = float(T)
    lhs = distance_parts(fam, theta, truth.alpha0, truth.survival, T, None)

    def kl_integrand(s):
        A = truth.A0(s)
        logf = np.log(truth.alpha0(s)) - A
        logft = fam.log_alpha(s, theta) - fam.cumhaz(s, theta)
        return np.exp(logf) * (logf - logft)

    b = fam.breakpoints
    br = np.unique(np.concatenate([[0.0, T], b[(b > 0) & (b < T)]]))
    kl = float(quadrature.integrate(kl_integrand, br))
    AT = float(truth.A0(np.array([T]))[0])
    AtT = float(fam.cumhaz(np.array([T]), theta)[0])
    boundary = math.exp(-AT) * (AT - AtT)
    return KLCheck(distance=lhs, kl=kl, boundary=boundary, residual=abs(lhs - (kl - boundary)))


# --------------------------------------------------------------------------
# proportional hazards distances


def _exp_risk(beta):
    b = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    return lambda z: np.exp(np.asarray(z, dtype=np.float64).reshape(-1, b.size) @ b)


def _law(truth):
    if truth.covariate_law is None or truth.h0 is None:
        raise ValidationError("Cox distances need h0 and a covariate law in the truth")
    law = truth.covariate_law
    return law.points, law.probs, np.asarray(truth.h0(law.points), dtype=np.float64).ravel()


def cox_distance(truth, h_beta, T, mode="semiparametric", fam=None, theta=None):
    """Distance from ``alpha0(s) h0(z)`` to a proportional hazards model.

    Parameters
    ----------
    truth : TruthSpec
        Must carry ``h0`` and a finite-support ``covariate_law``.
    h_beta : callable or array_like
        Model relative risk ``z -> h(z)``; an array is read as ``beta`` in
        ``exp(beta^T z)``.
    T : float
    mode : str
        ``parametric``: covariate-averaged hazard distance from
        ``alpha0 h0(z)`` to ``alpha_theta h_beta(z)`` (needs ``fam`` and
        ``theta``). ``semiparametric``: the risk-set distance
        ``int sum_z D(z) y(s|z) h0(z) [log(h0/h) - log(r0(s)/q0(s))] alpha0 ds``
        with ``r0 = E y h0`` and ``q0 = E y h``.
    """
    if not callable(h_beta):
        h_beta = _exp_risk(h_beta)
    pts, probs, h0v = _law(truth)
    hb = np.asarray(h_beta(pts), dtype=np.float64).ravel()
    if np.any(h0v <= 0) or np.any(hb <= 0):
        raise ValidationError("relative risks must be positive on the support")
    T = float(T)
    if mode == "parametric":
        if fam is None or theta is None:
            raise ValidationError("parametric Cox distance needs fam and theta")
        theta = fam.check(theta)
        total = 0.0
        for zk, pk, h0k, hk in zip(pts, probs, h0v, hb):
            yk = lambda s, h0k=h0k: truth.y_given(s, h0k)
            ak = lambda s, h0k=h0k: truth.alpha0(s) * h0k

            def f(s, yk=yk, ak=ak, hk=hk):
                a = ak(s)
                at = fam.alpha(s, theta) * hk
                return yk(s) * (a * (np.log(a) - fam.log_alpha(s, theta) - math.log(hk)) - (a - at))

            b = fam.breakpoints
            br = np.unique(np.concatenate([[0.0, T], b[(b > 0) & (b < T)]]))
            total += pk * float(quadrature.integrate(f, br))
        return total
    if mode != "semiparametric":
        raise ValidationError(f"unknown mode {mode!r}")
    logratio = np.log(h0v / hb)

    def f(s):
        Y = np.stack([truth.y_given(s, h) for h in h0v], axis=1)  # (k, m)
        r0 = Y @ (probs * h0v)
        q0 = Y @ (probs * hb)
        first = Y @ (probs * h0v * logratio)
        return (first - r0 * np.log(r0 / q0)) * truth.alpha0(s)

    return float(quadrature.integrate(f, [0.0, T]))


def cox_least_false(truth, T, mode="semiparametric", fam=None, init=None):
    """Minimise :func:`cox_distance` over ``exp(beta^T z)`` (and ``theta``).

    Uses ``scipy.optimize.minimize`` (BFGS, or Nelder-Mead as fallback).
    Returns the minimising parameter vector (``beta``, or ``(theta, beta)``).
    """
    q = truth.covariate_law.points.shape[1] if truth.covariate_law is not None else 0
    if mode == "semiparametric":
        x0 = np.zeros(q) if init is None else np.asarray(init, dtype=np.float64)
        obj = lambda b: cox_distance(truth, b, T)
    else:
        if fam is None:
            raise ValidationError("parametric mode needs fam")
        p = fam.dim
        x0 = (np.concatenate([np.ones(p), np.zeros(q)]) if init is None
              else np.asarray(init, dtype=np.float64))

        def obj(v):
            if not fam.in_domain(v[:p]):
                return np.inf
            return cox_distance(truth, v[p:], T, mode="parametric", fam=fam, theta=v[:p])
    res = optimize.minimize(obj, x0, method="BFGS", options={"gtol": 1e-10})
    if not res.success:
        res = optimize.minimize(obj, res.x, method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000})
    return res.x
