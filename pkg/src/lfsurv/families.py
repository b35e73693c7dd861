"""Parametric hazard families and weighted integrals of their quantities.

Every family exposes, for times ``s`` (1-d array) and a parameter vector
``theta`` of length ``p``:

========================  ======================================  ==========
method                    quantity                                shape
========================  ======================================  ==========
``alpha``                 hazard ``alpha(s, theta)``              ``(k,)``
``psi``                   ``d log alpha / d theta``               ``(k, p)``
``dpsi``                  ``d^2 log alpha / d theta^2``           ``(k, p, p)``
``cumhaz``                ``A(t) = int_0^t alpha``                ``(k,)``
``cumhaz_grad``           ``A^d(t) = int_0^t psi alpha``          ``(k, p)``
``cumhaz_hess``           ``int_0^t (dpsi + psi psi^T) alpha``    ``(k, p, p)``
``inverse_cumhaz``        ``t`` with ``A(t) = u``                 ``(k,)``
========================  ======================================  ==========

Parameters live in an open box ``(lower, upper)``.
"""
import math
from abc import ABC, abstractmethod

import numpy as np

from . import quadrature
from ._defaults import DEFAULTS
from .errors import DomainError, ValidationError
from .weights import SmoothWeight, StepWeight


def _as_times(s):
    return np.atleast_1d(np.asarray(s, dtype=np.float64))


class HazardFamily(ABC):
    """Contract for a parametric hazard family."""

    name = "abstract"
    param_names = ()

    @property
    def dim(self):
        return len(self.param_names)

    # domain ------------------------------------------------------------
    @property
    def lower(self):
        return np.full(self.dim, -np.inf)

    @property
    def upper(self):
        return np.full(self.dim, np.inf)

    def in_domain(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        return bool(theta.shape == (self.dim,) and np.all(np.isfinite(theta))
                    and np.all(theta > self.lower) and np.all(theta < self.upper))

    def check(self, theta):
        theta = np.asarray(theta, dtype=np.float64).ravel()
        if not self.in_domain(theta):
            raise DomainError(f"{self.name}: parameter {theta} outside the open box "
                              f"({self.lower}, {self.upper})")
        return theta

    @property
    def breakpoints(self):
        """Times where the hazard is not smooth."""
        return np.zeros(0)

    # hazard quantities --------------------------------------------------
    @abstractmethod
    def alpha(self, s, theta): ...

    def log_alpha(self, s, theta):
        return np.log(self.alpha(s, theta))

    @abstractmethod
    def psi(self, s, theta): ...

    @abstractmethod
    def dpsi(self, s, theta): ...

    @abstractmethod
    def cumhaz(self, t, theta): ...

    @abstractmethod
    def cumhaz_grad(self, t, theta): ...

    @abstractmethod
    def cumhaz_hess(self, t, theta): ...

    @abstractmethod
    def inverse_cumhaz(self, u, theta): ...

    def survival(self, t, theta):
        return np.exp(-self.cumhaz(t, theta))

    def default_init(self, ds):
        raise NotImplementedError

    def config(self):
        return {}

    def __repr__(self):
        cfg = ", ".join(f"{k}={v}" for k, v in self.config().items())
        return f"{type(self).__name__}({cfg})"


def _rate_guess(ds):
    exposure = float(np.sum(ds.x))
    d = float(np.sum(ds.delta))
    if exposure <= 0 or d <= 0:
        return 1.0
    return d / exposure


class Exponential(HazardFamily):
    """Constant hazard ``alpha(s) = theta``."""

    name = "exponential"
    param_names = ("rate",)

    @property
    def lower(self):
        return np.zeros(1)

    def alpha(self, s, theta):
        s = _as_times(s)
        return np.full(s.shape, float(theta[0]))

    def psi(self, s, theta):
        s = _as_times(s)
        return np.full(s.shape + (1,), 1.0 / theta[0])

    def dpsi(self, s, theta):
        s = _as_times(s)
        return np.full(s.shape + (1, 1), -1.0 / theta[0] ** 2)

    def cumhaz(self, t, theta):
        return theta[0] * _as_times(t)

    def cumhaz_grad(self, t, theta):
        return _as_times(t)[:, None].copy()

    def cumhaz_hess(self, t, theta):
        return np.zeros(_as_times(t).shape + (1, 1))

    def inverse_cumhaz(self, u, theta):
        return _as_times(u) / theta[0]

    def default_init(self, ds):
        return np.array([_rate_guess(ds)])


class Weibull(HazardFamily):
    """One-parameter Weibull, ``A(t) = t**theta``.

    ``alpha(s) = theta s**(theta - 1)`` and ``psi(s) = 1/theta + log s``.
    """

    name = "weibull"
    param_names = ("shape",)

    @property
    def lower(self):
        return np.zeros(1)

    def alpha(self, s, theta):
        s = _as_times(s)
        th = theta[0]
        with np.errstate(divide="ignore"):
            return th * np.exp((th - 1.0) * np.log(s))

    def log_alpha(self, s, theta):
        s = _as_times(s)
        with np.errstate(divide="ignore"):
            return math.log(theta[0]) + (theta[0] - 1.0) * np.log(s)

    def psi(self, s, theta):
        s = _as_times(s)
        with np.errstate(divide="ignore"):
            return (1.0 / theta[0] + np.log(s))[:, None]

    def dpsi(self, s, theta):
        s = _as_times(s)
        return np.full(s.shape + (1, 1), -1.0 / theta[0] ** 2)

    def _powlog(self, t, theta):
        t = _as_times(t)
        pos = t > 0
        lt = np.log(np.where(pos, t, 1.0))
        A = np.where(pos, np.exp(theta[0] * lt), 0.0)
        return A, lt, pos

    def cumhaz(self, t, theta):
        return self._powlog(t, theta)[0]

    def cumhaz_grad(self, t, theta):
        A, lt, pos = self._powlog(t, theta)
        return np.where(pos, A * lt, 0.0)[:, None]

    def cumhaz_hess(self, t, theta):
        A, lt, pos = self._powlog(t, theta)
        return np.where(pos, A * lt * lt, 0.0)[:, None, None]

    def inverse_cumhaz(self, u, theta):
        return _as_times(u) ** (1.0 / theta[0])

    def default_init(self, ds):
        return np.array([1.0])


class Weibull2(HazardFamily):
    """Two-parameter Weibull with shape ``k`` and rate ``lam``: ``A(t) = (lam t)**k``."""

    name = "weibull2"
    param_names = ("shape", "rate")

    @property
    def lower(self):
        return np.zeros(2)

    def alpha(self, s, theta):
        s = _as_times(s)
        k, lam = theta
        with np.errstate(divide="ignore"):
            return k * lam * np.exp((k - 1.0) * np.log(lam * s))

    def log_alpha(self, s, theta):
        s = _as_times(s)
        k, lam = theta
        with np.errstate(divide="ignore"):
            return math.log(k) + k * math.log(lam) + (k - 1.0) * np.log(s)

    def psi(self, s, theta):
        s = _as_times(s)
        k, lam = theta
        out = np.empty(s.shape + (2,))
        with np.errstate(divide="ignore"):
            out[:, 0] = 1.0 / k + np.log(lam * s)
        out[:, 1] = k / lam
        return out

    def dpsi(self, s, theta):
        s = _as_times(s)
        k, lam = theta
        m = np.array([[-1.0 / k ** 2, 1.0 / lam], [1.0 / lam, -k / lam ** 2]])
        return np.broadcast_to(m, s.shape + (2, 2)).copy()

    def _parts(self, t, theta):
        t = _as_times(t)
        k, lam = theta
        pos = t > 0
        ll = np.log(np.where(pos, lam * t, 1.0))
        A = np.where(pos, np.exp(k * ll), 0.0)
        return A, ll, k, lam

    def cumhaz(self, t, theta):
        return self._parts(t, theta)[0]

    def cumhaz_grad(self, t, theta):
        A, ll, k, lam = self._parts(t, theta)
        return np.stack([A * ll, k * A / lam], axis=-1)

    def cumhaz_hess(self, t, theta):
        A, ll, k, lam = self._parts(t, theta)
        out = np.empty(A.shape + (2, 2))
        out[:, 0, 0] = A * ll * ll
        out[:, 0, 1] = out[:, 1, 0] = A * (1.0 + k * ll) / lam
        out[:, 1, 1] = k * (k - 1.0) * A / lam ** 2
        return out

    def inverse_cumhaz(self, u, theta):
        k, lam = theta
        return _as_times(u) ** (1.0 / k) / lam

    def default_init(self, ds):
        return np.array([1.0, _rate_guess(ds)])


# (e^x - 1)/x and its first two derivatives; power series near 0
_SERIES_TERMS = 16


def _expm1_ratio(x):
    x = np.asarray(x, dtype=np.float64)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 0.0)
    g0 = np.zeros_like(x)
    g1 = np.zeros_like(x)
    g2 = np.zeros_like(x)
    for k in range(_SERIES_TERMS):
        c = 1.0 / math.factorial(k + 1)
        g0 = g0 + c * xs ** k
        if k >= 1:
            g1 = g1 + c * k * xs ** (k - 1)
        if k >= 2:
            g2 = g2 + c * k * (k - 1) * xs ** (k - 2)
    xl = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp(xl)
        big0 = np.expm1(xl) / xl
        big1 = (e * (xl - 1.0) + 1.0) / xl ** 2
        big2 = (e * (xl * xl - 2.0 * xl + 2.0) - 2.0) / xl ** 3
    return (np.where(small, g0, big0), np.where(small, g1, big1),
            np.where(small, g2, big2))


class Gompertz(HazardFamily):
    """Gompertz hazard ``alpha(s) = a exp(b s)`` with ``a > 0`` and real ``b``.

    ``b < 0`` gives a defective lifetime (positive mass at infinity).
    """

    name = "gompertz"
    param_names = ("a", "b")

    @property
    def lower(self):
        return np.array([0.0, -np.inf])

    def alpha(self, s, theta):
        return theta[0] * np.exp(theta[1] * _as_times(s))

    def log_alpha(self, s, theta):
        return math.log(theta[0]) + theta[1] * _as_times(s)

    def psi(self, s, theta):
        s = _as_times(s)
        return np.stack([np.full(s.shape, 1.0 / theta[0]), s], axis=-1)

    def dpsi(self, s, theta):
        s = _as_times(s)
        out = np.zeros(s.shape + (2, 2))
        out[:, 0, 0] = -1.0 / theta[0] ** 2
        return out

    def cumhaz(self, t, theta):
        t = _as_times(t)
        g0, _, _ = _expm1_ratio(theta[1] * t)
        return theta[0] * t * g0

    def cumhaz_grad(self, t, theta):
        t = _as_times(t)
        g0, g1, _ = _expm1_ratio(theta[1] * t)
        return np.stack([t * g0, theta[0] * t * t * g1], axis=-1)

    def cumhaz_hess(self, t, theta):
        t = _as_times(t)
        _, g1, g2 = _expm1_ratio(theta[1] * t)
        out = np.zeros(t.shape + (2, 2))
        out[:, 0, 1] = out[:, 1, 0] = t * t * g1
        out[:, 1, 1] = theta[0] * t ** 3 * g2
        return out

    def inverse_cumhaz(self, u, theta):
        # solve a (e^{bt} - 1) / b = u in closed form
        u = _as_times(u)
        a, b = theta
        y = u * b / a
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.abs(y) < 1e-12, 1.0 - 0.5 * y,
                             np.log1p(y) / np.where(y == 0, 1.0, y))
            t = u / a * ratio
        return np.where(y <= -1.0, np.inf, t)

    def default_init(self, ds):
        return np.array([_rate_guess(ds), 0.0])


class PiecewiseConstant(HazardFamily):
    """Constant hazard ``theta_j`` on ``[c_j, c_{j+1})``; the last piece is unbounded.

    Parameters
    ----------
    cuts : sequence of float
        Strictly increasing cut points starting at 0.
    """

    name = "piecewise_constant"

    def __init__(self, cuts):
        cuts = np.asarray(cuts, dtype=np.float64).ravel()
        if cuts.size == 0 or cuts[0] != 0.0:
            raise ValidationError("piecewise cut points must start at 0")
        if np.any(np.diff(cuts) <= 0) or not np.all(np.isfinite(cuts)):
            raise ValidationError("piecewise cut points must be finite and strictly increasing")
        self.cuts = cuts
        self.param_names = tuple(f"rate{j}" for j in range(cuts.size))

    @property
    def lower(self):
        return np.zeros(self.dim)

    @property
    def breakpoints(self):
        return self.cuts[1:]

    def config(self):
        return {"cuts": [float(c) for c in self.cuts]}

    def _segment(self, s):
        return np.searchsorted(self.cuts, s, side="right") - 1

    def _exposure(self, t):
        t = _as_times(t)
        upper = np.concatenate([self.cuts[1:], [np.inf]])
        return np.clip(np.minimum(t[:, None], upper[None, :]) - self.cuts[None, :], 0.0, None)

    def alpha(self, s, theta):
        s = _as_times(s)
        return np.asarray(theta, dtype=np.float64)[self._segment(s)]

    def psi(self, s, theta):
        s = _as_times(s)
        j = self._segment(s)
        out = np.zeros(s.shape + (self.dim,))
        out[np.arange(s.size), j] = 1.0 / np.asarray(theta)[j]
        return out

    def dpsi(self, s, theta):
        s = _as_times(s)
        j = self._segment(s)
        out = np.zeros(s.shape + (self.dim, self.dim))
        out[np.arange(s.size), j, j] = -1.0 / np.asarray(theta)[j] ** 2
        return out

    def cumhaz(self, t, theta):
        return self._exposure(t) @ np.asarray(theta, dtype=np.float64)

    def cumhaz_grad(self, t, theta):
        return self._exposure(t)

    def cumhaz_hess(self, t, theta):
        return np.zeros(_as_times(t).shape + (self.dim, self.dim))

    def inverse_cumhaz(self, u, theta):
        u = _as_times(u)
        theta = np.asarray(theta, dtype=np.float64)
        A_cuts = self.cumhaz(self.cuts, theta)
        j = np.searchsorted(A_cuts, u, side="right") - 1
        return self.cuts[j] + (u - A_cuts[j]) / theta[j]

    def default_init(self, ds):
        E = self._exposure(ds.x).sum(axis=0)
        d = np.bincount(self._segment(ds.x[ds.delta > 0]), minlength=self.dim)
        guess = _rate_guess(ds)
        with np.errstate(invalid="ignore", divide="ignore"):
            rate = np.where((E > 0) & (d > 0), d / np.where(E > 0, E, 1.0), guess)
        return rate.astype(np.float64)

    def segment_counts(self, ds):
        """Events and exposure per piece (the unit-weight MLE is their ratio)."""
        E = self._exposure(ds.x).sum(axis=0)
        d = np.bincount(self._segment(ds.x[ds.delta > 0]), minlength=self.dim).astype(float)
        return d, E


_FAMILIES = {
    "exponential": Exponential,
    "weibull": Weibull,
    "weibull2": Weibull2,
    "gompertz": Gompertz,
    "piecewise_constant": PiecewiseConstant,
}


def make_family(name, config=None):
    """Construct a family by name.

    Parameters
    ----------
    name : str
        ``exponential``, ``weibull`` (one-parameter ``A = t**theta``),
        ``weibull2`` (shape and rate), ``gompertz`` or ``piecewise_constant``.
    config : dict, optional
        ``{"cuts": [...]}`` for the piecewise family.
    """
    key = str(name).strip().lower().replace("-", "_")
    if key == "piecewise":
        key = "piecewise_constant"
    if key not in _FAMILIES:
        raise ValidationError(f"unknown family {name!r}; choose from {sorted(_FAMILIES)}")
    config = dict(config or {})
    if key == "piecewise_constant":
        if "cuts" not in config:
            raise ValidationError("piecewise_constant needs config['cuts']")
        return PiecewiseConstant(config.pop("cuts"))
    if config:
        raise ValidationError(f"{key} takes no configuration, got {sorted(config)}")
    return _FAMILIES[key]()


# --------------------------------------------------------------------------
# weighted integrals

_CLOSED = {"alpha": "cumhaz", "psi_alpha": "cumhaz_grad", "hess_alpha": "cumhaz_hess"}


def _integrand(fam, theta, g):
    if callable(g):
        return lambda s: g(s, theta)
    if g == "alpha":
        return lambda s: fam.alpha(s, theta)
    if g == "psi_alpha":
        return lambda s: fam.psi(s, theta) * fam.alpha(s, theta)[:, None]
    if g == "psipsi_alpha":
        def f(s):
            ps = fam.psi(s, theta)
            return ps[:, :, None] * ps[:, None, :] * fam.alpha(s, theta)[:, None, None]
        return f
    if g == "dpsi_alpha":
        return lambda s: fam.dpsi(s, theta) * fam.alpha(s, theta)[:, None, None]
    if g == "hess_alpha":
        def f(s):
            ps = fam.psi(s, theta)
            return ((fam.dpsi(s, theta) + ps[:, :, None] * ps[:, None, :])
                    * fam.alpha(s, theta)[:, None, None])
        return f
    raise ValidationError(f"unknown integrand selector {g!r}")


def _as_weight(weight):
    if weight is None:
        return StepWeight.constant(1.0)
    if isinstance(weight, (StepWeight, SmoothWeight)):
        return weight
    if callable(weight):
        return SmoothWeight(weight)
    return StepWeight.constant(float(weight))


def integrate_weighted(fam, theta, g, weight=None, t0=0.0, t1=None, tol=None,
                       force_quadrature=False):
    """``int_{t0}^{t1} w(s) g(s, theta) ds`` for a family quantity ``g``.

    Parameters
    ----------
    fam : HazardFamily
    theta : array_like
    g : str or callable
        ``"alpha"``, ``"psi_alpha"``, ``"psipsi_alpha"``, ``"dpsi_alpha"``,
        ``"hess_alpha"`` (``(dpsi + psi psi^T) alpha``) or a callable
        ``(s, theta) -> (k, ...)``.
    weight : StepWeight, SmoothWeight, callable or None
        ``None`` means ``w = 1``.
    t0, t1 : float
    tol : float, optional
        Relative quadrature tolerance.
    force_quadrature : bool
        Skip the closed form even when available.

    Notes
    -----
    For a step weight and ``g`` in ``alpha``, ``psi_alpha`` or
    ``hess_alpha`` the result is a weighted sum of differences of ``A``,
    ``A^d`` or the cumulative Hessian; otherwise adaptive Gauss-Legendre
    quadrature runs on the partition formed by the weight's and the family's
    breakpoints.
    """
    theta = fam.check(theta)
    t1 = float(t0 if t1 is None else t1)
    t0 = float(t0)
    if t1 < t0:
        raise ValidationError("integrate_weighted needs t0 <= t1")
    w = _as_weight(weight)
    if isinstance(w, StepWeight) and not callable(g) and g in _CLOSED and not force_quadrature:
        F = getattr(fam, _CLOSED[g])
        inner = w.knots[(w.knots > t0) & (w.knots < t1)]
        pts = np.concatenate([[t0], inner, [t1]])
        Fp = F(pts, theta)
        vals = w(pts[1:])  # left-continuous: value on (pts[k], pts[k+1]]
        res = np.tensordot(vals, np.diff(Fp, axis=0), axes=(0, 0))
        return res if res.ndim else float(res)
    f = _integrand(fam, theta, g)
    lo, hi = t0, t1
    if isinstance(w, SmoothWeight):
        lo, hi = max(t0, w.support[0]), min(t1, w.support[1])
    bps = np.concatenate([np.asarray(w.breakpoints, dtype=np.float64), fam.breakpoints])
    if hi <= lo:
        shape = _integrand_shape(fam, theta, g)
        return np.zeros(shape) if shape else 0.0
    inner = np.unique(bps[(bps > lo) & (bps < hi)])
    breaks = np.concatenate([[lo], inner, [hi]])
    res = quadrature.integrate(lambda s: _times_weight(w(s), f(s)), breaks, tol=tol)
    return res if res.shape else float(res)


def _integrand_shape(fam, theta, g):
    s = np.array([1.0])
    return np.asarray(_integrand(fam, theta, g)(s)).shape[1:]


def _times_weight(wv, fv):
    fv = np.asarray(fv, dtype=np.float64)
    return wv.reshape(wv.shape + (1,) * (fv.ndim - 1)) * fv
