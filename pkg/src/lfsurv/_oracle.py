"""Hazard distance between a true hazard and a family member, by quadrature.

These routines see the truth only through callables and never touch the
likelihood code, so they serve as an independent check on fitted targets.
"""
import warnings

import numpy as np

from . import quadrature
from ._defaults import DEFAULTS
from .errors import ConvergenceError
from .families import _as_weight
from .optimize import newton_maximize


class OracleAmbiguityWarning(UserWarning):
    """The distance minimum is flat or ill-conditioned."""


def _breaks(fam, weight, T, extra=()):
    w = _as_weight(weight)
    b = np.concatenate([np.asarray(w.breakpoints, dtype=np.float64), fam.breakpoints,
                        np.asarray(extra, dtype=np.float64)])
    return np.unique(np.concatenate([[0.0, T], b[(b > 0) & (b < T)]]))


def _wy(weight, y, s):
    return _as_weight(weight)(s) * y(s)


def distance_parts(fam, theta, alpha, y, T, weight=None, order=0, breaks=(), tol=None):
    """Distance and, for ``order >= 1``, gradient and Hessian in ``theta``.

    ``d = int_0^T w y {a (log a - log a_theta) - (a - a_theta)} ds``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    p = theta.size

    def f(s):
        a = alpha(s)
        at = fam.alpha(s, theta)
        wy = _wy(weight, y, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            dist = np.where(a > 0, a * (np.log(a) - fam.log_alpha(s, theta)), 0.0) - (a - at)
        cols = [(wy * dist)[:, None]]
        if order >= 1:
            ps = fam.psi(s, theta)
            cols.append(-(wy * (a - at))[:, None] * ps)
            H = (ps[:, :, None] * ps[:, None, :] * at[:, None, None]
                 - fam.dpsi(s, theta) * (a - at)[:, None, None])
            cols.append((wy[:, None, None] * H).reshape(s.shape[0], p * p))
        return np.concatenate(cols, axis=1)

    res = quadrature.integrate(f, _breaks(fam, weight, T, breaks), tol=tol)
    if order == 0:
        return float(res[0])
    return float(res[0]), res[1:1 + p], res[1 + p:].reshape(p, p)


def weighted_mean_rate(alpha, y, T, weight=None, breaks=()):
    w = _as_weight(weight)
    b = np.concatenate([np.asarray(w.breakpoints, dtype=np.float64), np.asarray(breaks, dtype=np.float64)])
    br = np.unique(np.concatenate([[0.0, T], b[(b > 0) & (b < T)]]))
    num_den = quadrature.integrate(
        lambda s: np.stack([w(s) * y(s) * alpha(s), w(s) * y(s)], axis=1), br)
    return float(num_den[0] / num_den[1])


def minimise_distance(fam, alpha, y, T, weight=None, init=None, breaks=(), tol=1e-11):
    """Least-false parameter by Newton on the distance.

    Returns ``(theta0, distance, hessian, converged)``.
    """
    if init is None:
        init = fam_init_from_rate(fam, weighted_mean_rate(alpha, y, T, weight, breaks))

    def evaluate(th):
        d, g, H = distance_parts(fam, th, alpha, y, T, weight, order=1, breaks=breaks)
        return -d, -g, -H

    res = newton_maximize(evaluate, init, fam.in_domain, tol=tol, raise_on_failure=False)
    if not res.converged and res.grad_norm > 1e-8:
        raise ConvergenceError("least-false oracle did not converge", trace=res.trace)
    H = -res.hess
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > DEFAULTS["oracle_condition_warn"]:
        warnings.warn(f"distance minimum is ill-conditioned (condition {cond:.3g})",
                      OracleAmbiguityWarning, stacklevel=3)
    return res.x, -res.value, H, res.converged


def fam_init_from_rate(fam, rate):
    name = fam.name
    if name == "exponential":
        return np.array([rate])
    if name == "weibull":
        return np.array([1.0])
    if name == "weibull2":
        return np.array([1.0, rate])
    if name == "gompertz":
        return np.array([rate, 0.0])
    return np.full(fam.dim, rate)
