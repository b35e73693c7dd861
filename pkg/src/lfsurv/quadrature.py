"""Vectorised adaptive Gauss-Legendre quadrature.

Integrands are evaluated on batches of nodes and may be scalar-, vector- or
matrix-valued. Error control is global per integral: the intervals with the
largest error estimates are bisected until the summed estimate meets
``max(abs_tol, tol * |I|)``. Integrable endpoint singularities (``log s`` and
``s**(c - 1)`` with ``c > 0``) are handled by repeated bisection.
"""
import numpy as np

from ._defaults import DEFAULTS
from .errors import QuadratureError

_ORDER = 15
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(_ORDER)


def _gauss(f, a, b):
    """Fixed-order rule on each ``[a_k, b_k]``; returns ``(k, D)``."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    s = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    vals = np.asarray(f(s), dtype=np.float64)
    vals = vals.reshape(a.shape[0], _ORDER, -1)
    return half[:, None] * np.einsum("j,kjd->kd", _WEIGHTS, vals)


def _estimate(f, a, b):
    m = 0.5 * (a + b)
    coarse = _gauss(f, a, b)
    fine = _gauss(f, np.concatenate([a, m]), np.concatenate([m, b]))
    k = a.shape[0]
    fine = fine[:k] + fine[k:]
    err = np.sqrt(np.sum((fine - coarse) ** 2, axis=1))
    return fine, err


def _adaptive(f, a, b, owner, n_owners, tol, abs_tol, max_depth, max_intervals):
    keep = b > a
    a, b, owner = a[keep], b[keep], owner[keep]
    depth = np.zeros(a.shape[0], dtype=np.int64)
    if a.shape[0] == 0:
        return None
    est, err = _estimate(f, a, b)
    D = est.shape[1]
    while True:
        tot = np.stack([np.bincount(owner, weights=est[:, c], minlength=n_owners)
                        for c in range(D)], axis=1)
        scale = np.sqrt(np.sum(tot ** 2, axis=1))
        budget = np.maximum(abs_tol, tol * scale)
        errsum = np.bincount(owner, weights=err, minlength=n_owners)
        bad = errsum > budget
        if not bad.any():
            return tot
        count = np.bincount(owner, minlength=n_owners)
        thresh = budget / (2.0 * np.maximum(count, 1))
        split = bad[owner] & (err > thresh[owner]) & (depth < max_depth)
        if not split.any():
            worst = float(np.max(errsum[bad] / np.maximum(scale[bad], 1e-300)))
            raise QuadratureError(
                f"quadrature did not converge; relative error estimate {worst:.3g}",
                error_estimate=float(np.max(errsum[bad])))
        if a.shape[0] + split.sum() > max_intervals:
            raise QuadratureError("quadrature interval limit exceeded",
                                  error_estimate=float(np.max(errsum[bad])))
        sa, sb = a[split], b[split]
        sm = 0.5 * (sa + sb)
        na = np.concatenate([sa, sm])
        nb = np.concatenate([sm, sb])
        new_est, new_err = _estimate(f, na, nb)
        so = np.concatenate([owner[split], owner[split]])
        sd = np.concatenate([depth[split], depth[split]]) + 1
        keep = ~split
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        owner = np.concatenate([owner[keep], so])
        depth = np.concatenate([depth[keep], sd])
        est = np.concatenate([est[keep], new_est])
        err = np.concatenate([err[keep], new_err])


def _probe_shape(f, lower, upper):
    if lower.size:
        x = 0.5 * (lower[0] + upper[0]) if upper[0] > lower[0] else upper[0] + 1.0
    else:
        x = 1.0
    with np.errstate(all="ignore"):
        v = np.asarray(f(np.array([x], dtype=np.float64)), dtype=np.float64)
    return v.shape[1:]


def integrate(f, breaks, tol=None, abs_tol=None, max_depth=None):
    """Integrate ``f`` over ``[breaks[0], breaks[-1]]``.

    The integrand is assumed smooth between consecutive breakpoints, which
    are used as the initial partition.

    Parameters
    ----------
    f : callable
        Maps a 1-d array of ``k`` nodes to an array of shape ``(k, ...)``.
    breaks : array_like
        Nondecreasing partition points.
    tol, abs_tol : float, optional
        Relative and absolute tolerances on the whole integral.

    Returns
    -------
    ndarray
        Integral with the trailing shape of ``f``'s output.
    """
    tol = DEFAULTS["quad_tol"] if tol is None else tol
    abs_tol = DEFAULTS["quad_abs_tol"] if abs_tol is None else abs_tol
    max_depth = DEFAULTS["quad_max_depth"] if max_depth is None else max_depth
    breaks = np.asarray(breaks, dtype=np.float64)
    a, b = breaks[:-1], breaks[1:]
    shape = _probe_shape(f, a, b)
    if breaks.size < 2 or not np.any(b > a):
        return np.zeros(shape)
    owner = np.zeros(a.shape[0], dtype=np.int64)
    tot = _adaptive(f, a, b, owner, 1, tol, abs_tol, max_depth,
                    DEFAULTS["quad_max_intervals"])
    return tot[0].reshape(shape)


def integrate_many(f, lower, upper, tol=None, abs_tol=None, max_depth=None):
    """Integrate ``f`` over each ``[lower[j], upper[j]]`` separately.

    Each integral gets its own error budget. Returns ``(m, ...)``.
    """
    tol = DEFAULTS["quad_tol"] if tol is None else tol
    abs_tol = DEFAULTS["quad_abs_tol"] if abs_tol is None else abs_tol
    max_depth = DEFAULTS["quad_max_depth"] if max_depth is None else max_depth
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    m = lower.shape[0]
    shape = _probe_shape(f, lower, upper)
    if m == 0:
        return np.zeros((0,) + shape)
    owner = np.arange(m, dtype=np.int64)
    tot = _adaptive(f, lower, upper, owner, m, tol, abs_tol, max_depth,
                    DEFAULTS["quad_max_intervals"])
    if tot is None:
        return np.zeros((m,) + shape)
    return tot.reshape((m,) + shape)
