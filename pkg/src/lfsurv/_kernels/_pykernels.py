"""Vectorised numpy implementations of the inner-loop kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors every function
with explicit loops. Inputs are assumed validated by the callers.
"""
import numpy as np


def step_cumulative(x, knots, values, F_knots, F_x):
    """Integrate a left-continuous step weight against ``dF`` on ``[0, x_i]``.

    The weight is ``values[0]`` on ``[0, knots[0]]``, ``values[k]`` on
    ``(knots[k-1], knots[k]]`` and ``values[-1]`` beyond the last knot.
    ``F`` must vanish at 0.

    Parameters
    ----------
    x : (n,) array
    knots : (m,) increasing array
    values : (m + 1,) array
    F_knots : (m, d) array
        ``F`` evaluated at the knots.
    F_x : (n, d) array
        ``F`` evaluated at ``x``.

    Returns
    -------
    (n, d) array
    """
    m = knots.shape[0]
    d = F_x.shape[1]
    F_left = np.zeros((m + 1, d))
    F_left[1:] = F_knots
    incr = values[:m, None] * np.diff(F_left, axis=0)
    prefix = np.zeros((m + 1, d))
    np.cumsum(incr, axis=0, out=prefix[1:])
    j = np.searchsorted(knots, x, side="left")
    return prefix[j] + values[j, None] * (F_x - F_left[j])


def event_table(x, delta):
    """Distinct times with event and censoring counts and risk-set sizes.

    ``x`` must be sorted ascending. Returns ``(times, d, c, at_risk)`` where
    ``at_risk[k] = #{i : x_i >= times[k]}``.
    """
    n = x.shape[0]
    times, first, counts = np.unique(x, return_index=True, return_counts=True)
    d = np.add.reduceat(delta.astype(np.float64), first) if n else np.zeros(0)
    c = counts - d
    at_risk = (n - first).astype(np.float64)
    return times, d, c.astype(np.float64), at_risk


def _tie_bounds(x):
    first = np.searchsorted(x, x, side="left")
    last = np.searchsorted(x, x, side="right") - 1
    return first, last


def cox_breslow(x, delta, Z, eta):
    """Breslow partial log-likelihood, score and information.

    Records must be sorted by ``x`` ascending. Quantities are *not* divided
    by ``n``.
    """
    w = np.exp(eta)
    S0 = np.cumsum(w[::-1])[::-1]
    S1 = np.cumsum((w[:, None] * Z)[::-1], axis=0)[::-1]
    S2 = np.cumsum((w[:, None, None] * Z[:, :, None] * Z[:, None, :])[::-1],
                   axis=0)[::-1]
    first, _ = _tie_bounds(x)
    ev = delta.astype(bool)
    f = first[ev]
    s0 = S0[f]
    E = S1[f] / s0[:, None]
    loglik = float(np.sum(eta[ev] - np.log(s0)))
    score = np.sum(Z[ev] - E, axis=0)
    info = np.sum(S2[f] / s0[:, None, None] - E[:, :, None] * E[:, None, :],
                  axis=0)
    return loglik, score, info


def cox_residuals(x, delta, Z, eta):
    """Per-record score residuals ``L_i`` of the Breslow partial likelihood.

    ``L_i = sum_k (z_i - E_k) (dN_i(t_k) - Y_i(t_k) exp(eta_i) d_k / S0_k)``.
    Records sorted by ``x`` ascending.
    """
    n, q = Z.shape
    w = np.exp(eta)
    S0 = np.cumsum(w[::-1])[::-1]
    S1 = np.cumsum((w[:, None] * Z)[::-1], axis=0)[::-1]
    first, last = _tie_bounds(x)
    dl = delta.astype(np.float64)
    s0 = S0[first]
    E = S1[first] / s0[:, None]
    C0 = np.cumsum(dl / s0)
    C1 = np.cumsum(dl[:, None] * E / s0[:, None], axis=0)
    return (dl[:, None] * (Z - E)
            - w[:, None] * (Z * C0[last, None] - C1[last]))
