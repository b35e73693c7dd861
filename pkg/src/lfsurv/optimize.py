"""Damped Newton maximisation inside an open parameter box."""
from dataclasses import dataclass, field

import numpy as np

from ._defaults import DEFAULTS
from .errors import ConvergenceError


@dataclass
class NewtonResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    hess: np.ndarray
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)

    @property
    def grad_norm(self):
        return float(np.linalg.norm(self.grad))


def _is_neg_def(H):
    try:
        np.linalg.cholesky(-0.5 * (H + H.T))
    except np.linalg.LinAlgError:
        return False
    return True


def _polish(evaluate, in_domain, x, f, g, H, trace):
    # one extra Newton step once within tolerance; kept only if the gradient shrinks
    if not np.any(g):
        return x, f, g, H
    cand = x + np.linalg.solve(-H, g)
    if not in_domain(cand):
        return x, f, g, H
    fc, gc, Hc = evaluate(cand)
    if (np.isfinite(fc) and np.all(np.isfinite(gc)) and fc >= f - 1e-13 * (1.0 + abs(f))
            and np.linalg.norm(gc) < np.linalg.norm(g) and _is_neg_def(Hc)):
        trace[-1]["polish"] = float(np.linalg.norm(gc))
        return cand, fc, gc, Hc
    return x, f, g, H


def newton_maximize(evaluate, x0, in_domain, tol=None, max_iter=None,
                    max_halvings=None, raise_on_failure=True, step_tol=None):
    """Maximise a smooth function with Newton steps and backtracking.

    Parameters
    ----------
    evaluate : callable
        ``x -> (value, grad, hess)``.
    x0 : array_like
        Start inside the domain.
    in_domain : callable
        ``x -> bool``; steps leaving the open domain are halved.
    tol : float
        Convergence when ``|grad| <= tol`` and the Hessian is negative definite.
    step_tol : float, optional
        Additionally require the Newton step to be below
        ``step_tol * (1 + |x|)``. This stops a flat, still rising objective
        (such as a monotone partial likelihood) from passing as converged.

    Notes
    -----
    When the Hessian is not negative definite the step falls back to a
    scaled gradient-ascent direction. A step is accepted when the value does
    not drop by more than rounding error.
    """
    tol = DEFAULTS["newton_tol"] if tol is None else tol
    max_iter = DEFAULTS["newton_max_iter"] if max_iter is None else max_iter
    max_halvings = DEFAULTS["newton_max_halvings"] if max_halvings is None else max_halvings
    x = np.array(x0, dtype=np.float64)
    f, g, H = evaluate(x)
    trace = []
    for it in range(max_iter + 1):
        gn = float(np.linalg.norm(g))
        trace.append({"iter": it, "x": x.tolist(), "value": float(f), "grad_norm": gn})
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            break
        if gn <= tol and _is_neg_def(H):
            if step_tol is None or (np.linalg.norm(np.linalg.solve(H, g))
                                    <= step_tol * (1.0 + np.linalg.norm(x))):
                x, f, g, H = _polish(evaluate, in_domain, x, f, g, H, trace)
                return NewtonResult(x, float(f), g, H, True, it, trace)
        if it == max_iter:
            break
        if _is_neg_def(H):
            step = np.linalg.solve(-H, g)
            kind = "newton"
        else:
            step = g / max(1.0, float(np.max(np.abs(np.diag(H)))), gn)
            kind = "gradient"
        slack = 1e-13 * (1.0 + abs(f))
        accepted = False
        for _ in range(max_halvings):
            cand = x + step
            if in_domain(cand):
                fc, gc, Hc = evaluate(cand)
                if np.isfinite(fc) and fc >= f - slack:
                    accepted = True
                    break
            step = 0.5 * step
        trace[-1]["step"] = kind
        if not accepted:
            trace[-1]["note"] = "line search failed"
            break
        x, f, g, H = cand, fc, gc, Hc
    res = NewtonResult(x, float(f), g, H, False, len(trace) - 1, trace)
    if raise_on_failure:
        raise ConvergenceError(
            f"Newton did not converge: |grad| = {res.grad_norm:.3g} after "
            f"{res.iterations} iterations", trace=trace)
    return res
