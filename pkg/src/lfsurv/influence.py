"""Empirical and theoretical influence functions, sphering and the jackknife.

The empirical influence of record ``i`` is ``I_i = J^-1 L_i`` where ``L_i``
is its score contribution at ``theta_hat``. Because the score vanishes at
``theta_hat`` the ``I_i`` sum to zero, and their empirical covariance is the
sandwich ``J^-1 K J^-1`` by construction.
"""
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import quadrature
from ._defaults import DEFAULTS
from .errors import ConvergenceError, LFSurvError, ValidationError
from .families import _as_weight
from .fit import _inv, estimate, fit_ml
from .weights import StepWeight


@dataclass
class InfluenceReport:
    """Per-record influence vectors.

    Attributes
    ----------
    per_record : (n, p) array
        ``I_i = J^-1 L_i``.
    sphered : (n, p) array
        ``Sigma^{-1/2} I_i`` with ``Sigma = (1/n) sum I_i I_i^T``.
    sigma_hat : (p, p) array
    L_vectors : (n, p) array
    ids : (n,) array
        Record identifiers in dataset order.
    """

    per_record: np.ndarray
    sphered: np.ndarray
    sigma_hat: np.ndarray
    L_vectors: np.ndarray
    ids: np.ndarray
    param_names: tuple = ()

    @property
    def n(self):
        return self.per_record.shape[0]

    @property
    def sphered_norm(self):
        return np.linalg.norm(self.sphered, axis=1)

    def flagged(self, threshold=None):
        """Positions whose sphered norm exceeds ``threshold`` (default 3)."""
        threshold = DEFAULTS["sphered_threshold"] if threshold is None else threshold
        return np.flatnonzero(self.sphered_norm > threshold)

    def to_csv(self, path, threshold=None):
        threshold = DEFAULTS["sphered_threshold"] if threshold is None else threshold
        p = self.per_record.shape[1]
        names = list(self.param_names) or [str(j) for j in range(p)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["id"] + [f"I_{m}" for m in names] + [f"sphered_{m}" for m in names]
                        + ["sphered_norm", "flagged"])
            norms = self.sphered_norm
            for i in range(self.n):
                wr.writerow([int(self.ids[i])]
                            + [repr(float(v)) for v in self.per_record[i]]
                            + [repr(float(v)) for v in self.sphered[i]]
                            + [repr(float(norms[i])), int(norms[i] > threshold)])


def inverse_sqrt(S, floor=None):
    """Symmetric inverse square root with eigenvalues floored at ``floor``."""
    floor = DEFAULTS["eigen_floor"] if floor is None else floor
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    vals = np.maximum(vals, floor)
    return (vecs / np.sqrt(vals)) @ vecs.T


def report_from_L(L, J, ids, param_names=()):
    """Build an :class:`InfluenceReport` from score contributions and ``J``."""
    Ji = _inv(J, "J_hat")
    I = L @ Ji.T
    n = L.shape[0]
    sigma = I.T @ I / n
    sigma = 0.5 * (sigma + sigma.T)
    sph = I @ inverse_sqrt(sigma).T
    return InfluenceReport(per_record=I, sphered=sph, sigma_hat=sigma, L_vectors=L,
                           ids=np.asarray(ids), param_names=tuple(param_names))


def influence_empirical(ds, fam, fr):
    """Empirical influence ``I_i = J_hat^-1 L_i`` for a fitted model.

    ``fr`` is the :class:`~lfsurv.fit.FitResult` of ``fam`` on ``ds``.
    """
    if not fr.converged:
        raise ConvergenceError("influence needs a converged fit")
    if fr.L_vectors.shape[0] != ds.n:
        raise ValidationError("fit and dataset differ in size")
    return report_from_L(fr.L_vectors, fr.J_hat, ds.ids, fr.param_names)


def influence_theoretical(fam, theta0, J, x, delta, weight=None):
    """Influence of the point ``(x, delta)`` on the (weighted) ML functional.

    ``J^-1 [w(x) psi(x, theta0) delta - int_0^x w psi alpha ds]``; with unit
    weight the integral is ``A^d(x, theta0)``.

    Parameters
    ----------
    fam : HazardFamily
    theta0 : array_like
    J : (p, p) array
    x : float or array of times
    delta : int or array of indicators
    weight : StepWeight, SmoothWeight or callable, optional

    Returns
    -------
    (p,) array, or (k, p) for array input
    """
    theta0 = fam.check(theta0)
    J = np.atleast_2d(np.asarray(J, dtype=np.float64))
    Ji = _inv(J, "J")
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    delta = np.broadcast_to(np.atleast_1d(np.asarray(delta, dtype=np.float64)), x.shape)
    w = _as_weight(weight)
    if isinstance(w, StepWeight) and w.is_unit():
        cum = fam.cumhaz_grad(x, theta0)
        wx = np.ones_like(x)
    elif isinstance(w, StepWeight):
        from . import _kernels
        Fk = fam.cumhaz_grad(w.knots, theta0).reshape(w.knots.size, -1)
        cum = _kernels.step_cumulative(x, w.knots, w.values, Fk, fam.cumhaz_grad(x, theta0))
        wx = w(x)
    else:
        from .families import _integrand
        f = _integrand(fam, theta0, "psi_alpha")
        cum = quadrature.integrate_many(lambda s: w(s)[:, None] * f(s),
                                        np.zeros_like(x), x)
        wx = w(x)
    L = -np.asarray(cum)
    ev = delta > 0
    if ev.any():
        L[ev] += wx[ev, None] * fam.psi(x[ev], theta0)
    out = L @ Ji.T
    return out[0] if scalar else out


@dataclass
class JackknifeResult:
    """Leave-one-out differences ``n (theta_hat - theta_hat_(i))`` versus ``I_i``."""

    jackknife: np.ndarray
    influence: np.ndarray
    relative_deviation: np.ndarray
    max_relative_deviation: float
    failed: list = field(default_factory=list)


def jackknife_check(ds, fam, w=None, workers=None):
    """Refit without each record and compare with the empirical influence.

    The relative deviation of record ``i`` is
    ``|n (theta_hat - theta_hat_(i)) - I_i| / max(|I_i|, 1e-8 max_j |I_j|)``.
    Leave-one-out fits that fail are reported in ``failed`` and get NaN.
    """
    if ds.n < 3:
        raise ValidationError("jackknife needs n >= 3")
    fr = fit_ml(ds, fam, w)
    rep = influence_empirical(ds, fam, fr)
    n, p = ds.n, fam.dim

    def one(i):
        try:
            return i, estimate(ds.without(i), fam, w, init=fr.theta_hat)
        except LFSurvError:
            return i, None

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, range(n)))
    else:
        results = [one(i) for i in range(n)]
    jk = np.full((n, p), np.nan)
    failed = []
    for i, th in results:
        if th is None:
            failed.append(i)
        else:
            jk[i] = n * (fr.theta_hat - th)
    I = rep.per_record
    norms = np.linalg.norm(I, axis=1)
    denom = np.maximum(norms, 1e-8 * max(norms.max(), 1e-300))
    dev = np.linalg.norm(jk - I, axis=1) / denom
    return JackknifeResult(jackknife=jk, influence=I, relative_deviation=dev,
                           max_relative_deviation=float(np.nanmax(dev)) if n > len(failed) else np.nan,
                           failed=failed)
