"""Censored survival data and its nonparametric building blocks.

A :class:`SurvivalDataset` holds right-censored records ``(x, delta, z)``
sorted by time, together with the observation horizon ``T``. Ties are broken
events-first, then by input order. From it we derive the counting-process
view (``N``, ``Y``), the Nelson-Aalen cumulative hazard, and product-limit
(Kaplan-Meier) survival curves for lifetimes or for censoring.

Censoring-curve tie convention: at a time carrying both events and
censorings the events are removed first, so the censoring risk set at ``u``
is ``Y(u) - dN(u)``.
"""
import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class SurvivalRecord:
    x: float
    delta: int
    z: tuple = ()


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


class SurvivalDataset:
    """Immutable, time-sorted collection of right-censored records.

    Parameters
    ----------
    x : array_like
        Observed times ``min(X0, c)``, nonnegative.
    delta : array_like
        Event indicators in ``{0, 1}``.
    z : array_like, optional
        ``(n, q)`` covariates; omitted or ``q = 0`` means a homogeneous sample.
    horizon : float, optional
        End of the observation window ``T``. Defaults to ``max(x)``. A value
        below ``max(x)`` truncates: records beyond it become censored at ``T``.
    censor_times : array_like, optional
        Full censoring-time column ``c_i`` (known for every record), used by
        the fixed-censoring bootstrap.
    ids : array_like of int, optional
        Record identifiers; defaults to input positions.
    """

    def __init__(self, x, delta, z=None, horizon=None, censor_times=None, ids=None):
        x = np.asarray(x, dtype=np.float64).ravel()
        delta_in = np.asarray(delta).ravel()
        n = x.shape[0]
        if n == 0:
            raise ValidationError("dataset needs at least one record")
        if delta_in.shape[0] != n:
            raise ValidationError("x and delta differ in length")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise ValidationError("times must be finite and nonnegative")
        if not np.all(np.isin(delta_in, (0, 1))):
            raise ValidationError("status must be 0 or 1")
        delta = delta_in.astype(np.float64)
        if z is None:
            z = np.zeros((n, 0))
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            z = z[:, None]
        if z.shape[0] != n:
            raise ValidationError("covariate rows differ from record count")
        if not np.all(np.isfinite(z)):
            raise ValidationError("covariates must be finite")
        if censor_times is not None:
            censor_times = np.asarray(censor_times, dtype=np.float64).ravel()
            if censor_times.shape[0] != n:
                raise ValidationError("censor_times length differs from x")
            if np.any(censor_times < x - 1e-12 * np.maximum(1.0, x)):
                raise ValidationError("censoring time below observed time")
            cens = delta == 0
            if np.any(np.abs(censor_times[cens] - x[cens]) > 1e-12 * np.maximum(1.0, x[cens])):
                raise ValidationError("censored records must have c_i == x_i")
        ids = np.arange(n) if ids is None else np.asarray(ids, dtype=np.int64).ravel()

        if horizon is None:
            horizon = float(x.max())
        horizon = float(horizon)
        if not horizon > 0:
            raise ValidationError("horizon must be positive")
        beyond = x > horizon
        if beyond.any():
            x = np.where(beyond, horizon, x)
            delta = np.where(beyond, 0.0, delta)
            if censor_times is not None:
                censor_times = np.where(beyond, horizon, censor_times)

        order = np.lexsort((ids, 1.0 - delta, x))
        self._x = _readonly(x[order])
        self._delta = _readonly(delta[order])
        self._z = _readonly(z[order])
        self._ids = ids[order].copy()
        self._ids.setflags(write=False)
        self._censor = None if censor_times is None else _readonly(censor_times[order])
        self._horizon = horizon

    @classmethod
    def from_records(cls, records: Sequence[SurvivalRecord], horizon=None):
        q = {len(r.z) for r in records}
        if len(q) > 1:
            raise ValidationError("records have differing covariate dimensions")
        z = np.array([r.z for r in records], dtype=np.float64).reshape(len(records), -1)
        return cls([r.x for r in records], [r.delta for r in records], z, horizon)

    # read-only views ---------------------------------------------------
    @property
    def x(self):
        return self._x

    @property
    def delta(self):
        return self._delta

    @property
    def z(self):
        return self._z

    @property
    def ids(self):
        return self._ids

    @property
    def censor_times(self):
        return self._censor

    @property
    def horizon(self):
        return self._horizon

    @property
    def n(self):
        return self._x.shape[0]

    @property
    def q(self):
        return self._z.shape[1]

    @property
    def n_events(self):
        return int(self._delta.sum())

    @property
    def records(self):
        return [SurvivalRecord(float(x), int(d), tuple(float(v) for v in z))
                for x, d, z in zip(self._x, self._delta, self._z)]

    def __len__(self):
        return self.n

    def __repr__(self):
        return (f"SurvivalDataset(n={self.n}, events={self.n_events}, "
                f"q={self.q}, horizon={self._horizon:g})")

    def subset(self, index):
        """New dataset from positions ``index`` (of the sorted order)."""
        index = np.asarray(index)
        return SurvivalDataset(
            self._x[index], self._delta[index], self._z[index],
            horizon=self._horizon,
            censor_times=None if self._censor is None else self._censor[index],
            ids=self._ids[index])

    def without(self, i):
        """Dataset with the record at sorted position ``i`` removed."""
        keep = np.ones(self.n, dtype=bool)
        keep[i] = False
        return self.subset(np.flatnonzero(keep))

    def at_risk(self, s):
        """``Y(s) = #{i : x_i >= s}`` at the points ``s``."""
        s = np.asarray(s, dtype=np.float64)
        return (self.n - np.searchsorted(self._x, s, side="left")).astype(np.float64)


def load_csv(path, time_col="time", status_col="status", covariate_cols=None,
             censor_col=None, horizon=None):
    """Read a survival dataset from a CSV file with a header row.

    Parameters
    ----------
    path : str or path-like
    time_col, status_col : str
        Column names for ``x`` and ``delta``.
    covariate_cols : list of str, optional
        Covariate columns. By default every column named ``z1, z2, ...``.
    censor_col : str, optional
        Column holding a full censoring-time value for every record.
    horizon : float, optional
        Observation horizon, defaults to the largest time.

    Raises
    ------
    ParseError
        Missing column or a non-numeric cell (message carries the line).
    ValidationError
        Negative time or a status outside ``{0, 1}``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        for col in (time_col, status_col):
            if col not in header:
                raise ParseError(f"missing column {col!r}", line=1)
        if covariate_cols is None:
            covariate_cols = sorted(
                (h for h in header if h[:1] == "z" and h[1:].isdigit()),
                key=lambda h: int(h[1:]))
        for col in covariate_cols:
            if col not in header:
                raise ParseError(f"missing covariate column {col!r}", line=1)
        if censor_col is not None and censor_col not in header:
            raise ParseError(f"missing column {censor_col!r}", line=1)
        it, ist = header.index(time_col), header.index(status_col)
        iz = [header.index(c) for c in covariate_cols]
        ic = header.index(censor_col) if censor_col is not None else None
        xs, ds, zs, cs = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                x = float(row[it])
                d = float(row[ist])
                z = [float(row[j]) for j in iz]
                c = float(row[ic]) if ic is not None else None
            except ValueError as exc:
                raise ParseError(f"non-numeric value ({exc})", line=lineno) from None
            if not np.isfinite(x) or x < 0:
                raise ValidationError(f"line {lineno}: negative or non-finite time {x}")
            if d not in (0.0, 1.0):
                raise ValidationError(f"line {lineno}: status must be 0 or 1, got {row[ist]}")
            xs.append(x)
            ds.append(int(d))
            zs.append(z)
            cs.append(c)
    if not xs:
        raise ParseError("no data rows")
    z = np.array(zs, dtype=np.float64).reshape(len(xs), len(iz))
    return SurvivalDataset(xs, ds, z, horizon=horizon,
                           censor_times=None if ic is None else cs)


# --------------------------------------------------------------------------
# counting process view and step estimates


@dataclass(frozen=True)
class CountingView:
    """Event times with multiplicities plus the at-risk process.

    ``at_risk_events[k]`` is ``Y`` at ``event_times[k]``; call
    :meth:`at_risk` for ``Y`` anywhere.
    """

    event_times: np.ndarray
    dN: np.ndarray
    at_risk_events: np.ndarray
    n: int
    _x: np.ndarray

    def at_risk(self, s):
        s = np.asarray(s, dtype=np.float64)
        return (self.n - np.searchsorted(self._x, s, side="left")).astype(np.float64)

    def yhat(self, s):
        return self.at_risk(s) / self.n


def counting_view(ds: SurvivalDataset) -> CountingView:
    times, d, _, risk = _kernels.event_table(ds.x, ds.delta)
    ev = d > 0
    return CountingView(event_times=times[ev], dN=d[ev], at_risk_events=risk[ev],
                        n=ds.n, _x=ds.x)


@dataclass(frozen=True)
class StepEstimate:
    """Right-continuous step function with jumps at ``jump_times``.

    ``values[k]`` is the value on ``[jump_times[k], jump_times[k+1])``;
    ``baseline`` the value before the first jump.
    """

    jump_times: np.ndarray
    values: np.ndarray
    baseline: float

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        k = np.searchsorted(self.jump_times, t, side="right")
        vals = np.concatenate([[self.baseline], self.values])
        return vals[k]

    def left(self, t):
        """Left limit ``F(t-)``; for a survival curve this is ``P[T >= t]``."""
        t = np.asarray(t, dtype=np.float64)
        k = np.searchsorted(self.jump_times, t, side="left")
        vals = np.concatenate([[self.baseline], self.values])
        return vals[k]


def nelson_aalen(ds: SurvivalDataset) -> StepEstimate:
    """Nelson-Aalen estimate ``sum_{u <= t} dN(u) / Y(u)``."""
    cv = counting_view(ds)
    vals = np.cumsum(cv.dN / cv.at_risk_events)
    return StepEstimate(cv.event_times.copy(), vals, 0.0)


def kaplan_meier(ds: SurvivalDataset, target="lifetime") -> StepEstimate:
    """Product-limit survival curve for lifetimes or for censoring times.

    With ``target="censoring"`` the indicators are flipped and events at a
    tied time are removed from the risk set before the censorings.
    """
    times, d, c, risk = _kernels.event_table(ds.x, ds.delta)
    if target == "lifetime":
        jumps, r = d, risk
    elif target == "censoring":
        jumps, r = c, risk - d
    else:
        raise ValidationError(f"unknown Kaplan-Meier target {target!r}")
    has = jumps > 0
    factors = 1.0 - jumps[has] / r[has]
    return StepEstimate(times[has].copy(), np.cumprod(factors), 1.0)
