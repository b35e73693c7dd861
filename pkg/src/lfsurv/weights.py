"""Weight functions for weighted (M-estimator) likelihoods.

A weight is either a :class:`StepWeight` (piecewise constant,
left-continuous, which keeps integrals against the family's cumulative
quantities in closed form) or a :class:`SmoothWeight` (arbitrary callable,
integrated by quadrature). :class:`WeightPlan` describes a weight and
resolves it against a dataset.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._defaults import DEFAULTS
from .errors import ValidationError


@dataclass(frozen=True)
class StepWeight:
    """Left-continuous step function on ``[0, inf)``.

    ``values[0]`` holds on ``[0, knots[0]]``, ``values[k]`` on
    ``(knots[k-1], knots[k]]`` and ``values[-1]`` after the last knot.
    """

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=np.float64).ravel()
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.shape[0] != knots.shape[0] + 1:
            raise ValidationError("step weight needs len(values) == len(knots) + 1")
        if np.any(np.diff(knots) <= 0):
            raise ValidationError("step weight knots must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValidationError("weights must be finite and nonnegative")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    def __call__(self, s):
        s = np.asarray(s, dtype=np.float64)
        return self.values[np.searchsorted(self.knots, s, side="left")]

    @property
    def breakpoints(self):
        return self.knots

    @classmethod
    def constant(cls, c=1.0):
        return cls(np.zeros(0), np.array([float(c)]))

    def is_unit(self):
        return self.knots.size == 0 and self.values[0] == 1.0


@dataclass(frozen=True)
class SmoothWeight:
    """Callable weight with optional support and breakpoints.

    Parameters
    ----------
    func : callable
        Vectorised ``s -> w(s) >= 0``.
    support : (float, float)
        The weight vanishes outside ``[lo, hi]``.
    breakpoints : array_like
        Points where ``func`` is not smooth.
    """

    func: Callable
    support: tuple = (0.0, np.inf)
    breakpoints: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __call__(self, s):
        s = np.asarray(s, dtype=np.float64)
        lo, hi = self.support
        inside = (s >= lo) & (s <= hi)
        out = np.zeros_like(s)
        if inside.any():
            out[inside] = self.func(s[inside])
        return out


_KINDS = ("unit", "inverse_censoring_km", "inverse_yhat", "window", "custom")


@dataclass(frozen=True)
class WeightPlan:
    """Description of a likelihood weight ``W(s)``.

    Parameters
    ----------
    kind : str
        ``unit``; ``inverse_censoring_km`` for ``1 / G_hat[s, inf)``;
        ``inverse_yhat`` for ``n / Y(s)``; ``window`` for the indicator of
        ``(a, b]``; ``custom`` for a user-supplied :class:`StepWeight` or
        :class:`SmoothWeight`.
    window : (float, float), optional
        Endpoints ``(a, b)`` for ``kind="window"``.
    custom : StepWeight or SmoothWeight, optional
    floor : float
        Inverse weights divide by ``max(value, floor)``.
    """

    kind: str = "unit"
    window: Optional[tuple] = None
    custom: object = None
    floor: float = DEFAULTS["weight_floor"]

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        object.__setattr__(self, "kind", kind)
        if kind not in _KINDS:
            raise ValidationError(f"unknown weight kind {self.kind!r}")
        if kind == "window":
            if self.window is None or len(self.window) != 2:
                raise ValidationError("window weight needs (a, b)")
            a, b = map(float, self.window)
            if not (0 <= a < b):
                raise ValidationError("window needs 0 <= a < b")
            object.__setattr__(self, "window", (a, b))
        if kind == "custom" and not isinstance(self.custom, (StepWeight, SmoothWeight)):
            raise ValidationError("custom weight must be a StepWeight or SmoothWeight")

    @property
    def description(self):
        if self.kind == "window":
            return f"window({self.window[0]:g}, {self.window[1]:g}]"
        return self.kind

    @property
    def is_unit(self):
        return self.kind == "unit"

    def resolve(self, ds):
        """Concrete weight function for dataset ``ds``."""
        from .dataset import kaplan_meier

        if self.kind == "unit":
            return StepWeight.constant(1.0)
        if self.kind == "window":
            a, b = self.window
            if a == 0.0:
                return StepWeight(np.array([b]), np.array([1.0, 0.0]))
            return StepWeight(np.array([a, b]), np.array([0.0, 1.0, 0.0]))
        if self.kind == "inverse_censoring_km":
            G = kaplan_meier(ds, target="censoring")
            # G(s-) is constant on (t_{k-1}, t_k] with value G(t_{k-1})
            vals = np.concatenate([[1.0], G.values])
            return StepWeight(G.jump_times, 1.0 / np.maximum(vals, self.floor))
        if self.kind == "inverse_yhat":
            times = np.unique(ds.x)
            yhat = ds.at_risk(times) / ds.n
            vals = np.concatenate([yhat, [0.0]])
            return StepWeight(times, 1.0 / np.maximum(vals, self.floor))
        return self.custom

    def limit(self, censor_survival=None, survival=None):
        """Population weight the resolved weight converges to.

        ``censor_survival`` and ``survival`` are the functions
        ``G[s, inf)`` and ``F[s, inf)`` of the data-generating law.
        """
        if self.kind == "unit":
            return StepWeight.constant(1.0)
        if self.kind == "window":
            return self.resolve(None)
        if self.kind == "custom":
            return self.custom
        floor = self.floor
        if self.kind == "inverse_censoring_km":
            if censor_survival is None:
                raise ValidationError("limit of inverse_censoring_km needs censor_survival")
            return SmoothWeight(lambda s: 1.0 / np.maximum(censor_survival(s), floor))
        if censor_survival is None or survival is None:
            raise ValidationError("limit of inverse_yhat needs survival and censor_survival")
        return SmoothWeight(
            lambda s: 1.0 / np.maximum(censor_survival(s) * survival(s), floor))
