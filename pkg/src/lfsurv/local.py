"""Local likelihood: a parameter curve ``theta_hat(s)`` over time.

At each grid time ``s`` the weighted likelihood is maximised with weight
``W(u) = K(s - u)``. Kernels:

``uniform_window``
    Indicator of ``(s - h/2, s + h/2]``. For the exponential family the
    estimate is events in the window over exposure in the window.
``epanechnikov``
    ``1 - (u/h)^2`` on ``[-h, h]``.
``gaussian_truncated``
    Normal density with standard deviation ``h/2``, cut at ``+-h``.

Kernel constants are irrelevant because scaling ``W`` does not move the
maximiser. Near the ends of ``[0, T]`` the kernel is simply cut off.
"""
import csv
from dataclasses import dataclass

import numpy as np

from ._defaults import DEFAULTS
from .errors import LFSurvError, ValidationError
from .fit import estimate
from .weights import SmoothWeight, StepWeight, WeightPlan

KERNELS = ("uniform_window", "epanechnikov", "gaussian_truncated")


def kernel_function(kernel, h):
    """Vectorised ``u -> K(u)`` for a built-in kernel with bandwidth ``h``."""
    if kernel == "uniform_window":
        return lambda u: ((u >= -h / 2) & (u < h / 2)).astype(np.float64)
    if kernel == "epanechnikov":
        return lambda u: np.where(np.abs(u) <= h, 1.0 - (u / h) ** 2, 0.0)
    if kernel == "gaussian_truncated":
        sd = h / 2.0
        return lambda u: np.where(np.abs(u) <= h, np.exp(-0.5 * (u / sd) ** 2), 0.0)
    raise ValidationError(f"unknown kernel {kernel!r}; choose from {KERNELS}")


def local_weight(kernel, s, h):
    """Weight ``u -> K(s - u)`` centred at ``s``."""
    if kernel == "uniform_window":
        a, b = s - h / 2.0, s + h / 2.0
        if b <= 0:
            return StepWeight.constant(0.0)
        if a <= 0:
            return StepWeight(np.array([b]), np.array([1.0, 0.0]))
        return StepWeight(np.array([a, b]), np.array([0.0, 1.0, 0.0]))
    K = kernel_function(kernel, h)
    return SmoothWeight(lambda u: K(s - u), support=(max(0.0, s - h), s + h),
                        breakpoints=np.array([s]) if s > 0 else np.zeros(0))


@dataclass
class LocalCurve:
    """Local estimates on a grid; ``None`` where no estimate exists."""

    grid: np.ndarray
    estimates: list
    bandwidth: float
    kernel: str
    family: str
    param_names: tuple = ()

    def as_array(self):
        p = len(self.param_names) or 1
        return np.array([np.full(p, np.nan) if e is None else e for e in self.estimates])

    def to_dict(self):
        return {"grid": self.grid.tolist(), "bandwidth": self.bandwidth, "kernel": self.kernel,
                "family": self.family, "param_names": list(self.param_names),
                "estimates": [None if e is None else e.tolist() for e in self.estimates]}

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["s"] + list(self.param_names))
            for s, e in zip(self.grid, self.estimates):
                vals = [""] * len(self.param_names) if e is None else [repr(float(v)) for v in e]
                wr.writerow([repr(float(s))] + vals)


def fit_local(ds, fam, grid=None, h=None, kernel="uniform_window"):
    """Kernel-weighted likelihood estimates along ``grid``.

    Parameters
    ----------
    ds : SurvivalDataset
    fam : HazardFamily
    grid : array_like, optional
        Strictly increasing times in ``[0, T]``; defaults to 50 equispaced
        points.
    h : float
        Bandwidth, positive.
    kernel : str
        One of :data:`KERNELS`.

    Returns
    -------
    LocalCurve
        Grid points whose window holds no exposure or no events get ``None``.
    """
    if h is None or not h > 0:
        raise ValidationError("bandwidth h must be positive")
    if kernel not in KERNELS:
        raise ValidationError(f"unknown kernel {kernel!r}; choose from {KERNELS}")
    T = ds.horizon
    if grid is None:
        grid = np.linspace(0.0, T, DEFAULTS["local_grid_size"])
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must be strictly increasing")
    if grid[0] < 0 or grid[-1] > T:
        raise ValidationError("grid must lie within [0, T]")
    out = []
    prev = None
    for s in grid:
        w = local_weight(kernel, float(s), float(h))
        plan = WeightPlan("custom", custom=w)
        try:
            th = estimate(ds, fam, plan, init=prev)
        except LFSurvError:
            try:
                th = estimate(ds, fam, plan) if prev is not None else None
            except LFSurvError:
                th = None
        out.append(th)
        if th is not None:
            prev = th
    return LocalCurve(grid=grid, estimates=out, bandwidth=float(h), kernel=kernel,
                      family=fam.name, param_names=tuple(fam.param_names))
