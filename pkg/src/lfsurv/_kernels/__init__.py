"""Inner-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it was built and importable, unless the
environment variable ``LFSURV_PURE_PYTHON`` is set to a true value. Both
backends expose the same four functions; ``BACKEND`` names the active one.
"""
import os

from . import _pykernels as python_kernels

try:
    from . import _ckernels as compiled_kernels
except ImportError:  # extension not built
    compiled_kernels = None

_force_python = os.environ.get("LFSURV_PURE_PYTHON", "").lower() in ("1", "true", "yes")

if compiled_kernels is not None and not _force_python:
    _active = compiled_kernels
    BACKEND = "cython"
else:
    _active = python_kernels
    BACKEND = "python"

step_cumulative = _active.step_cumulative
event_table = _active.event_table
cox_breslow = _active.cox_breslow
cox_residuals = _active.cox_residuals

__all__ = ["BACKEND", "step_cumulative", "event_table", "cox_breslow",
           "cox_residuals", "python_kernels", "compiled_kernels"]
