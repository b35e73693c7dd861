import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lfsurv import _kernels
from lfsurv._kernels import compiled_kernels, python_kernels

needs_compiled = pytest.mark.skipif(compiled_kernels is None, reason="extension not built")


def inputs(seed, n=300, ties=True):
    rng = np.random.default_rng(seed)
    x = rng.exponential(1.0, n)
    if ties:
        x = np.round(x, 1)
    delta = (rng.random(n) < 0.6).astype(np.float64)
    order = np.lexsort((1 - delta, x))
    x, delta = x[order], delta[order]
    knots = np.unique(x[delta == 0])
    values = rng.uniform(0.1, 3.0, knots.size + 1)
    Z = rng.normal(size=(n, 3))
    eta = Z @ np.array([0.3, -0.5, 0.1])
    return x, delta, knots, values, Z, eta


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    x, delta, knots, values, Z, eta = inputs(seed, ties=seed % 2 == 0)
    Fk = np.column_stack([knots, np.sqrt(knots)])
    Fx = np.column_stack([x, np.sqrt(x)])
    assert_allclose(compiled_kernels.step_cumulative(x, knots, values, Fk, Fx),
                    python_kernels.step_cumulative(x, knots, values, Fk, Fx), rtol=1e-13)
    for a, b in zip(compiled_kernels.event_table(x, delta), python_kernels.event_table(x, delta)):
        assert_allclose(a, b)
    for a, b in zip(compiled_kernels.cox_breslow(x, delta, Z, eta),
                    python_kernels.cox_breslow(x, delta, Z, eta)):
        assert_allclose(a, b, rtol=1e-11)
    assert_allclose(compiled_kernels.cox_residuals(x, delta, Z, eta),
                    python_kernels.cox_residuals(x, delta, Z, eta), rtol=1e-10, atol=1e-13)


def test_backend_name():
    assert _kernels.BACKEND in ("cython", "python")


def test_pure_python_switch(tmp_path):
    env = dict(os.environ, LFSURV_PURE_PYTHON="1")
    code = ("import lfsurv, numpy as np; from lfsurv import _kernels;"
            "ds = lfsurv.SurvivalDataset([1,2,3],[1,0,1]);"
            "print(_kernels.BACKEND, lfsurv.fit_ml(ds, lfsurv.Exponential()).theta_hat[0])")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    name, theta = out.stdout.split()
    assert name == "python"
    assert_allclose(float(theta), 1 / 3, rtol=1e-14)
