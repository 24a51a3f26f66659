import os

# single-threaded BLAS keeps CPU-time budgets equal to wall time and makes
# batched reductions reproducible; must land before numpy initializes
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from exprlab.sampling import rng_from_seed


@pytest.fixture
def rng():
    return rng_from_seed(12345)


def away_from_kinks(fnn, x, margin):
    """True when every ReLU pre-activation at x has magnitude above margin.

    Central differences are exact for piecewise-linear nets as long as no
    unit crosses its kink inside the stencil, which this guards for steps
    well below margin / lipschitz.
    """
    h = np.asarray(x, dtype=np.float64)
    for layer in fnn.layers:
        z = layer.w @ h + layer.b
        if layer.act == "relu":
            if (np.abs(z) < margin).any():
                return False
            h = np.maximum(z, 0.0)
        else:
            h = z
    return True


def central_diff_param_grads(eval_scalar, arrays, h=1e-6):
    """Central-difference gradient of eval_scalar() w.r.t. each array entry."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat = a.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = eval_scalar()
            flat[i] = old - h
            dn = eval_scalar()
            flat[i] = old
            gflat[i] = (up - dn) / (2 * h)
        grads.append(g)
    return grads
