"""Shared test utilities: finite-difference oracles and blob fixtures."""

from __future__ import annotations

import numpy as np

# Central differences at this step; checks run on float64 copies of the ops
# so the 1e-3 relative tolerance is meaningful.
FD_STEP = 1e-3
FD_RTOL = 1e-3
# Coordinates where both gradients are below this magnitude are compared
# with an absolute tolerance of FD_RTOL * FD_FLOOR instead.
FD_FLOOR = 1e-2


def finite_difference(f, arrays, h=FD_STEP):
    """Central-difference gradient of scalar ``f()`` w.r.t. each array.

    Arrays are perturbed in place and restored; they must be float64 for the
    step size to be meaningful.
    """
    grads = []
    for arr in arrays:
        assert arr.dtype == np.float64, "finite differences need float64 arrays"
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def finite_difference_sampled(f, arrays, rng, coords_per_array=25, h=FD_STEP):
    """Like ``finite_difference`` but only on sampled coordinates.

    Returns a list of (flat_indices, fd_values) per array; used for larger
    composites where full-coordinate sweeps are too slow.
    """
    out = []
    for arr in arrays:
        assert arr.dtype == np.float64
        flat = arr.reshape(-1)
        n = min(coords_per_array, flat.size)
        idx = rng.choice(flat.size, size=n, replace=False)
        vals = np.zeros(n)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            fp = f()
            flat[i] = orig - h
            fm = f()
            flat[i] = orig
            vals[j] = (fp - fm) / (2.0 * h)
        out.append((idx, vals))
    return out


def assert_grads_close(analytic, fd, rtol=FD_RTOL, floor=FD_FLOOR, context=""):
    analytic = np.asarray(analytic).reshape(-1)
    fd = np.asarray(fd).reshape(-1)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), floor)
    rel = np.abs(analytic - fd) / denom
    worst = int(np.argmax(rel))
    assert rel.max() <= rtol, (
        f"{context} gradient mismatch at flat index {worst}: "
        f"analytic={analytic[worst]:.6g} fd={fd[worst]:.6g} "
        f"rel={rel.max():.3g}"
    )


def relu_preactivation_margin(network, x):
    """Smallest |input| seen by any ReLU; forward must have margin for FD."""
    network.forward(x, training=False, capture_inputs=True)
    margins = [
        np.abs(network.layer_inputs[i]).min()
        for i, layer in enumerate(network.layers)
        if layer.kind == "relu"
    ]
    return min(margins) if margins else np.inf


def random_probs(rng, k, dtype=np.float64):
    p = rng.random(k) + 1e-3
    return (p / p.sum()).astype(dtype)
