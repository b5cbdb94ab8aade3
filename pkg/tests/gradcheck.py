"""Central finite-difference gradient checking used across the test suite.

All checks run in float64 with step h = 1e-5 and require relative error
<= 1e-4, where the relative error guards against near-zero gradients with a
unit floor in the denominator scale.
"""

import numpy as np

H_STEP = 1e-5
REL_TOL = 1e-4


def rel_error(analytic, numeric):
    denom = max(abs(analytic), abs(numeric), 1e-4)
    return abs(analytic - numeric) / denom


def numeric_grad_entry(fn, arr, idx, h=H_STEP):
    """Central difference of scalar-valued fn with respect to arr[idx], in place."""
    orig = arr[idx]
    arr[idx] = orig + h
    hi = fn()
    arr[idx] = orig - h
    lo = fn()
    arr[idx] = orig
    return (hi - lo) / (2.0 * h)


def check_grad_array(fn, arr, analytic, rng=None, max_coords=None, label=""):
    """Compare analytic gradients of ``arr`` against central differences.

    ``fn`` re-evaluates the scalar loss from current array contents.  When
    ``max_coords`` is set, a seeded random subset of coordinates is checked,
    which keeps deep recurrent checks fast without losing coverage.
    """
    assert analytic.shape == arr.shape, f"{label}: grad shape {analytic.shape} vs {arr.shape}"
    coords = list(np.ndindex(arr.shape))
    if max_coords is not None and len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        picks = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in picks]
    worst = 0.0
    for idx in coords:
        num = numeric_grad_entry(fn, arr, idx)
        err = rel_error(float(analytic[idx]), num)
        worst = max(worst, err)
        assert err <= REL_TOL, (
            f"{label}: coord {idx} analytic {analytic[idx]:.8e} vs numeric {num:.8e} "
            f"(rel err {err:.2e})"
        )
    return worst
