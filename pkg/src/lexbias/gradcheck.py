"""Central finite-difference oracle for analytic gradients.

The oracle is deliberately independent of the autodiff machinery: it only
re-evaluates the forward function at perturbed parameter values.
"""

from __future__ import annotations

import numpy as np

from .errors import OracleError
from .tensor import Tensor

DEFAULT_EPS = 1e-5


def zero_grads(params):
    for p in params.values():
        p.zero_grad()


def to_float64(params):
    """In-place promotion of a parameter dict to float64 (gradient-check mode)."""
    for p in params.values():
        p.data = p.data.astype(np.float64)


def finite_diff_check(f, params, eps=DEFAULT_EPS):
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` takes no arguments, rebuilds its graph from ``params`` (a dict of
    name -> Tensor) on every call, and returns a scalar Tensor. Returns a
    dict name -> max relative error. Raises OracleError if two evaluations
    of ``f`` at the same point disagree bitwise (non-deterministic f).
    """
    first = f().data.copy()
    second = f().data.copy()
    if first.tobytes() != second.tobytes():
        raise OracleError("f is not deterministic: two evaluations disagree")

    zero_grads(params)
    loss = f()
    loss.backward()

    report = {}
    for name, p in params.items():
        analytic = (
            np.zeros_like(p.data) if p.grad is None else p.grad.astype(np.float64)
        )
        numeric = np.zeros_like(analytic)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f().data)
            flat[i] = orig - eps
            lo = float(f().data)
            flat[i] = orig
            numeric.reshape(-1)[i] = (hi - lo) / (2.0 * eps)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
        report[name] = float(np.max(np.abs(analytic - numeric) / denom))
    return report


def assert_grads_close(f, params, tol, eps=DEFAULT_EPS):
    report = finite_diff_check(f, params, eps=eps)
    bad = {k: v for k, v in report.items() if v > tol}
    assert not bad, f"gradient check failed (tol {tol}): {bad}"
    return report


def fd_scalar(f, x, eps=DEFAULT_EPS):
    """Central difference of a scalar->scalar function at x."""
    return (f(x + eps) - f(x - eps)) / (2.0 * eps)
