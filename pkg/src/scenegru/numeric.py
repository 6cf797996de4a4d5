"""Small dense-numerics kernels shared by every other module.

Everything here operates on plain float64 numpy arrays: 1-D arrays play the
role of vectors, 2-D arrays the role of row-major matrices.  The module also
pins the project's single source of randomness (:func:`seeded_rng`) and the
finite-difference gradient oracle used to validate analytic gradients.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = [
    "seeded_rng",
    "affine",
    "sigmoid",
    "tanh_elem",
    "softmax",
    "glorot_init",
    "finite_diff_grad",
]

# Largest float64 strictly below 1; keeps sigmoid/tanh outputs inside the
# open intervals (0,1) and (-1,1) even for saturating inputs.
_ONE_MINUS = np.nextafter(1.0, 0.0)
_TINY = np.finfo(np.float64).tiny


def seeded_rng(seed: int) -> np.random.Generator:
    """Return the project-wide deterministic generator for ``seed``.

    A single fixed bit generator (PCG64) is used everywhere so that equal
    seeds give equal draw sequences across runs and platforms.
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def affine(w: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Compute ``w @ x + b`` with explicit shape checking.

    Parameters
    ----------
    w : (m, n) array
    x : (n,) array
    b : (m,) array
    """
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError(f"affine: expected 2-D weight matrix, got shape {w.shape}")
    if w.shape[1] != x.shape[0]:
        raise ValueError(
            f"affine: weight matrix has {w.shape[1]} columns but input vector "
            f"has {x.shape[0]} entries"
        )
    if w.shape[0] != b.shape[0]:
        raise ValueError(
            f"affine: weight matrix has {w.shape[0]} rows but bias vector "
            f"has {b.shape[0]} entries"
        )
    return w @ x + b


def sigmoid(v: np.ndarray) -> np.ndarray:
    """Elementwise logistic function, clamped to the open interval (0, 1).

    Computed in the numerically stable branch form so large |v| neither
    overflows nor produces values of exactly 0 or 1.
    """
    v = np.asarray(v, dtype=np.float64)
    out = np.empty_like(v, dtype=np.float64)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return np.clip(out, _TINY, _ONE_MINUS)


def tanh_elem(v: np.ndarray) -> np.ndarray:
    """Elementwise tanh, clamped to the open interval (-1, 1)."""
    v = np.asarray(v, dtype=np.float64)
    return np.clip(np.tanh(v), -_ONE_MINUS, _ONE_MINUS)


def softmax(o: np.ndarray) -> np.ndarray:
    """Max-stabilized softmax along the last axis.

    Every output component is positive and each slice along the last axis
    sums to 1 within rounding; the argmax of the input is preserved.
    """
    o = np.asarray(o, dtype=np.float64)
    shifted = o - o.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def glorot_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform Glorot initialization: entries in +-sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"glorot_init: dimensions must be >= 1, got {rows}x{cols}")
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def finite_diff_grad(
    f: Callable[[np.ndarray], float], theta: np.ndarray, eps: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector.

    Used as the independent oracle against which analytic gradients are
    checked; it never shares code with any backward pass.
    """
    if eps <= 0:
        raise ValueError(f"finite_diff_grad: eps must be positive, got {eps}")
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        bump = np.zeros_like(theta)
        bump.flat[i] = eps
        hi = f(theta + bump)
        lo = f(theta - bump)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError(
                f"finite_diff_grad: non-finite function value at coordinate {i}"
            )
        grad.flat[i] = (hi - lo) / (2.0 * eps)
    return grad
