"""Scalar kernels shared by every loss: sigmoid, probability clamping, -log.

All functions accept Python floats or numpy arrays and compute in float64.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-12


def sigmoid(z):
    """Logistic function, overflow-safe for any finite input.

    Uses ``1 / (1 + exp(-z))`` for ``z >= 0`` and ``exp(z) / (1 + exp(z))``
    otherwise, so ``exp`` is only ever called on non-positive arguments.
    """
    z_arr = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z_arr)):
        raise ValueError("sigmoid requires finite logits")
    out = np.empty_like(z_arr)
    pos = z_arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z_arr[pos]))
    ez = np.exp(z_arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    if np.ndim(z) == 0:
        return float(out)
    return out


def sigmoid_grad(p):
    """d sigmoid / dz expressed through the probability: p (1 - p)."""
    p = np.asarray(p, dtype=np.float64)
    out = p * (1.0 - p)
    return float(out) if out.ndim == 0 else out


def clamp_prob(p, eps: float = EPS):
    """Clip ``p`` into ``[eps, 1 - eps]``."""
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 0.5), got {eps}")
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(np.isnan(p_arr)):
        raise ValueError("invalid probability: NaN")
    out = np.minimum(np.maximum(p_arr, eps), 1.0 - eps)
    return float(out) if out.ndim == 0 else out


def safe_neg_log(p):
    """Return ``-ln(p)`` for an already clamped probability."""
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(p_arr <= 0.0):
        raise ValueError("log singularity: probability must be > 0")
    out = -np.log(p_arr)
    # -ln(1) is -0.0; keep the result non-negative in sign as well
    out = out + 0.0
    return float(out) if out.ndim == 0 else out


def safe_neg_log1m(p):
    """Return ``-ln(1 - p)`` for an already clamped probability."""
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(p_arr >= 1.0):
        raise ValueError("log singularity: probability must be < 1")
    out = -np.log1p(-p_arr) + 0.0
    return float(out) if out.ndim == 0 else out
