"""Scalar activations and their derivatives, vectorized over arrays."""

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "tanh", "linear")


def act(name, z):
    """Apply activation h0 elementwise."""
    z = np.asarray(z, dtype=np.float64)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        # symmetric branches: never exponentiate a large positive argument
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if name == "tanh":
        return np.tanh(z)
    if name == "linear":
        return z.copy()
    raise ValueError(f"unknown activation {name!r}")


def act_deriv(name, z):
    """Elementwise h0'. ReLU uses subgradient 0 at z=0."""
    z = np.asarray(z, dtype=np.float64)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "sigmoid":
        s = act("sigmoid", z)
        return s * (1.0 - s)
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if name == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")
