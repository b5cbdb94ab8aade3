"""Differentiable-array primitives: softmax, AdamW, and the annealed learning-rate schedule.

Arrays are plain numpy ndarrays, float32 for training and float64 when a
caller needs tight numerical checks.  Every operator here carries an explicit
backward companion; there is no graph-building autodiff.
"""

import numpy as np


class NumericsError(ValueError):
    """Raised on invalid numeric inputs (non-finite values, bad shapes, bad ranges)."""


def require_finite(arr, what="array"):
    """Raise :class:`NumericsError` if ``arr`` contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"{what} contains non-finite values")


def lr_at(p, eta0):
    """Annealed learning rate eta0 / (1 + 10 p)^0.75 for progress p in [0, 1].

    Strictly decreasing in p.  ``eta0 == 0`` is allowed and yields 0 (used to
    turn an optimization run into a parameter no-op).
    """
    if not 0.0 <= p <= 1.0:
        raise NumericsError(f"progress p={p} outside [0, 1]")
    if eta0 < 0.0:
        raise NumericsError(f"base learning rate eta0={eta0} must be >= 0")
    return eta0 / (1.0 + 10.0 * p) ** 0.75


def softmax(logits):
    """Row-wise softmax of a (batch, K) array, stable under per-row shifts."""
    logits = np.asarray(logits)
    require_finite(logits, "softmax input")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(dprobs, probs):
    """Gradient of a loss w.r.t. logits given its gradient w.r.t. softmax output."""
    inner = (dprobs * probs).sum(axis=-1, keepdims=True)
    return probs * (dprobs - inner)


class AdamW:
    """AdamW with decoupled weight decay over a named parameter dict.

    Moment slots are allocated lazily per parameter name and live in the same
    dtype as the parameter.  ``step`` mutates parameters in place and is
    deterministic: identical inputs produce bit-identical outputs.
    """

    def __init__(self, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads, lr):
        """Apply one update to every parameter that has a gradient entry.

        Weight decay is decoupled: applied directly to the weights, scaled by
        ``lr``, never routed through the moment estimates.
        """
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name in sorted(grads):
            if name not in params:
                raise NumericsError(f"gradient for unknown parameter {name!r}")
            p = params[name]
            g = grads[name]
            if g.shape != p.shape:
                raise NumericsError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{name!r} shape {p.shape}"
                )
            require_finite(g, f"gradient for {name!r}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            if self.weight_decay:
                p -= (lr * self.weight_decay) * p
            p -= (lr * (m_hat / (np.sqrt(v_hat) + self.eps))).astype(p.dtype)
