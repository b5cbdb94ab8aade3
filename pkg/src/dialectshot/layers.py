"""Forward/backward layer implementations: linear, normalization, and the bidirectional GRU.

Each layer holds its parameters as numpy arrays, caches activations on
``forward``, and accumulates parameter gradients into ``self.grads`` on
``backward``.  Gate weights follow the convention where the reset gate is
applied to the hidden projection after the matmul:

    r = sigmoid(x Wi_r + h Wh_r + bi_r + bh_r)
    z = sigmoid(x Wi_z + h Wh_z + bi_z + bh_z)
    n = tanh(x Wi_n + bi_n + r * (h Wh_n + bh_n))
    h' = (1 - z) * n + z * h
"""

import numpy as np

from .numerics import NumericsError


def glorot_uniform(rng, fan_in, fan_out, shape, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def sigmoid(x):
    # Clipped at +-60 where the true value is already 0/1 to machine precision.
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


class Linear:
    """Affine map y = x @ w + b with w of shape (in_dim, out_dim)."""

    def __init__(self, in_dim, out_dim, rng, dtype=np.float32):
        self.w = glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim), dtype)
        self.b = np.zeros(out_dim, dtype=dtype)
        self.grads = {}
        self._x = None

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        if self._x is None:
            raise NumericsError("linear backward called without a forward pass")
        self.grads["w"] = self._x.T @ dy
        self.grads["b"] = dy.sum(axis=0)
        return dy @ self.w.T

    def params(self):
        return {"w": self.w, "b": self.b}


class BatchNorm1d:
    """1-D batch normalization with running statistics.

    Training mode normalizes with batch statistics (biased variance) and
    updates running statistics (unbiased variance, momentum 0.1).  Evaluation
    mode normalizes with the running statistics and never mutates them.
    """

    def __init__(self, dim, dtype=np.float32, momentum=0.1, eps=1e-5):
        self.gamma = np.ones(dim, dtype=dtype)
        self.beta = np.zeros(dim, dtype=dtype)
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.grads = {}
        self._cache = None

    def forward(self, x, training):
        if training:
            n = x.shape[0]
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv_std
            # n == 1 has no unbiased variance estimate; fall back to biased.
            unbiased = var * (n / (n - 1.0)) if n > 1 else var
            self.running_mean += self.momentum * (mean - self.running_mean)
            self.running_var += self.momentum * (unbiased - self.running_var)
            self._cache = ("train", xhat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean) * inv_std
            self._cache = ("eval", xhat, inv_std)
        return self.gamma * xhat + self.beta

    def backward(self, dy):
        if self._cache is None:
            raise NumericsError("batchnorm backward called without a forward pass")
        mode, xhat, inv_std = self._cache
        self.grads["gamma"] = (dy * xhat).sum(axis=0)
        self.grads["beta"] = dy.sum(axis=0)
        dxhat = dy * self.gamma
        if mode == "eval":
            return dxhat * inv_std
        n = dy.shape[0]
        return (inv_std / n) * (
            n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def stats(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class LayerNorm:
    """Per-example normalization over the feature axis; no running statistics."""

    def __init__(self, dim, dtype=np.float32, eps=1e-5):
        self.gamma = np.ones(dim, dtype=dtype)
        self.beta = np.zeros(dim, dtype=dtype)
        self.eps = eps
        self.grads = {}
        self._cache = None

    def forward(self, x, training):
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        self._cache = (xhat, inv_std)
        return self.gamma * xhat + self.beta

    def backward(self, dy):
        if self._cache is None:
            raise NumericsError("layernorm backward called without a forward pass")
        xhat, inv_std = self._cache
        self.grads["gamma"] = (dy * xhat).sum(axis=0)
        self.grads["beta"] = dy.sum(axis=0)
        dxhat = dy * self.gamma
        d = dy.shape[-1]
        return (inv_std / d) * (
            d * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def stats(self):
        return {}


class Identity:
    """No-op normalization stand-in."""

    def __init__(self):
        self.grads = {}

    def forward(self, x, training):
        return x

    def backward(self, dy):
        return dy

    def params(self):
        return {}

    def stats(self):
        return {}


def gru_cell_forward(x, h, w_ih, w_hh, b_ih, b_hh):
    """One GRU step on a batch; returns the new hidden state and a backward cache.

    ``w_ih`` is (3H, in_dim) and ``w_hh`` is (3H, H), gate blocks ordered
    reset, update, candidate.
    """
    gi = x @ w_ih.T + b_ih
    gh = h @ w_hh.T + b_hh
    i_r, i_z, i_n = np.split(gi, 3, axis=-1)
    h_r, h_z, h_n = np.split(gh, 3, axis=-1)
    r = sigmoid(i_r + h_r)
    z = sigmoid(i_z + h_z)
    n = np.tanh(i_n + r * h_n)
    h_new = (1.0 - z) * n + z * h
    cache = (x, h, r, z, n, h_n)
    return h_new, cache


def gru_cell_backward(dh_new, cache, w_ih, w_hh):
    """Backward of :func:`gru_cell_forward`.

    Returns ``(dx, dh_prev, dw_ih, dw_hh, db_ih, db_hh)`` for the step.
    """
    x, h, r, z, n, h_n = cache
    dn = dh_new * (1.0 - z)
    dz = dh_new * (h - n)
    dh_prev = dh_new * z

    da_n = dn * (1.0 - n * n)
    dr = da_n * h_n
    dh_n = da_n * r
    da_r = dr * r * (1.0 - r)
    da_z = dz * z * (1.0 - z)

    dgi = np.concatenate([da_r, da_z, da_n], axis=-1)
    dgh = np.concatenate([da_r, da_z, dh_n], axis=-1)

    dx = dgi @ w_ih
    dh_prev = dh_prev + dgh @ w_hh
    dw_ih = dgi.T @ x
    dw_hh = dgh.T @ h
    db_ih = dgi.sum(axis=0)
    db_hh = dgh.sum(axis=0)
    return dx, dh_prev, dw_ih, dw_hh, db_ih, db_hh


class BiGRU:
    """Stacked bidirectional GRU over padded sequences.

    ``forward`` consumes (batch, S, in_dim) plus per-example valid lengths and
    returns a (batch, 2H) feature: the top layer's forward state at each
    example's last valid position concatenated with its backward state at
    position 0.  Positions at or beyond an example's length freeze the hidden
    state, so padding never influences the feature.
    """

    DIRS = ("f", "b")

    def __init__(self, in_dim, hidden, n_layers=2, rng=None, dtype=np.float32):
        self.in_dim = in_dim
        self.hidden = hidden
        self.n_layers = n_layers
        self.weights = {}
        rng = rng if rng is not None else np.random.default_rng(0)
        for layer in range(n_layers):
            d_in = in_dim if layer == 0 else 2 * hidden
            for dr in self.DIRS:
                w_ih = np.concatenate(
                    [glorot_uniform(rng, d_in, hidden, (hidden, d_in), dtype) for _ in range(3)],
                    axis=0,
                )
                w_hh = np.concatenate(
                    [glorot_uniform(rng, hidden, hidden, (hidden, hidden), dtype) for _ in range(3)],
                    axis=0,
                )
                key = f"l{layer}.{dr}"
                self.weights[f"{key}.w_ih"] = w_ih
                self.weights[f"{key}.w_hh"] = w_hh
                self.weights[f"{key}.b_ih"] = np.zeros(3 * hidden, dtype=dtype)
                self.weights[f"{key}.b_hh"] = np.zeros(3 * hidden, dtype=dtype)
        self.grads = {}
        self._cache = None

    def params(self):
        return dict(self.weights)

    def _run_direction(self, key, x, mask, reverse):
        batch, seq, _ = x.shape
        dtype = x.dtype
        w_ih = self.weights[f"{key}.w_ih"]
        w_hh = self.weights[f"{key}.w_hh"]
        b_ih = self.weights[f"{key}.b_ih"]
        b_hh = self.weights[f"{key}.b_hh"]
        h = np.zeros((batch, self.hidden), dtype=dtype)
        out = np.zeros((batch, seq, self.hidden), dtype=dtype)
        steps = []
        order = range(seq - 1, -1, -1) if reverse else range(seq)
        for t in order:
            h_new, cache = gru_cell_forward(x[:, t, :], h, w_ih, w_hh, b_ih, b_hh)
            m = mask[:, t : t + 1]
            h = m * h_new + (1.0 - m) * h
            out[:, t, :] = h
            steps.append((t, cache, m))
        return out, steps

    def _backward_direction(self, key, steps, d_out, in_dim):
        w_ih = self.weights[f"{key}.w_ih"]
        w_hh = self.weights[f"{key}.w_hh"]
        batch = d_out.shape[0]
        seq = d_out.shape[1]
        dtype = d_out.dtype
        dx_full = np.zeros((batch, seq, in_dim), dtype=dtype)
        dh = np.zeros((batch, self.hidden), dtype=dtype)
        g = self.grads
        for t, cache, m in reversed(steps):
            dh_t = dh + d_out[:, t, :]
            dh_new = m * dh_t
            dx, dh_prev, dw_ih, dw_hh, db_ih, db_hh = gru_cell_backward(
                dh_new, cache, w_ih, w_hh
            )
            dx_full[:, t, :] = dx
            dh = (1.0 - m) * dh_t + dh_prev
            g[f"{key}.w_ih"] += dw_ih
            g[f"{key}.w_hh"] += dw_hh
            g[f"{key}.b_ih"] += db_ih
            g[f"{key}.b_hh"] += db_hh
        return dx_full

    def forward(self, x, lengths):
        batch, seq, in_dim = x.shape
        if in_dim != self.in_dim:
            raise NumericsError(f"input dim {in_dim} does not match GRU in_dim {self.in_dim}")
        lengths = np.asarray(lengths)
        if lengths.shape != (batch,):
            raise NumericsError("lengths must be one per example")
        if np.any(lengths < 1) or np.any(lengths > seq):
            bad = int(np.argmax((lengths < 1) | (lengths > seq)))
            raise NumericsError(f"example {bad} has invalid length {int(lengths[bad])}")
        mask = (np.arange(seq)[None, :] < lengths[:, None]).astype(x.dtype)
        layer_in = x
        caches = []
        for layer in range(self.n_layers):
            fwd_out, fwd_steps = self._run_direction(f"l{layer}.f", layer_in, mask, reverse=False)
            bwd_out, bwd_steps = self._run_direction(f"l{layer}.b", layer_in, mask, reverse=True)
            caches.append((layer_in.shape[-1], fwd_steps, bwd_steps))
            layer_in = np.concatenate([fwd_out, bwd_out], axis=-1)
        self._cache = (caches, batch, seq)
        # Forward state is frozen past each length, so the last position holds
        # the state at length-1; the backward pass ends at position 0.
        return np.concatenate(
            [layer_in[:, -1, : self.hidden], layer_in[:, 0, self.hidden :]], axis=-1
        )

    def backward(self, dfeat):
        if self._cache is None:
            raise NumericsError("GRU backward called without a forward pass")
        caches, batch, seq = self._cache
        dtype = dfeat.dtype
        self.grads = {name: np.zeros_like(w) for name, w in self.weights.items()}
        d_out = np.zeros((batch, seq, 2 * self.hidden), dtype=dtype)
        d_out[:, -1, : self.hidden] = dfeat[:, : self.hidden]
        d_out[:, 0, self.hidden :] = dfeat[:, self.hidden :]
        for layer in range(self.n_layers - 1, -1, -1):
            in_dim, fwd_steps, bwd_steps = caches[layer]
            dx_f = self._backward_direction(f"l{layer}.f", fwd_steps, d_out[..., : self.hidden], in_dim)
            dx_b = self._backward_direction(f"l{layer}.b", bwd_steps, d_out[..., self.hidden :], in_dim)
            d_out = dx_f + dx_b
        return d_out
