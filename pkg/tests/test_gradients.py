"""Finite-difference checks for every differentiable operator, in float64.

Each operator gets 20 randomized shapes; deep recurrent checks sample a
seeded subset of coordinates per tensor to stay fast.
"""

import numpy as np
import pytest

from dialectshot.layers import (
    BatchNorm1d,
    BiGRU,
    LayerNorm,
    Linear,
    gru_cell_backward,
    gru_cell_forward,
)
from dialectshot.losses import diversity_loss, entropy_loss, smoothed_cross_entropy
from dialectshot.numerics import softmax, softmax_backward
from dialectshot.shot import HyperParams, tta_loss

from gradcheck import check_grad_array

SEEDS = list(range(20))


def _rng(seed):
    return np.random.default_rng(1000 + seed)


@pytest.mark.parametrize("seed", SEEDS)
def test_linear_gradients(seed):
    rng = _rng(seed)
    batch, d_in, d_out = rng.integers(1, 7), rng.integers(1, 7), rng.integers(1, 7)
    layer = Linear(d_in, d_out, rng, dtype=np.float64)
    x = rng.normal(size=(batch, d_in))
    proj = rng.normal(size=(batch, d_out))

    def loss():
        return float((layer.forward(x) * proj).sum())

    loss()
    dx = layer.backward(proj)
    check_grad_array(loss, x, dx, label="linear/x")
    check_grad_array(loss, layer.w, layer.grads["w"], label="linear/w")
    check_grad_array(loss, layer.b, layer.grads["b"], label="linear/b")


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("training", [True, False])
def test_batchnorm_gradients(seed, training):
    rng = _rng(seed)
    batch, dim = rng.integers(2, 8), rng.integers(1, 6)
    layer = BatchNorm1d(dim, dtype=np.float64)
    layer.running_mean[...] = rng.normal(size=dim)
    layer.running_var[...] = rng.uniform(0.5, 2.0, size=dim)
    layer.gamma[...] = rng.uniform(0.5, 1.5, size=dim)
    layer.beta[...] = rng.normal(size=dim)
    x = rng.normal(size=(batch, dim))
    proj = rng.normal(size=(batch, dim))

    def loss():
        return float((layer.forward(x, training) * proj).sum())

    loss()
    dx = layer.backward(proj)
    check_grad_array(loss, x, dx, label="batchnorm/x")
    check_grad_array(loss, layer.gamma, layer.grads["gamma"], label="batchnorm/gamma")
    check_grad_array(loss, layer.beta, layer.grads["beta"], label="batchnorm/beta")


@pytest.mark.parametrize("seed", SEEDS)
def test_layernorm_gradients(seed):
    rng = _rng(seed)
    batch, dim = rng.integers(1, 7), rng.integers(2, 6)
    layer = LayerNorm(dim, dtype=np.float64)
    layer.gamma[...] = rng.uniform(0.5, 1.5, size=dim)
    x = rng.normal(size=(batch, dim))
    proj = rng.normal(size=(batch, dim))

    def loss():
        return float((layer.forward(x, True) * proj).sum())

    loss()
    dx = layer.backward(proj)
    check_grad_array(loss, x, dx, label="layernorm/x")
    check_grad_array(loss, layer.gamma, layer.grads["gamma"], label="layernorm/gamma")
    check_grad_array(loss, layer.beta, layer.grads["beta"], label="layernorm/beta")


@pytest.mark.parametrize("seed", SEEDS)
def test_softmax_gradients(seed):
    rng = _rng(seed)
    batch, k = rng.integers(1, 7), rng.integers(2, 6)
    logits = rng.normal(size=(batch, k)) * 2
    proj = rng.normal(size=(batch, k))

    def loss():
        return float((softmax(logits) * proj).sum())

    dlogits = softmax_backward(proj, softmax(logits))
    check_grad_array(loss, logits, dlogits, label="softmax/logits")


@pytest.mark.parametrize("seed", SEEDS)
def test_gru_cell_gradients(seed):
    rng = _rng(seed)
    batch, d_in, hidden = rng.integers(1, 6), rng.integers(1, 6), rng.integers(1, 6)
    w_ih = rng.normal(size=(3 * hidden, d_in)) * 0.5
    w_hh = rng.normal(size=(3 * hidden, hidden)) * 0.5
    b_ih = rng.normal(size=3 * hidden) * 0.1
    b_hh = rng.normal(size=3 * hidden) * 0.1
    x = rng.normal(size=(batch, d_in))
    h = rng.normal(size=(batch, hidden))
    proj = rng.normal(size=(batch, hidden))

    def loss():
        h_new, _ = gru_cell_forward(x, h, w_ih, w_hh, b_ih, b_hh)
        return float((h_new * proj).sum())

    _, cache = gru_cell_forward(x, h, w_ih, w_hh, b_ih, b_hh)
    dx, dh, dw_ih, dw_hh, db_ih, db_hh = gru_cell_backward(proj, cache, w_ih, w_hh)
    check_grad_array(loss, x, dx, label="gru_cell/x")
    check_grad_array(loss, h, dh, label="gru_cell/h")
    check_grad_array(loss, w_ih, dw_ih, label="gru_cell/w_ih")
    check_grad_array(loss, w_hh, dw_hh, label="gru_cell/w_hh")
    check_grad_array(loss, b_ih, db_ih, label="gru_cell/b_ih")
    check_grad_array(loss, b_hh, db_hh, label="gru_cell/b_hh")


@pytest.mark.parametrize("seed", SEEDS)
def test_bigru_two_layer_gradients(seed):
    rng = _rng(seed)
    batch = int(rng.integers(1, 5))
    seq = int(rng.integers(1, 6))
    d_in = int(rng.integers(1, 5))
    hidden = int(rng.integers(1, 4))
    gru = BiGRU(d_in, hidden, n_layers=2, rng=rng, dtype=np.float64)
    x = rng.normal(size=(batch, seq, d_in))
    lengths = rng.integers(1, seq + 1, size=batch)
    proj = rng.normal(size=(batch, 2 * hidden))

    def loss():
        return float((gru.forward(x, lengths) * proj).sum())

    loss()
    dx = gru.backward(proj)
    coord_rng = np.random.default_rng(seed)
    check_grad_array(loss, x, dx, rng=coord_rng, max_coords=8, label="bigru/x")
    for name, w in gru.weights.items():
        check_grad_array(
            loss, w, gru.grads[name], rng=coord_rng, max_coords=6, label=f"bigru/{name}"
        )


@pytest.mark.parametrize("seed", SEEDS)
def test_smoothed_cross_entropy_gradients(seed):
    rng = _rng(seed)
    batch, k = int(rng.integers(1, 7)), int(rng.integers(2, 6))
    logits = rng.normal(size=(batch, k)) * 2
    labels = rng.integers(0, k, size=batch)
    alpha = float(rng.uniform(0.0, 0.3))

    def loss():
        return smoothed_cross_entropy(logits, labels, alpha)[0]

    _, dlogits = smoothed_cross_entropy(logits, labels, alpha)
    check_grad_array(loss, logits, dlogits, label="smoothed_ce/logits")


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("loss_fn", [entropy_loss, diversity_loss])
def test_im_loss_gradients(seed, loss_fn):
    rng = _rng(seed)
    batch, k = int(rng.integers(1, 7)), int(rng.integers(2, 6))
    probs = softmax(rng.normal(size=(batch, k)))

    def loss():
        return loss_fn(probs)[0]

    _, dprobs = loss_fn(probs)
    check_grad_array(loss, probs, dprobs, label=f"{loss_fn.__name__}/probs")


@pytest.mark.parametrize("seed", SEEDS)
def test_tta_loss_gradients(seed):
    rng = _rng(seed)
    batch, k = int(rng.integers(2, 7)), int(rng.integers(2, 5))
    logits = rng.normal(size=(batch, k)) * 2
    pseudo = rng.integers(0, k, size=batch)
    hp = HyperParams(epochs=1, gru_hidden=4, classifier_hidden=4)

    def loss():
        probs = softmax(logits)
        return tta_loss(probs, logits, pseudo, hp)[0]

    probs = softmax(logits)
    _, dlogits, _ = tta_loss(probs, logits, pseudo, hp)
    check_grad_array(loss, logits, dlogits, label="tta_loss/logits")
