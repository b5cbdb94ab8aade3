import numpy as np
import pytest

from dialectshot.numerics import AdamW, NumericsError, lr_at, softmax, softmax_backward


class TestLrSchedule:
    def test_progress_zero_returns_base_rate(self):
        assert lr_at(0.0, 0.001) == 0.001

    def test_frozen_values(self):
        # 0.001 / 2**0.75 and 0.001 / 11**0.75, evaluated as exact scalar powers
        assert lr_at(0.1, 0.001) == pytest.approx(5.946035575013606e-04, abs=1e-12)
        assert lr_at(1.0, 0.001) == pytest.approx(1.6556002607617017e-04, abs=1e-12)

    def test_monotonically_decreasing_on_grid(self):
        grid = np.linspace(0.0, 1.0, 1000)
        values = [lr_at(p, 0.001) for p in grid]
        assert all(a > b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("p", [-0.01, 1.01, 2.0])
    def test_rejects_progress_outside_unit_interval(self, p):
        with pytest.raises(NumericsError):
            lr_at(p, 0.001)

    def test_zero_base_rate_allowed(self):
        assert lr_at(0.5, 0.0) == 0.0
        with pytest.raises(NumericsError):
            lr_at(0.5, -1e-3)


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax(np.array([[0.0, 0.0]])), [[0.5, 0.5]])

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        logits = rng.normal(size=(5, 4))
        shifted = logits + rng.normal(size=(5, 1))
        np.testing.assert_allclose(softmax(logits), softmax(shifted), atol=1e-12)

    def test_closed_form_exponentials(self):
        np.testing.assert_allclose(
            softmax(np.array([[np.log(2.0), 0.0]])), [[2.0 / 3.0, 1.0 / 3.0]], atol=1e-12
        )

    def test_rows_normalized(self):
        rng = np.random.default_rng(7)
        probs = softmax(rng.normal(size=(20, 6)) * 10)
        assert np.all(probs >= 0)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)

    def test_rejects_nan(self):
        with pytest.raises(NumericsError):
            softmax(np.array([[0.0, np.nan]]))


class TestAdamW:
    def _params(self, value=1.0):
        return {"w": np.full(3, value, dtype=np.float64)}

    def test_zero_gradient_no_decay_leaves_params(self):
        params = self._params()
        opt = AdamW(weight_decay=0.0)
        opt.step(params, {"w": np.zeros(3)}, lr=0.001)
        np.testing.assert_array_equal(params["w"], np.full(3, 1.0))

    def test_zero_gradient_with_decay_scales_weights(self):
        params = self._params(2.0)
        opt = AdamW(weight_decay=0.5)
        opt.step(params, {"w": np.zeros(3)}, lr=0.01)
        np.testing.assert_allclose(params["w"], 2.0 * (1 - 0.01 * 0.5), rtol=1e-12)

    def test_first_step_hand_computed(self):
        # w0 = 0, g = 1: bias-corrected m_hat = v_hat = 1, so the update is
        # -lr / (1 + eps) regardless of weight decay.
        params = {"w": np.zeros(1, dtype=np.float64)}
        opt = AdamW()
        opt.step(params, {"w": np.ones(1)}, lr=0.001)
        assert params["w"][0] == pytest.approx(-0.001, abs=1e-10)

    def test_deterministic_bitwise(self):
        rng = np.random.default_rng(11)
        grads = [{"w": rng.normal(size=4)} for _ in range(5)]

        def run():
            params = {"w": np.linspace(-1, 1, 4)}
            opt = AdamW()
            for g in grads:
                opt.step(params, {"w": g["w"].copy()}, lr=0.01)
            return params["w"]

        first, second = run(), run()
        assert first.tobytes() == second.tobytes()

    def test_shape_mismatch_rejected(self):
        opt = AdamW()
        with pytest.raises(NumericsError):
            opt.step(self._params(), {"w": np.zeros(4)}, lr=0.01)

    def test_nonfinite_gradient_rejected(self):
        opt = AdamW()
        with pytest.raises(NumericsError):
            opt.step(self._params(), {"w": np.array([1.0, np.inf, 0.0])}, lr=0.01)


def test_softmax_backward_matches_jacobian():
    rng = np.random.default_rng(5)
    logits = rng.normal(size=(4, 3))
    probs = softmax(logits)
    dprobs = rng.normal(size=(4, 3))
    got = softmax_backward(dprobs, probs)
    # Row-wise explicit Jacobian: J[j, k] = p_j (delta_jk - p_k)
    for i in range(4):
        p = probs[i]
        jac = np.diag(p) - np.outer(p, p)
        np.testing.assert_allclose(got[i], jac @ dprobs[i], atol=1e-12)
