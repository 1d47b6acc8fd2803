from lorasb.core.errors import RejectedInputError, RunAbortedError
from lorasb.training.optimizers import AdamWConfig, AdamWState, adamw_step, scheduled_eta, sgd_step

import numpy as np
import pytest
import math

@pytest.fixture
def rng():
    return np.random.default_rng(8)

class TestSgdStep:
    def test_zero_gradient_leaves_parameters(self, rng):
        p = rng.normal(size=(3, 3))
        np.testing.assert_array_equal(sgd_step([p], [np.zeros((3, 3))], 0.5)[0], p)

    def test_quadratic_closed_form(self, rng):
        w, t = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
        np.testing.assert_allclose(sgd_step([w], [w - t], 0.3)[0], w - 0.3 * (w - t))

    def test_returns_new_arrays(self, rng):
        p = rng.normal(size=(2, 2))
        original = p.copy()
        sgd_step([p], [np.ones((2, 2))], 1.0)
        np.testing.assert_array_equal(p, original)

    def test_rejects_mismatched_lists(self):
        with pytest.raises(RejectedInputError):
            sgd_step([np.zeros((2, 2))], [np.zeros((2, 3))], 0.1)

class TestAdamWStep:
    def test_first_step_moves_by_eta_sign(self, rng):
        p = rng.normal(size=(4, 4))
        g = rng.normal(size=(4, 4))
        new, state = adamw_step([p], [g], AdamWState.zeros_like([p]), AdamWConfig(eps=1e-30), 0.01, 1)
        np.testing.assert_allclose(new[0], p - 0.01 * np.sign(g), rtol=1e-12)
        assert state.t == 1

    def test_first_step_magnitude_with_default_eps(self):
        p = np.zeros((1, 1))
        new, _ = adamw_step([p], [np.ones((1, 1))], AdamWState.zeros_like([p]), AdamWConfig(), 0.1, 1)
        assert new[0][0, 0] == pytest.approx(-0.1 / (1.0 + 1e-8), rel=1e-15)

    def test_matches_scalar_reference_over_ten_steps(self, rng):
        target = rng.normal(size=(2, 3))
        config = AdamWConfig(weight_decay=0.01)
        eta = 0.05

        p = np.zeros((2, 3))
        state = AdamWState.zeros_like([p])
        for t in range(1, 11):
            (p,), state = adamw_step([p], [p - target], state, config, eta, t)

        reference = np.zeros((2, 3))
        for i in range(2):
            for j in range(3):
                value, m, v = 0.0, 0.0, 0.0
                for t in range(1, 11):
                    grad = value - target[i, j]
                    m = config.beta1 * m + (1 - config.beta1) * grad
                    v = config.beta2 * v + (1 - config.beta2) * grad * grad
                    m_hat = m / (1 - config.beta1 ** t)
                    v_hat = v / (1 - config.beta2 ** t)
                    value = value - eta * m_hat / (math.sqrt(v_hat) + config.eps) - eta * config.weight_decay * value
                reference[i, j] = value
        np.testing.assert_allclose(p, reference, rtol=1e-12, atol=1e-15)

    def test_non_finite_gradient_aborts(self):
        p = np.zeros((1, 2))
        with pytest.raises(RunAbortedError) as exc:
            adamw_step([p], [np.array([[np.nan, 0.0]])], AdamWState.zeros_like([p]), AdamWConfig(), 0.1, 3)
        assert exc.value.step == 3

    def test_rejects_step_zero(self):
        p = np.zeros((1, 1))
        with pytest.raises(RejectedInputError):
            adamw_step([p], [p], AdamWState.zeros_like([p]), AdamWConfig(), 0.1, 0)

    def test_rejects_mismatched_moments(self):
        p = np.zeros((2, 2))
        with pytest.raises(RejectedInputError):
            adamw_step([p], [p], AdamWState.zeros_like([np.zeros((1, 1))]), AdamWConfig(), 0.1, 1)

class TestScheduledEta:
    def test_constant(self):
        assert all(scheduled_eta(0.1, step, 10) == 0.1 for step in range(1, 11))

    def test_linear_without_warmup_decays_to_last_step(self):
        etas = [scheduled_eta(1.0, step, 4, "linear") for step in range(1, 5)]
        assert etas == [1.0, 0.75, 0.5, 0.25]

    def test_linear_with_warmup(self):
        etas = [scheduled_eta(1.0, step, 10, "linear", warmup_ratio=0.2) for step in range(1, 11)]
        assert etas[:2] == [0.5, 1.0]
        assert etas[2] == pytest.approx(1.0)
        assert etas[-1] == pytest.approx(1.0 / 8)
        assert all(a >= b for a, b in zip(etas[1:], etas[2:]))

    def test_unknown_schedule_rejected(self):
        with pytest.raises(RejectedInputError):
            scheduled_eta(0.1, 1, 10, "cosine")
