from lorasb.adapters.algebra import AdapterMethod, AdapterState, effective_weight
from lorasb.core.errors import RejectedInputError, SingularityError
from lorasb.gradients.law import optimal_correction, xs_gradient
from lorasb.kernel.matrix import matmul, relative_error, svd
from lorasb.nn.model import Batch, ModelStack, backward, forward
from lorasb.oracles.suite import (
    OracleResult, best_rank_r_oracle, fd_gradient_oracle, fd_r_gradient_oracle, lstsq_oracle,
    naive_matmul, singular_values_oracle, vector_relative_error
)

import numpy as np
import pytest

@pytest.fixture
def rng():
    return np.random.default_rng(33)

def test_oracle_result_pass_flag():
    assert OracleResult(name="x", deviation=1e-9, tolerance=1e-8).passed
    assert not OracleResult(name="x", deviation=1e-7, tolerance=1e-8).passed

class TestNaiveMatmul:
    def test_agrees_with_kernel(self, rng):
        a, b = rng.normal(size=(5, 3)), rng.normal(size=(3, 4))
        np.testing.assert_allclose(naive_matmul(a, b), matmul(a, b), rtol=1e-12)

    def test_identity(self, rng):
        m = rng.normal(size=(3, 2))
        np.testing.assert_allclose(naive_matmul(np.eye(3), m), m)

    def test_rejects_mismatch(self):
        with pytest.raises(RejectedInputError):
            naive_matmul(np.ones((2, 2)), np.ones((3, 1)))

class TestLstsqOracle:
    def test_identity_factors(self, rng):
        g = rng.normal(size=(3, 3))
        np.testing.assert_allclose(lstsq_oracle(np.eye(3), np.eye(3), g, 2.0), g / 2.0, atol=1e-12)

    def test_agrees_with_closed_form_correction(self, rng):
        for _ in range(20):
            b, a, g = rng.normal(size=(6, 3)), rng.normal(size=(3, 5)), rng.normal(size=(6, 5))
            st = AdapterState(method=AdapterMethod.LORA_SB, w0=np.zeros((6, 5)), b=b, r_mat=np.zeros((3, 3)), a=a, s=1.3, rank=3)
            closed = optimal_correction(st, xs_gradient(st, g))
            assert relative_error(closed, lstsq_oracle(b, a, g, 1.3)) < 1e-8

    def test_rank_one_scalar_form(self, rng):
        b, a, g = rng.normal(size=(4, 1)), rng.normal(size=(1, 3)), rng.normal(size=(4, 3))
        expected = (b.T @ g @ a.T) / (2.0 * np.sum(b * b) * np.sum(a * a))
        np.testing.assert_allclose(lstsq_oracle(b, a, g, 2.0), expected, rtol=1e-10)

    def test_singular_factors_raise(self):
        b = np.zeros((3, 1))
        with pytest.raises(SingularityError):
            lstsq_oracle(b, np.ones((1, 3)), np.ones((3, 3)), 1.0)

    def test_size_cap(self):
        with pytest.raises(RejectedInputError):
            lstsq_oracle(np.ones((40, 1)), np.ones((1, 2)), np.ones((40, 2)), 1.0)

class TestSpectralOracles:
    @pytest.mark.parametrize("shape", [(8, 5), (5, 8)])
    def test_singular_values_match_svd(self, rng, shape):
        m = rng.normal(size=shape)
        np.testing.assert_allclose(singular_values_oracle(m), svd(m).s, rtol=1e-8)

    def test_best_rank_r_of_full_rank_is_identity(self, rng):
        m = rng.normal(size=(4, 6))
        np.testing.assert_allclose(best_rank_r_oracle(m, 4), m, atol=1e-9)

    @pytest.mark.parametrize("shape", [(9, 6), (6, 9)])
    def test_residual_is_tail_energy(self, rng, shape):
        m = rng.normal(size=shape)
        s = svd(m).s
        residual = np.linalg.norm(m - best_rank_r_oracle(m, 2))
        assert residual == pytest.approx(np.sqrt(np.sum(s[2:] ** 2)), rel=1e-8)

    def test_rank_out_of_range(self, rng):
        with pytest.raises(RejectedInputError):
            best_rank_r_oracle(rng.normal(size=(3, 3)), 4)

class TestFiniteDifferences:
    def test_linear_layer_matches_closed_form(self, rng):
        model = ModelStack.random([3, 2], seed=1)
        batch = Batch(inputs=rng.normal(size=(5, 3)), targets=rng.normal(size=(5, 2)))
        _, cache = forward(model, batch)
        exact = backward(model, cache).weights[0]
        assert vector_relative_error(fd_gradient_oracle(model, batch, 0), exact) < 1e-6

    def test_only_requested_coordinates_are_filled(self, rng):
        model = ModelStack.random([3, 2], seed=1)
        batch = Batch(inputs=rng.normal(size=(5, 3)), targets=rng.normal(size=(5, 2)))
        grad = fd_gradient_oracle(model, batch, 0, coordinates=[(1, 2)])
        assert np.count_nonzero(grad) == 1 and grad[1, 2] != 0.0

    def test_model_is_untouched(self, rng):
        model = ModelStack.random([3, 4, 2], seed=2)
        batch = Batch(inputs=rng.normal(size=(2, 3)), targets=rng.normal(size=(2, 2)))
        before = [w.copy() for w in model.weights]
        fd_gradient_oracle(model, batch, 1)
        assert all(np.array_equal(w, b) for w, b in zip(model.weights, before))
        assert model.version == 0

    @pytest.mark.parametrize("h", [1e-9, 1e-3])
    def test_step_outside_range_rejected(self, rng, h):
        model = ModelStack.random([2, 2])
        batch = Batch(inputs=np.ones((1, 2)), targets=np.ones((1, 2)))
        with pytest.raises(RejectedInputError):
            fd_gradient_oracle(model, batch, 0, h=h)

    def test_core_gradient_matches_xs_gradient(self, rng):
        model = ModelStack.random([4, 5, 3], activation="tanh", seed=6)
        batch = Batch(inputs=rng.normal(size=(6, 4)), targets=rng.normal(size=(6, 3)))
        states = [
            AdapterState(
                method=AdapterMethod.LORA_SB, w0=w, b=rng.normal(size=(w.shape[0], 2)),
                r_mat=rng.normal(size=(2, 2)) * 0.1, a=rng.normal(size=(2, w.shape[1])), s=0.8, rank=2
            )
            for w in model.weights
        ]
        adapted = model.clone()
        adapted.set_weights([effective_weight(st) for st in states])
        _, cache = forward(adapted, batch)
        grads = backward(adapted, cache)
        for module in range(2):
            reference = fd_r_gradient_oracle(model, batch, states, module)
            assert vector_relative_error(xs_gradient(states[module], grads.weights[module]), reference) < 1e-6

    def test_core_gradient_needs_core(self, rng):
        model = ModelStack.random([2, 2])
        batch = Batch(inputs=np.ones((1, 2)), targets=np.ones((1, 2)))
        with pytest.raises(RejectedInputError):
            fd_r_gradient_oracle(model, batch, [AdapterState.full_ft(model.weights[0])], 0)

def test_vector_relative_error():
    assert vector_relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert vector_relative_error(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(np.sqrt(2.0))
