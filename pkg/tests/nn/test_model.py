from lorasb.core.errors import RejectedInputError
from lorasb.nn.model import Batch, LayerSpec, ModelStack, backward, evaluate, forward, layer_deltas, loss_value
from lorasb.oracles.suite import fd_gradient_oracle, vector_relative_error

from pydantic import ValidationError
import numpy as np
import pytest

@pytest.fixture
def rng():
    return np.random.default_rng(7)

@pytest.fixture
def tanh_model():
    return ModelStack.random([4, 5, 3], activation="tanh", has_bias=True, seed=11)

@pytest.fixture
def batch(rng):
    return Batch(inputs=rng.normal(size=(6, 4)), targets=rng.normal(size=(6, 3)))

class TestStructure:
    def test_random_stack_shapes(self, tanh_model):
        assert tanh_model.weight_shapes == [(5, 4), (3, 5)]
        assert tanh_model.in_dim == 4
        assert tanh_model.out_dim == 3
        assert tanh_model.layers[-1].activation == "identity"

    def test_random_is_seeded(self):
        a = ModelStack.random([3, 2], seed=5)
        b = ModelStack.random([3, 2], seed=5)
        assert np.array_equal(a.weights[0], b.weights[0])

    def test_missing_biases_are_zero_filled(self):
        model = ModelStack(
            layers=[LayerSpec(in_dim=2, out_dim=3, has_bias=True)],
            weights=[np.zeros((3, 2))]
        )
        np.testing.assert_array_equal(model.biases[0], np.zeros(3))

    def test_layers_must_chain(self):
        with pytest.raises(ValidationError):
            ModelStack(
                layers=[LayerSpec(in_dim=2, out_dim=3), LayerSpec(in_dim=4, out_dim=1)],
                weights=[np.zeros((3, 2)), np.zeros((1, 4))]
            )

    def test_weight_shape_must_match_layer(self):
        with pytest.raises(ValidationError):
            ModelStack(layers=[LayerSpec(in_dim=2, out_dim=3)], weights=[np.zeros((2, 3))])

    def test_batch_rows_must_match(self):
        with pytest.raises(ValidationError):
            Batch(inputs=np.zeros((3, 2)), targets=np.zeros((2, 1)))

    def test_set_weight_bumps_version(self, tanh_model):
        version = tanh_model.version
        tanh_model.set_weight(0, np.ones((5, 4)))
        assert tanh_model.version == version + 1

    def test_set_weight_rejects_wrong_shape(self, tanh_model):
        with pytest.raises(RejectedInputError):
            tanh_model.set_weight(0, np.ones((4, 5)))

    def test_clone_is_independent(self, tanh_model):
        clone = tanh_model.clone()
        clone.set_weight(1, np.zeros((3, 5)))
        assert not np.array_equal(tanh_model.weights[1], clone.weights[1])

class TestForward:
    def test_linear_mse_value(self):
        model = ModelStack(layers=[LayerSpec(in_dim=2, out_dim=1)], weights=[np.array([[1.0, 2.0]])])
        batch = Batch(inputs=np.array([[1.0, 1.0], [0.0, 1.0]]), targets=np.array([[1.0], [0.0]]))
        # outputs 3 and 2 -> errors 2 and 2
        assert loss_value(model, batch) == pytest.approx(4.0)

    def test_cross_entropy_of_uniform_logits(self):
        model = ModelStack(
            layers=[LayerSpec(in_dim=2, out_dim=3)],
            weights=[np.zeros((3, 2))],
            loss="softmax_cross_entropy"
        )
        batch = Batch(inputs=np.ones((2, 2)), targets=np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
        assert loss_value(model, batch) == pytest.approx(np.log(3.0))

    def test_rejects_wrong_input_width(self, tanh_model):
        with pytest.raises(RejectedInputError):
            forward(tanh_model, Batch(inputs=np.zeros((2, 3)), targets=np.zeros((2, 3))))

    def test_rejects_negative_cross_entropy_targets(self):
        model = ModelStack.random([2, 2], loss="softmax_cross_entropy")
        with pytest.raises(RejectedInputError):
            forward(model, Batch(inputs=np.zeros((1, 2)), targets=np.array([[-1.0, 2.0]])))

    def test_evaluate_weights_batches_by_size(self):
        model = ModelStack(layers=[LayerSpec(in_dim=1, out_dim=1)], weights=[np.zeros((1, 1))])
        big = Batch(inputs=np.zeros((3, 1)), targets=np.ones((3, 1)))
        small = Batch(inputs=np.zeros((1, 1)), targets=np.full((1, 1), 3.0))
        assert evaluate(model, [big, small]) == pytest.approx((3 * 1.0 + 1 * 9.0) / 4)

    def test_evaluate_rejects_empty_data(self, tanh_model):
        with pytest.raises(RejectedInputError):
            evaluate(tanh_model, [])

class TestBackward:
    @pytest.mark.parametrize("activation", ["identity", "tanh", "relu"])
    def test_matches_finite_differences(self, activation, rng):
        model = ModelStack.random([4, 6, 3], activation=activation, seed=2)
        batch = Batch(inputs=rng.normal(size=(5, 4)), targets=rng.normal(size=(5, 3)))
        _, cache = forward(model, batch)
        grads = backward(model, cache)
        for layer in range(2):
            reference = fd_gradient_oracle(model, batch, layer)
            assert vector_relative_error(grads.weights[layer], reference) < 1e-6

    def test_cross_entropy_matches_finite_differences(self, rng):
        model = ModelStack.random([3, 4], loss="softmax_cross_entropy", seed=4)
        targets = np.eye(4)[rng.integers(0, 4, size=5)]
        batch = Batch(inputs=rng.normal(size=(5, 3)), targets=targets)
        _, cache = forward(model, batch)
        grads = backward(model, cache)
        assert vector_relative_error(grads.weights[0], fd_gradient_oracle(model, batch, 0)) < 1e-6

    def test_bias_gradient_is_column_sum(self, tanh_model, batch):
        _, cache = forward(tanh_model, batch)
        grads = backward(tanh_model, cache)
        assert grads.biases[1].shape == (3,)
        assert grads.biases[0].shape == (5,)

    def test_stale_cache_is_rejected(self, tanh_model, batch):
        _, cache = forward(tanh_model, batch)
        tanh_model.set_weight(0, tanh_model.weights[0] * 2.0)
        with pytest.raises(RejectedInputError):
            backward(tanh_model, cache)

    def test_layer_deltas_rebuild_weight_gradients(self, tanh_model, batch):
        _, cache = forward(tanh_model, batch)
        deltas = layer_deltas(tanh_model, cache)
        grads = backward(tanh_model, cache)
        assert [dz.shape for dz in deltas] == [(6, 5), (6, 3)]
        for dz, h, weight_grad in zip(deltas, cache.activations, grads.weights):
            np.testing.assert_array_equal(dz.T @ h, weight_grad)
