from lorasb.adapters.algebra import AdapterMethod, effective_update, effective_weight, subspace_membership
from lorasb.core.errors import RejectedInputError
from lorasb.initializers.factors import (
    adapter_rng, apply_adapters, build_adapters, default_scale, init_ablation, init_lora, init_lora_sb, init_sb
)
from lorasb.initializers.recipes import InitKind, InitRecipe, OptimizerModel
from lorasb.kernel.matrix import svd
from lorasb.nn.model import ModelStack
from lorasb.nn.tasks import make_teacher_student_task
from lorasb.oracles.suite import best_rank_r_oracle

import numpy as np
import pytest

@pytest.fixture
def rng():
    return np.random.default_rng(21)

@pytest.fixture
def delta_w(rng):
    return rng.normal(size=(16, 12))

def _product(factors):
    return factors.s * factors.b @ factors.r_mat @ factors.a

class TestInitLoraSb:
    def test_rank_one_input_is_recovered(self, rng):
        u = rng.normal(size=(5, 1))
        v = rng.normal(size=(4, 1))
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        factors = init_lora_sb(2.5 * u @ v.T, 1)
        np.testing.assert_allclose(factors.r_mat, [[2.5]])
        np.testing.assert_allclose(_product(factors), 2.5 * u @ v.T, atol=1e-12)

    def test_full_rank_reconstructs(self, rng):
        m = rng.normal(size=(5, 4))
        np.testing.assert_allclose(_product(init_lora_sb(m, 4, s=3.0)), m, rtol=1e-9, atol=1e-12)

    def test_residual_is_tail_energy(self, delta_w):
        factors = init_lora_sb(delta_w, 3)
        tail = np.sqrt(np.sum(svd(delta_w).s[3:] ** 2))
        assert np.linalg.norm(delta_w - _product(factors)) == pytest.approx(tail, rel=1e-8)

    def test_matches_best_rank_r_oracle(self, delta_w):
        np.testing.assert_allclose(_product(init_lora_sb(delta_w, 3)), best_rank_r_oracle(delta_w, 3), atol=1e-8)

    def test_factors_are_orthonormal(self, delta_w):
        factors = init_lora_sb(delta_w, 4)
        np.testing.assert_allclose(factors.b.T @ factors.b, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(factors.a @ factors.a.T, np.eye(4), atol=1e-12)

    def test_scale_cancels(self, delta_w):
        np.testing.assert_allclose(_product(init_lora_sb(delta_w, 2, s=4.0)), _product(init_lora_sb(delta_w, 2)), atol=1e-12)

    def test_rank_deficient_estimate_zeroes_extra_directions(self, rng):
        low = rng.normal(size=(6, 1)) @ rng.normal(size=(1, 5))
        factors = init_lora_sb(low, 3)
        assert np.count_nonzero(np.diag(factors.r_mat)) == 1

    def test_zero_estimate_gives_zero_core(self):
        factors = init_lora_sb(np.zeros((3, 3)), 2)
        np.testing.assert_array_equal(factors.r_mat, np.zeros((2, 2)))

    def test_rejects_non_positive_scale(self, delta_w):
        with pytest.raises(RejectedInputError):
            init_lora_sb(delta_w, 2, s=0.0)

class TestInitAblation:
    def test_noisy_with_zero_sigma_equals_lora_sb(self, delta_w):
        noisy = init_ablation(InitRecipe(kind=InitKind.NOISY_SB, rank=3, sigma=0.0), delta_w=delta_w)
        plain = init_lora_sb(delta_w, 3)
        assert np.array_equal(noisy.b, plain.b) and np.array_equal(noisy.r_mat, plain.r_mat)

    def test_noisy_is_seeded(self, delta_w):
        recipe = InitRecipe(kind=InitKind.NOISY_SB, rank=3, sigma=1e-2, seed=4)
        assert np.array_equal(init_ablation(recipe, delta_w=delta_w).b, init_ablation(recipe, delta_w=delta_w).b)

    def test_nonortho_has_same_product_but_diagonal_gram(self, delta_w):
        factors = init_ablation(InitRecipe(kind=InitKind.NONORTHO_SB, rank=3), delta_w=delta_w)
        np.testing.assert_allclose(_product(factors), _product(init_lora_sb(delta_w, 3)), atol=1e-12)
        sigma = svd(delta_w).s[:3]
        np.testing.assert_allclose(factors.b.T @ factors.b, np.diag(sigma ** 2), atol=1e-10)
        np.testing.assert_array_equal(factors.r_mat, np.eye(3))

    def test_pissa_style_starts_at_w0(self, rng):
        w0 = rng.normal(size=(6, 5))
        factors = init_ablation(InitRecipe(kind=InitKind.PISSA_STYLE, rank=2), w0=w0, s=0.5)
        np.testing.assert_allclose(factors.base + _product(factors), w0, atol=1e-12)
        np.testing.assert_allclose(factors.b.T @ factors.b, np.eye(2), atol=1e-12)

    def test_kaiming_svd_is_orthonormal_and_shape_matched(self, delta_w):
        factors = init_ablation(InitRecipe(kind=InitKind.KAIMING_SVD, rank=3), delta_w=delta_w)
        assert factors.b.shape == (16, 3) and factors.a.shape == (3, 12)
        np.testing.assert_allclose(factors.b.T @ factors.b, np.eye(3), atol=1e-12)

    def test_zero_b_has_zero_product(self, delta_w):
        factors = init_ablation(InitRecipe(kind=InitKind.ZERO_B, rank=3), delta_w=delta_w)
        np.testing.assert_array_equal(_product(factors), np.zeros_like(delta_w))

    def test_estimate_kinds_require_estimate(self, rng):
        with pytest.raises(RejectedInputError):
            init_ablation(InitRecipe(kind=InitKind.LORA_SB, rank=2), w0=rng.normal(size=(4, 4)))

    def test_pissa_requires_w0(self, delta_w):
        with pytest.raises(RejectedInputError):
            init_ablation(InitRecipe(kind=InitKind.PISSA_STYLE, rank=2), delta_w=delta_w)

def test_init_lora_starts_at_w0(rng):
    factors = init_lora(rng.normal(size=(5, 4)), 2, 1.0, rng)
    np.testing.assert_array_equal(factors.b, np.zeros((5, 2)))
    assert np.all(np.abs(factors.a) <= 0.5)

@pytest.mark.parametrize("method, rank, alpha, expected", [
    (AdapterMethod.LORA_SB, 8, None, 1.0),
    (AdapterMethod.LORA_XS, 8, None, 1.0),
    (AdapterMethod.LORA, 8, 16.0, 2.0),
    (AdapterMethod.LORA_SB, 4, 2.0, 0.5),
])
def test_default_scale(method, rank, alpha, expected):
    assert default_scale(method, rank, alpha) == expected

class TestBuildAdapters:
    @pytest.fixture
    def model(self):
        return ModelStack.random([5, 6, 4], activation="tanh", seed=3)

    def test_pissa_adapters_leave_model_unchanged(self, model):
        states = build_adapters(model, AdapterMethod.LORA_XS, InitRecipe(kind=InitKind.PISSA_STYLE, rank=2))
        for st, weight in zip(states, model.weights):
            np.testing.assert_allclose(effective_weight(st), weight, atol=1e-12)

    def test_lora_adapters_start_at_w0(self, model):
        states = build_adapters(model, AdapterMethod.LORA, InitRecipe(kind=InitKind.KAIMING_SVD, rank=2))
        assert all(st.r_mat is None for st in states)
        for st in states:
            np.testing.assert_array_equal(effective_update(st), np.zeros(st.shape))

    @pytest.mark.parametrize("seed", [0, 3, 7])
    def test_kaiming_draws_are_independent_of_task_seed(self, seed):
        task = make_teacher_student_task(16, 16, 2, 64, 0.0, seed=seed, batch_size=16, input_distribution="whitened")
        recipe = InitRecipe(kind=InitKind.KAIMING_SVD, rank=2, seed=seed)
        kaiming = build_adapters(task.student(), AdapterMethod.LORA_SB, recipe)[0]
        pissa = build_adapters(
            task.student(), AdapterMethod.LORA_XS, recipe.model_copy(update={"kind": InitKind.PISSA_STYLE})
        )[0]
        assert np.max(np.abs(kaiming.b - pissa.b)) > 1e-3

        # Frobenius overlap reaches sqrt(2) only when the two rank-2 subspaces coincide
        principal = svd(task.w0).u[:, :2]
        assert np.linalg.norm(principal.T @ kaiming.b) < 1.3

    def test_adapter_stream_differs_from_plain_seed(self):
        drawn = adapter_rng(5, 0).normal(size=8)
        assert not np.allclose(drawn, np.random.default_rng(5).normal(size=8))
        assert not np.allclose(drawn, adapter_rng(5, 1).normal(size=8))
        np.testing.assert_array_equal(drawn, adapter_rng(5, 0).normal(size=8))

    def test_full_ft_adapters(self, model):
        states = build_adapters(model, AdapterMethod.FULL_FT, InitRecipe(rank=2))
        assert [st.method for st in states] == [AdapterMethod.FULL_FT] * 2

    def test_estimate_module_count_must_match(self, model):
        task = make_teacher_student_task(4, 5, 1, 8, 0.0, seed=0, input_distribution="gaussian")
        recipe = InitRecipe(rank=1, eta=0.1, optimizer_model=OptimizerModel.SGD, sample_budget=8)
        _, estimate = init_sb(task.student(), task.batches, recipe)
        with pytest.raises(RejectedInputError):
            build_adapters(model, AdapterMethod.LORA_SB, recipe, estimate)

    def test_apply_rejects_wrong_count(self, model):
        with pytest.raises(RejectedInputError):
            apply_adapters(model, [])

class TestInitSb:
    def test_installs_best_rank_r_update(self):
        task = make_teacher_student_task(8, 6, 2, 32, 0.0, seed=1, batch_size=8, input_distribution="gaussian")
        model = task.student()
        recipe = InitRecipe(rank=2, eta=0.2, optimizer_model=OptimizerModel.SGD, sample_budget=32)
        states, estimate = init_sb(model, task.batches, recipe)

        np.testing.assert_allclose(
            model.weights[0] - task.w0, best_rank_r_oracle(estimate.deltas[0], 2), atol=1e-8
        )
        assert states[0].method == AdapterMethod.LORA_SB
        assert subspace_membership(states[0], effective_update(states[0]))

    def test_sgd_full_batch_estimate_recovers_rank_r_target(self):
        task = make_teacher_student_task(8, 6, 2, 12, 0.0, seed=2, batch_size=12, input_distribution="whitened")
        recipe = InitRecipe(rank=2, eta=0.5, optimizer_model=OptimizerModel.SGD, sample_budget=12)
        _, estimate = init_sb(task.student(), task.batches, recipe)
        # whitened mse gradient is (2/m)(W0 - Wt); one step moves along the true perturbation
        np.testing.assert_allclose(estimate.deltas[0], (2.0 * 0.5 / 8) * (task.w_target - task.w0), atol=1e-10)
