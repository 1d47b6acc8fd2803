from lorasb.core.errors import RejectedInputError
from lorasb.initializers.recipes import InitKind, InitRecipe, OptimizerModel, default_sample_budget, resolve_recipe

import pytest

@pytest.mark.parametrize("kind, needs", [
    (InitKind.LORA_SB, True),
    (InitKind.NOISY_SB, True),
    (InitKind.NONORTHO_SB, True),
    (InitKind.PISSA_STYLE, False),
    (InitKind.KAIMING_SVD, False),
    (InitKind.ZERO_B, False),
])
def test_needs_estimate(kind, needs):
    assert kind.needs_estimate is needs

class TestDefaultSampleBudget:
    def test_one_in_a_thousand_rounds_up(self):
        assert default_sample_budget(100_000, 16) == 100

    def test_floor_is_one_batch(self):
        assert default_sample_budget(1024, 64) == 64

    def test_capped_at_dataset_size(self):
        assert default_sample_budget(10, 64) == 10

    def test_full_fraction(self):
        assert default_sample_budget(500, 10, fraction=1.0) == 500

    @pytest.mark.parametrize("num_samples, fraction", [(0, 0.001), (10, 0.0), (10, 1.5)])
    def test_invalid_arguments(self, num_samples, fraction):
        with pytest.raises(RejectedInputError):
            default_sample_budget(num_samples, 1, fraction)

class TestResolveRecipe:
    def test_fills_from_training_setup(self):
        recipe = resolve_recipe(InitRecipe(), train_eta=0.05, train_optimizer="adamw", num_samples=4000, batch_size=2)
        assert recipe.eta == 0.05
        assert recipe.optimizer_model == OptimizerModel.ADAMW_SIGN
        assert recipe.sample_budget == 4

    def test_sgd_training_implies_sgd_model(self):
        recipe = resolve_recipe(InitRecipe(), train_eta=0.5, train_optimizer="sgd", num_samples=64, batch_size=64)
        assert recipe.optimizer_model == OptimizerModel.SGD

    def test_explicit_fields_win(self):
        explicit = InitRecipe(eta=0.1, optimizer_model=OptimizerModel.ADAMW_SIGN, sample_budget=7)
        recipe = resolve_recipe(explicit, train_eta=0.5, train_optimizer="sgd", num_samples=64, batch_size=64)
        assert (recipe.eta, recipe.optimizer_model, recipe.sample_budget) == (0.1, OptimizerModel.ADAMW_SIGN, 7)

    def test_does_not_mutate_input(self):
        recipe = InitRecipe()
        resolve_recipe(recipe, train_eta=0.5, train_optimizer="sgd", num_samples=64, batch_size=64)
        assert recipe.eta is None
