from ..core.defaults import DEFAULT_BUDGET_FRACTION
from ..core.errors import RejectedInputError
from ..kernel.matrix import Matrix

from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, NonNegativeInt, PositiveFloat, PositiveInt
from typing import List, Literal, Optional
from enum import Enum
import math


class InitKind(str, Enum):
    LORA_SB = "lora_sb"
    PISSA_STYLE = "pissa_style"
    NOISY_SB = "noisy_sb"
    NONORTHO_SB = "nonortho_sb"
    KAIMING_SVD = "kaiming_svd"
    ZERO_B = "zero_b"

    @property
    def needs_estimate(self)->bool:
        return self in (InitKind.LORA_SB, InitKind.NOISY_SB, InitKind.NONORTHO_SB)


class OptimizerModel(str, Enum):
    ADAMW_SIGN = "adamw_sign"
    SGD = "sgd"


class InitRecipe(BaseModel):
    """
    How to initialize the adapter factors of every adapted matrix.

    ``eta``, ``optimizer_model`` and ``sample_budget`` may stay unset; ``resolve_recipe``
    fills them from the training setup (training lr, training optimizer, 1/1000 rule).
    """
    kind :InitKind = InitKind.LORA_SB
    rank :PositiveInt = 4
    eta :Optional[PositiveFloat] = None
    optimizer_model :Optional[OptimizerModel] = None
    sample_budget :Optional[PositiveInt] = None
    sigma :NonNegativeFloat = Field(default=0.0, description="noise standard deviation for noisy_sb")
    seed :int = 0


class UpdateEstimate(BaseModel):
    """Averaged first-step update ΔW_avg, one matrix per adapted weight."""
    deltas :List[Matrix]
    samples_used :PositiveInt
    optimizer_model :OptimizerModel
    eta :PositiveFloat
    gradient_sums :Optional[List[Matrix]] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)


def default_sample_budget(num_samples :NonNegativeInt, batch_size :int, fraction :float=DEFAULT_BUDGET_FRACTION)->int:
    """``ceil(num_samples·fraction)`` with a floor of one batch, capped at the dataset size."""
    if num_samples < 1:
        raise RejectedInputError("default_sample_budget: empty dataset")
    if not 0 < fraction <= 1:
        raise RejectedInputError(f"budget fraction must be in (0, 1], got {fraction}")
    return min(num_samples, max(math.ceil(num_samples * fraction), batch_size))

def resolve_recipe(
    recipe :InitRecipe,
    train_eta :float,
    train_optimizer :Literal["sgd", "adamw"],
    num_samples :int,
    batch_size :int,
    budget_fraction :float=DEFAULT_BUDGET_FRACTION)->InitRecipe:
    """Copy of ``recipe`` with every unset field filled from the training setup."""
    optimizer_model = recipe.optimizer_model
    if optimizer_model is None:
        optimizer_model = OptimizerModel.ADAMW_SIGN if train_optimizer == "adamw" else OptimizerModel.SGD

    return recipe.model_copy(update={
        "eta": recipe.eta if recipe.eta is not None else train_eta,
        "optimizer_model": optimizer_model,
        "sample_budget": recipe.sample_budget or default_sample_budget(num_samples, batch_size, budget_fraction)
    })
