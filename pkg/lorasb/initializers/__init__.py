from lorasb.initializers.recipes import (
    InitKind, InitRecipe, OptimizerModel, UpdateEstimate, default_sample_budget, resolve_recipe
)
from lorasb.initializers.estimate import estimate_update
from lorasb.initializers.factors import (
    apply_adapters, build_adapters, default_scale, init_ablation, init_lora, init_lora_sb, init_sb
)

__all__ = [
    "InitKind",
    "InitRecipe",
    "OptimizerModel",
    "UpdateEstimate",
    "default_sample_budget",
    "resolve_recipe",
    "estimate_update",
    "apply_adapters",
    "build_adapters",
    "default_scale",
    "init_ablation",
    "init_lora",
    "init_lora_sb",
    "init_sb"
]
