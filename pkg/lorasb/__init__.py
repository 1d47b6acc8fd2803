__version__ = "0.1.0"

from lorasb.adapters.algebra import AdapterMethod, AdapterState, effective_update, effective_weight, param_count
from lorasb.gradients.law import GradientPathway, equivalent_gradient, optimal_correction, xs_gradient
from lorasb.initializers.factors import init_lora_sb, init_sb
from lorasb.initializers.recipes import InitKind, InitRecipe
from lorasb.nn.model import Batch, ModelStack
from lorasb.nn.tasks import make_teacher_student_task
from lorasb.training.trainer import TrainConfig, train

__all__ = [
    "__version__",
    "AdapterMethod",
    "AdapterState",
    "effective_update",
    "effective_weight",
    "param_count",
    "GradientPathway",
    "equivalent_gradient",
    "optimal_correction",
    "xs_gradient",
    "init_lora_sb",
    "init_sb",
    "InitKind",
    "InitRecipe",
    "Batch",
    "ModelStack",
    "make_teacher_student_task",
    "TrainConfig",
    "train"
]
