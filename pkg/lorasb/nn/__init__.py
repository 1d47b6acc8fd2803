from lorasb.nn.model import (
    Batch, ForwardCache, Gradients, LayerSpec, ModelStack, backward, evaluate, forward, layer_deltas, loss_value
)
from lorasb.nn.tasks import TaskSpec, TeacherStudentTask, make_teacher_student_task, task_from_spec
from lorasb.nn.io import load_model, load_task_spec, save_model

__all__ = [
    "Batch",
    "ForwardCache",
    "Gradients",
    "LayerSpec",
    "ModelStack",
    "backward",
    "evaluate",
    "forward",
    "layer_deltas",
    "loss_value",
    "TaskSpec",
    "TeacherStudentTask",
    "make_teacher_student_task",
    "task_from_spec",
    "load_model",
    "load_task_spec",
    "save_model"
]
