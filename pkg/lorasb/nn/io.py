from ..core.common import dumps_json, loads_json, writeFile
from ..core.defaults import MODEL_FILE
from ..core.errors import RejectedInputError
from ..kernel.io import load_matrix, save_matrix
from .model import LayerSpec, ModelStack
from .tasks import TaskSpec

from typing import Optional, Union
from pathlib import Path

def save_model(model :ModelStack, directory :Union[str, Path], task :Optional[TaskSpec]=None)->Path:
    """
    Writes ``model.json`` with layer specs and CSV references, one CSV per weight
    and bias. Passing ``task`` records the generator spec so the run can be replayed.
    """
    directory = Path(directory)
    weight_files = []
    bias_files = []
    for i, (weight, bias) in enumerate(zip(model.weights, model.biases)):
        weight_name = f"weight_{i}.csv"
        save_matrix(weight, directory / weight_name)
        weight_files.append(weight_name)

        if bias is None:
            bias_files.append(None)
        else:
            bias_name = f"bias_{i}.csv"
            save_matrix(bias.reshape(1, -1), directory / bias_name)
            bias_files.append(bias_name)

    document = {
        "layers": [spec.model_dump(mode="json") for spec in model.layers],
        "loss": model.loss,
        "weights": weight_files,
        "biases": bias_files,
        "task": task.model_dump(mode="json") if task is not None else None
    }
    path = directory / MODEL_FILE
    writeFile(dumps_json(document), path)
    return path

def load_model(directory :Union[str, Path])->ModelStack:
    directory = Path(directory)
    document = loads_json(directory / MODEL_FILE)
    try:
        layers = [LayerSpec(**spec) for spec in document["layers"]]
        weights = [load_matrix(directory / name) for name in document["weights"]]
        biases = [
            None if name is None else load_matrix(directory / name).reshape(-1)
            for name in document["biases"]
        ]
        loss = document["loss"]
    except (KeyError, TypeError) as e:
        raise RejectedInputError(f"{directory / MODEL_FILE} is malformed: {e}") from e
    return ModelStack(layers=layers, weights=weights, biases=biases, loss=loss)

def load_task_spec(directory :Union[str, Path])->Optional[TaskSpec]:
    task = loads_json(Path(directory) / MODEL_FILE).get("task")
    return TaskSpec(**task) if task is not None else None
