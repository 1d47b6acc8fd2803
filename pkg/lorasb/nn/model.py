from ..core.errors import RejectedInputError
from ..kernel.matrix import Matrix, as_matrix

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, PrivateAttr, model_validator
from typing import List, Literal, Optional, Tuple
import numpy as np

Activation = Literal["identity", "relu", "tanh"]
LossKind = Literal["mse", "softmax_cross_entropy"]


class LayerSpec(BaseModel):
    """Dense layer ``h_out = act(h_in @ W.T + b)`` with W of shape (out_dim, in_dim)."""
    in_dim :PositiveInt
    out_dim :PositiveInt
    activation :Activation = "identity"
    has_bias :bool = False


class Batch(BaseModel):
    inputs :Matrix
    targets :Matrix

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def rows_match(self)->"Batch":
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"inputs have {self.inputs.shape[0]} rows but targets have {self.targets.shape[0]}"
            )
        return self

    @property
    def size(self)->int:
        return int(self.inputs.shape[0])


class ForwardCache(BaseModel):
    """Everything ``backward`` needs: per-layer pre-activations and activations."""
    activations :List[np.ndarray]
    pre_activations :List[np.ndarray]
    outputs :np.ndarray
    targets :np.ndarray
    model_version :int
    weight_shapes :List[Tuple[int, int]]

    model_config = ConfigDict(arbitrary_types_allowed=True)


class Gradients(BaseModel):
    """Per-layer ``dL/dW`` (and ``dL/db`` where the layer has a bias)."""
    weights :List[np.ndarray]
    biases :List[Optional[np.ndarray]]

    model_config = ConfigDict(arbitrary_types_allowed=True)


class ModelStack(BaseModel):
    """Feedforward stack of dense layers with a loss head; mean-over-batch loss."""
    layers :List[LayerSpec] = Field(min_length=1)
    weights :List[Matrix]
    biases :List[Optional[np.ndarray]] = Field(default_factory=list)
    loss :LossKind = "mse"
    _version :int = PrivateAttr(default=0)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_structure(self)->"ModelStack":
        if not self.biases:
            self.biases = [
                np.zeros(spec.out_dim) if spec.has_bias else None for spec in self.layers
            ]

        if len(self.weights) != len(self.layers) or len(self.biases) != len(self.layers):
            raise ValueError(
                f"{len(self.layers)} layers need as many weights and biases, "
                f"got {len(self.weights)} and {len(self.biases)}"
            )

        for i, (spec, weight, bias) in enumerate(zip(self.layers, self.weights, self.biases)):
            if weight.shape != (spec.out_dim, spec.in_dim):
                raise ValueError(f"layer {i}: weight {weight.shape} != ({spec.out_dim}, {spec.in_dim})")
            if spec.has_bias != (bias is not None):
                raise ValueError(f"layer {i}: has_bias={spec.has_bias} but bias is {'set' if bias is not None else 'absent'}")
            if bias is not None and np.shape(bias) != (spec.out_dim,):
                raise ValueError(f"layer {i}: bias shape {np.shape(bias)} != ({spec.out_dim},)")
            if i and self.layers[i - 1].out_dim != spec.in_dim:
                raise ValueError(
                    f"layer {i - 1} out_dim {self.layers[i - 1].out_dim} does not chain into layer {i} in_dim {spec.in_dim}"
                )
        return self

    @property
    def version(self)->int:
        return self._version

    @property
    def in_dim(self)->int:
        return self.layers[0].in_dim

    @property
    def out_dim(self)->int:
        return self.layers[-1].out_dim

    @property
    def weight_shapes(self)->List[Tuple[int, int]]:
        return [tuple(w.shape) for w in self.weights]

    def set_weight(self, index :int, weight :Matrix):
        weight = as_matrix(weight, f"layer {index} weight")
        if weight.shape != self.weights[index].shape:
            raise RejectedInputError(
                f"layer {index}: new weight {weight.shape} != {self.weights[index].shape}"
            )
        self.weights[index] = weight.copy()
        self._version += 1

    def set_weights(self, weights :List[Matrix]):
        if len(weights) != len(self.weights):
            raise RejectedInputError(f"expected {len(self.weights)} weights, got {len(weights)}")
        for index, weight in enumerate(weights):
            self.set_weight(index, weight)

    def clone(self)->"ModelStack":
        return ModelStack(
            layers=[spec.model_copy() for spec in self.layers],
            weights=[w.copy() for w in self.weights],
            biases=[None if b is None else b.copy() for b in self.biases],
            loss=self.loss
        )

    @classmethod
    def random(
        cls,
        dims :List[int],
        activation :Activation="tanh",
        loss :LossKind="mse",
        has_bias :bool=False,
        seed :int=0,
        output_activation :Activation="identity")->"ModelStack":
        """Seeded stack with ``W ~ N(0, 1/in_dim)``; the last layer uses ``output_activation``."""
        if len(dims) < 2:
            raise RejectedInputError(f"need at least input and output dims, got {dims}")

        rng = np.random.default_rng(seed)
        layers = [
            LayerSpec(
                in_dim=dims[i],
                out_dim=dims[i + 1],
                activation=activation if i < len(dims) - 2 else output_activation,
                has_bias=has_bias
            )
            for i in range(len(dims) - 1)
        ]
        weights = [rng.normal(0.0, 1.0 / np.sqrt(spec.in_dim), size=(spec.out_dim, spec.in_dim)) for spec in layers]
        biases = [rng.normal(0.0, 0.1, size=spec.out_dim) if has_bias else None for spec in layers]
        return cls(layers=layers, weights=weights, biases=biases, loss=loss)


def _activate(z :np.ndarray, activation :Activation)->np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    return z

def _activation_grad(z :np.ndarray, h :np.ndarray, activation :Activation)->np.ndarray:
    if activation == "relu":
        return (z > 0.0).astype(np.float64)
    if activation == "tanh":
        return 1.0 - h * h
    return np.ones_like(z)

def _loss_and_output_grad(outputs :np.ndarray, targets :np.ndarray, loss :LossKind)->Tuple[float, np.ndarray]:
    batch, dim = outputs.shape
    if loss == "mse":
        diff = outputs - targets
        return float(np.mean(diff * diff)), 2.0 * diff / (batch * dim)

    shifted = outputs - outputs.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    value = float(-np.sum(targets * log_probs) / batch)
    probs = np.exp(log_probs)
    grad = (probs * targets.sum(axis=1, keepdims=True) - targets) / batch
    return value, grad

def _check_batch(model :ModelStack, batch :Batch):
    if batch.inputs.shape[1] != model.in_dim:
        raise RejectedInputError(f"batch inputs have {batch.inputs.shape[1]} columns, model expects {model.in_dim}")
    if batch.targets.shape[1] != model.out_dim:
        raise RejectedInputError(f"batch targets have {batch.targets.shape[1]} columns, model emits {model.out_dim}")
    if model.loss == "softmax_cross_entropy" and (batch.targets < 0).any():
        raise RejectedInputError("softmax_cross_entropy targets must be non-negative class weights")

def forward(model :ModelStack, batch :Batch)->Tuple[float, ForwardCache]:
    """Mean-over-batch loss plus the activation record for ``backward``."""
    _check_batch(model, batch)

    h = batch.inputs
    activations = [h]
    pre_activations = []
    for spec, weight, bias in zip(model.layers, model.weights, model.biases):
        z = h @ weight.T
        if bias is not None:
            z = z + bias
        h = _activate(z, spec.activation)
        pre_activations.append(z)
        activations.append(h)

    value, _ = _loss_and_output_grad(h, batch.targets, model.loss)
    cache = ForwardCache(
        activations=activations,
        pre_activations=pre_activations,
        outputs=h,
        targets=batch.targets,
        model_version=model.version,
        weight_shapes=model.weight_shapes
    )
    return value, cache

def layer_deltas(model :ModelStack, cache :ForwardCache)->List[np.ndarray]:
    """Per layer, ``dL/dz`` of its pre-activation; ``dL/dW_i = deltas[i].T @ cache.activations[i]``."""
    if cache.model_version != model.version or cache.weight_shapes != model.weight_shapes:
        raise RejectedInputError(
            f"stale forward cache: recorded model version {cache.model_version}, model is at {model.version}"
        )

    _, delta = _loss_and_output_grad(cache.outputs, cache.targets, model.loss)
    deltas :List[np.ndarray] = [None] * len(model.layers)
    for i in reversed(range(len(model.layers))):
        spec = model.layers[i]
        deltas[i] = delta * _activation_grad(cache.pre_activations[i], cache.activations[i + 1], spec.activation)
        delta = deltas[i] @ model.weights[i]
    return deltas

def backward(model :ModelStack, cache :ForwardCache)->Gradients:
    """Exact gradients of the mean-batch loss w.r.t. every weight matrix and bias."""
    deltas = layer_deltas(model, cache)
    return Gradients(
        weights=[dz.T @ h for dz, h in zip(deltas, cache.activations)],
        biases=[dz.sum(axis=0) if spec.has_bias else None for spec, dz in zip(model.layers, deltas)]
    )

def loss_value(model :ModelStack, batch :Batch)->float:
    value, _ = forward(model, batch)
    return value

def evaluate(model :ModelStack, data :List[Batch])->float:
    """Sample-weighted mean loss over every batch in ``data``."""
    if not data:
        raise RejectedInputError("evaluate: no batches given")
    total = sum(loss_value(model, batch) * batch.size for batch in data)
    return total / sum(batch.size for batch in data)
