from ..core.errors import RejectedInputError
from ..core.logs import logger
from ..kernel.matrix import sign_matrix
from ..nn.model import Batch, ModelStack, backward, forward
from .recipes import InitRecipe, OptimizerModel, UpdateEstimate, default_sample_budget

from typing import List
import numpy as np

def _take(batch :Batch, count :int)->Batch:
    if count == batch.size:
        return batch
    return Batch(inputs=batch.inputs[:count], targets=batch.targets[:count])

def estimate_update(model :ModelStack, data :List[Batch], recipe :InitRecipe)->UpdateEstimate:
    """
    Approximates the first full fine-tuning step at the frozen pre-trained weights.

    Batches are visited in an order drawn from ``recipe.seed`` and samples are taken
    until ``sample_budget`` is met. With Σg the summed per-sample gradient of each
    weight matrix:

    - ``adamw_sign``: ΔW_avg = -eta·sign(Σg)
    - ``sgd``: ΔW_avg = -eta·Σg / samples_used

    The model is only read.
    """
    if not data:
        raise RejectedInputError("estimate_update: no data given")
    if recipe.eta is None:
        raise RejectedInputError("estimate_update: recipe.eta is unset; resolve the recipe against the training lr first")

    available = sum(batch.size for batch in data)
    optimizer_model = recipe.optimizer_model or OptimizerModel.ADAMW_SIGN
    budget = recipe.sample_budget or default_sample_budget(available, data[0].size)
    if budget > available:
        raise RejectedInputError(f"estimate_update: sample budget {budget} exceeds the {available} available samples")

    sums = [np.zeros_like(weight) for weight in model.weights]
    used = 0
    for index in np.random.default_rng(recipe.seed).permutation(len(data)):
        if used >= budget:
            break
        chunk = _take(data[index], min(data[index].size, budget - used))
        _, cache = forward(model, chunk)
        grads = backward(model, cache)
        for total, grad in zip(sums, grads.weights):
            total += grad * chunk.size
        used += chunk.size

    if optimizer_model == OptimizerModel.ADAMW_SIGN:
        deltas = [-recipe.eta * sign_matrix(total) + 0.0 for total in sums]
    else:
        deltas = [-recipe.eta * total / used + 0.0 for total in sums]

    logger.info(f"estimated ΔW_avg for {len(deltas)} module(s) from {used}/{available} samples ({optimizer_model.value}, eta={recipe.eta})")
    return UpdateEstimate(
        deltas=deltas,
        samples_used=used,
        optimizer_model=optimizer_model,
        eta=recipe.eta,
        gradient_sums=sums
    )
