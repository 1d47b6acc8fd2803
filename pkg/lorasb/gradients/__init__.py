from lorasb.gradients.law import (
    GradientBundle, GradientPathway, ScaleInvarianceReport, chain_rule_gap, core_gradient, equivalent_gradient,
    equivalent_update, gradient_bundle, optimal_correction, predicted_loss_decrement,
    layer_core_gradient, projector_form, scale_invariance_report, xs_gradient
)

__all__ = [
    "GradientBundle",
    "GradientPathway",
    "ScaleInvarianceReport",
    "chain_rule_gap",
    "core_gradient",
    "equivalent_gradient",
    "equivalent_update",
    "gradient_bundle",
    "layer_core_gradient",
    "optimal_correction",
    "predicted_loss_decrement",
    "projector_form",
    "scale_invariance_report",
    "xs_gradient"
]
