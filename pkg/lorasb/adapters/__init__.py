from lorasb.adapters.algebra import (
    AdapterFactors, AdapterMethod, AdapterState, effective_update, effective_weight,
    format_param_count, orthonormality_residuals, param_count, projectors,
    require_full_rank, subspace_membership
)
from lorasb.adapters.io import load_adapter_states, save_adapter_states
from lorasb.adapters.layouts import ArchLayout, available_layouts, load_layout

__all__ = [
    "AdapterFactors",
    "AdapterMethod",
    "AdapterState",
    "effective_update",
    "effective_weight",
    "format_param_count",
    "orthonormality_residuals",
    "param_count",
    "projectors",
    "require_full_rank",
    "subspace_membership",
    "load_adapter_states",
    "save_adapter_states",
    "ArchLayout",
    "available_layouts",
    "load_layout"
]
