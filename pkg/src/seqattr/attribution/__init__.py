from .attention import CheferAttributor
from .base import AttributionMap, Attributor, record_rng
from .gradient import (
    DeepLiftAttributor,
    GimAttributor,
    GradientXInputAttributor,
    IntegratedGradientsAttributor,
)
from .masking import MaskPolicy, full_mask, mask
from .oracle import OracleAttributor
from .perturbation import (
    KernelShapAttributor,
    LimeAttributor,
    RandomBaselineAttributor,
    brute_force_shapley,
    kernel_shap_values,
    lime_values,
    shapley_kernel_weight,
)

METHODS = {
    cls.name: cls
    for cls in (
        OracleAttributor,
        RandomBaselineAttributor,
        KernelShapAttributor,
        LimeAttributor,
        GradientXInputAttributor,
        IntegratedGradientsAttributor,
        DeepLiftAttributor,
        GimAttributor,
        CheferAttributor,
    )
}

__all__ = [
    "AttributionMap",
    "Attributor",
    "record_rng",
    "CheferAttributor",
    "DeepLiftAttributor",
    "GimAttributor",
    "GradientXInputAttributor",
    "IntegratedGradientsAttributor",
    "MaskPolicy",
    "full_mask",
    "mask",
    "OracleAttributor",
    "KernelShapAttributor",
    "LimeAttributor",
    "RandomBaselineAttributor",
    "brute_force_shapley",
    "kernel_shap_values",
    "lime_values",
    "shapley_kernel_weight",
    "METHODS",
]
