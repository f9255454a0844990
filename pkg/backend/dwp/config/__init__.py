from .enums import (
    Term, OffsetAdjust, ModelForm,
    LayoutType, PlotShape, ExportMode,
    Species, WindKind, FlightMode, PlotKind,
)

from .model_config import FormTemplate, ModelConfig
from .filter_config import FilterThresholds, FilterConfig
from .ballistics_config import (
    TurbineSpec, CarcassAero, WindRegime, DetectionParams, BallisticsConfig,
)

__all__ = [
    # Enums
    "Term", "OffsetAdjust", "ModelForm",
    "LayoutType", "PlotShape", "ExportMode",
    "Species", "WindKind", "FlightMode", "PlotKind",
    # Presets
    "FormTemplate", "ModelConfig",
    "FilterThresholds", "FilterConfig",
    "TurbineSpec", "CarcassAero", "WindRegime", "DetectionParams",
    "BallisticsConfig",
]
