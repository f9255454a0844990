__version__ = "0.1.0"

# Import from local config subpackage
from .config.enums import (
    Term, OffsetAdjust, ModelForm,
    LayoutType, PlotShape, ExportMode,
    Species, WindKind, FlightMode, PlotKind,
)

from .config.model_config import ModelConfig
from .config.filter_config import FilterThresholds, FilterConfig
from .config.ballistics_config import (
    TurbineSpec, CarcassAero, WindRegime, DetectionParams, BallisticsConfig,
)

from .errors import DwpError

# Layouts and ring profiles
from .layouts import (
    SimpleGeometryRow, CarcassRecord, PolygonLayout, GridLayout,
    read_simple_layout, read_polygon_table, read_geojson_layout, read_grid_layout,
    read_carcasses, records_from_distances,
)
from .ring_profile import TOTAL, RingProfile, GridProfile
from .ring_geometry import (
    build_rings_circular, build_rings_simple, build_rings_polygon, add_carcasses,
    build_grid, grid_from_plot, get_ncarc, subset_profile,
    circle_contains, square_contains, rp_contains, plot_contains,
)
from .profile_io import save_profile, load_profile

# Fitting and distributions
from .glm_engine import (
    FittedGLM, build_design, fit_poisson, fit_battery, simulate_coefficients, aicc, aicc_table,
)
from .distance_distributions import (
    DistanceDistribution, DistanceDraws, normalize, from_fit, extensible,
    ddd, pdd, qdd, rdd, stats_table, cdf_table,
)
from .model_filter import ScoreTable, filter_models, high_influence_test

# Coverage
from .coverage_estimation import (
    PsiDraws, DwpDraws, est_psi, mle_psi, posterior_m, credible_interval, est_dwp,
    format_genest, export_genest, combine_genest, dwp_summary,
)

# Simulation
from .ballistics_sim import (
    ScenarioConfig, wind_at_height, sample_strike, initial_velocity, integrate_trajectory,
    simulate_landings, run_scenario, simulate_detection_process,
)
from .validation import psi_accuracy_harness, coverage_harness

__all__ = [
    # Configurations
    "ModelConfig", "FilterThresholds", "FilterConfig",
    "TurbineSpec", "CarcassAero", "WindRegime", "DetectionParams", "BallisticsConfig",

    # Enums from config
    "Term", "OffsetAdjust", "ModelForm",
    "LayoutType", "PlotShape", "ExportMode",
    "Species", "WindKind", "FlightMode", "PlotKind",

    "DwpError",

    # Layouts and profiles
    "SimpleGeometryRow", "CarcassRecord", "PolygonLayout", "GridLayout",
    "read_simple_layout", "read_polygon_table", "read_geojson_layout", "read_grid_layout",
    "read_carcasses", "records_from_distances",
    "TOTAL", "RingProfile", "GridProfile",
    "build_rings_circular", "build_rings_simple", "build_rings_polygon", "add_carcasses",
    "build_grid", "grid_from_plot", "get_ncarc", "subset_profile",
    "circle_contains", "square_contains", "rp_contains", "plot_contains",
    "save_profile", "load_profile",

    # Fitting
    "FittedGLM", "build_design", "fit_poisson", "fit_battery", "simulate_coefficients",
    "aicc", "aicc_table",
    "DistanceDistribution", "DistanceDraws", "normalize", "from_fit", "extensible",
    "ddd", "pdd", "qdd", "rdd", "stats_table", "cdf_table",
    "ScoreTable", "filter_models", "high_influence_test",

    # Coverage
    "PsiDraws", "DwpDraws", "est_psi", "mle_psi", "posterior_m", "credible_interval", "est_dwp",
    "format_genest", "export_genest", "combine_genest", "dwp_summary",

    # Simulation
    "ScenarioConfig", "wind_at_height", "sample_strike", "initial_velocity", "integrate_trajectory",
    "simulate_landings", "run_scenario", "simulate_detection_process",
    "psi_accuracy_harness", "coverage_harness",
]
