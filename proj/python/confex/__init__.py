from ._confex import (
    ConfexError,
    Dataset,
    SplineFit,
    __version__,
    analyze,
    build_trajectory,
    dr_effect,
    fit_glm,
    fit_natural_spline,
    load_csv,
    natural_spline_basis,
    simulate,
    uncertainty_interval,
)

__all__ = [
    "ConfexError",
    "Dataset",
    "SplineFit",
    "analyze",
    "build_trajectory",
    "dr_effect",
    "fit_glm",
    "fit_natural_spline",
    "load_csv",
    "natural_spline_basis",
    "simulate",
    "uncertainty_interval",
]
