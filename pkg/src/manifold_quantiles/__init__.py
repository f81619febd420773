"""Center-outward quantiles, ranks and signs on products of spheres."""
from .distributions import BivariateSineVonMises, Mixture, TangentVMF, Uniform, VonMisesFisher
from .geometry import (
    ManifoldSpec,
    exp_map,
    geodesic_distance,
    log_map,
    uniform_sample,
)
from .quantiles import (
    Cap,
    FactorCap,
    FixedCenter,
    FrechetCap,
    FrechetFactorCap,
    FrechetStrip,
    GridMode,
    QuantileFit,
    Strip,
    TorusEquator,
    build_grid,
    extract_contour,
    extract_region,
    fit_quantiles,
    frechet_mean,
    hausdorff_distance,
    latitude_profile,
)
from .regression import (
    ConditionalFit,
    CovariateSpace,
    EmptyWindow,
    Kernel,
    Knn,
    fit_conditional,
    kernel_weights,
    knn_weights,
)
from .transport import solve_assignment, solve_kantorovich

__all__ = [
    "BivariateSineVonMises", "Mixture", "TangentVMF", "Uniform", "VonMisesFisher",
    "ManifoldSpec", "exp_map", "geodesic_distance", "log_map", "uniform_sample",
    "Cap", "FactorCap", "FixedCenter", "FrechetCap", "FrechetFactorCap", "FrechetStrip", "GridMode",
    "QuantileFit", "Strip", "TorusEquator", "build_grid", "extract_contour", "extract_region",
    "fit_quantiles", "frechet_mean", "hausdorff_distance", "latitude_profile",
    "ConditionalFit", "CovariateSpace", "EmptyWindow", "Kernel", "Knn", "fit_conditional",
    "kernel_weights", "knn_weights", "solve_assignment", "solve_kantorovich",
]
