"""Gromov-Wasserstein barycenters of measure networks: synthesis and analysis."""

from .analysis import (
    AnalysisResult,
    analyze_blowup,
    analyze_fixed_point,
    barycenter_gradient,
    build_blowup_system,
    build_fixed_point_system,
    reconstruct_blowup,
    reconstruct_fixed_point,
)
from .blowup import BlowupAlignment, blowup_multi, blowup_pair
from .dataio import (
    PointCloud,
    load_any_network,
    load_network,
    load_point_cloud,
    occlude,
    pairwise_distance_network,
    sample_simplex_dirichlet,
    save_network,
)
from .errors import DataError, GWError, NumericalError, ValidationError
from .gw import GwSolverConfig, gw_bruteforce, gw_distance, gw_entropic, gw_frank_wolfe
from .mds import classical_mds
from .network import Coupling, GwResult, Network, SimplexWeights, gw_objective, validate_network
from .ot import sinkhorn, solve_exact_ot
from .pipeline import experiment_classify, experiment_occlusion, experiment_recover, kmeans_lambda
from .qp import QpConfig, min_quad_simplex, project_simplex
from .synthesis import SynthesisConfig, blowup_barycenter, geodesic_interpolate, rho_update, synthesize_barycenter

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult",
    "analyze_blowup",
    "analyze_fixed_point",
    "barycenter_gradient",
    "build_blowup_system",
    "build_fixed_point_system",
    "reconstruct_blowup",
    "reconstruct_fixed_point",
    "BlowupAlignment",
    "blowup_multi",
    "blowup_pair",
    "PointCloud",
    "load_any_network",
    "load_network",
    "load_point_cloud",
    "occlude",
    "pairwise_distance_network",
    "sample_simplex_dirichlet",
    "save_network",
    "DataError",
    "GWError",
    "NumericalError",
    "ValidationError",
    "GwSolverConfig",
    "gw_bruteforce",
    "gw_distance",
    "gw_entropic",
    "gw_frank_wolfe",
    "classical_mds",
    "Coupling",
    "GwResult",
    "Network",
    "SimplexWeights",
    "gw_objective",
    "validate_network",
    "sinkhorn",
    "solve_exact_ot",
    "experiment_classify",
    "experiment_occlusion",
    "experiment_recover",
    "kmeans_lambda",
    "QpConfig",
    "min_quad_simplex",
    "project_simplex",
    "SynthesisConfig",
    "blowup_barycenter",
    "geodesic_interpolate",
    "rho_update",
    "synthesize_barycenter",
    "__version__",
]
