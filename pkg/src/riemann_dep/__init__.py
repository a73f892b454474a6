"""Riemannian covariance and correlation for paired samples on S² and SO(3)."""
from .errors import *  # noqa: F401,F403
from .geometry import (
    ManifoldPoint,
    TangentVector,
    distance,
    exp_map,
    geodesic_point,
    get_manifold,
    log_map,
    tangent_basis,
)
from .sphere import SPHERE, Sphere, VmfParams, vmf_density, vmf_sample
from .so3 import SO3, SO3_SPACE, AxisAngle, Quaternion, phi, phi_inv, so3_exp, so3_log
from .frechet import (
    FrechetResult,
    SolverSettings,
    frechet_function,
    frechet_mean,
    midpoint_of_means,
    pooled_frechet_mean,
    weighted_point_of_means,
)
from .dependence import (
    DependenceReport,
    PairedSample,
    dcorr,
    evaluate_dependence,
    rcorr,
    rcorr_matrix,
    rcov,
    sample_cross_cov,
)

from .simulation import ScenarioConfig, SweepConfig, generate, run_sweep
from .dataio import load_points_csv, load_so3_csv, load_sphere_csv, load_vcg_dataset

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
