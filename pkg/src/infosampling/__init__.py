"""Sparse online GP mapping with mutual-information waypoint planning."""

from .baselines import LawnmowerSpec, lawnmower_path, random_waypoints
from .dense_gp import (
    DenseGpModel,
    fit,
    loo_gradient,
    loo_log_likelihood,
    loo_stats,
    optimize_hyperparams,
    predict,
)
from .field import (
    DynamicField,
    GridField,
    SamplePoint,
    load_field,
    sample,
    synth_dynamic_field,
    synth_field,
    write_raster,
)
from .kernel import HyperParams, kernel_eval, kernel_matrix, kernel_matrix_grad
from .mission import MissionConfig, MissionTrace, run_mission, traverse
from .planner import (
    build_planning_grid,
    gaussian_entropy,
    mutual_information,
    order_waypoints,
    plan_waypoints,
    posterior_cov,
)
from .sogp import (
    BasisVectorSet,
    SogpConfig,
    bv_training_view,
    sogp_init,
    sogp_predict,
    sogp_process,
    sogp_rebuild,
)

__version__ = "0.1.0"

__all__ = [
    "LawnmowerSpec",
    "lawnmower_path",
    "random_waypoints",
    "DenseGpModel",
    "fit",
    "loo_gradient",
    "loo_log_likelihood",
    "loo_stats",
    "optimize_hyperparams",
    "predict",
    "DynamicField",
    "GridField",
    "SamplePoint",
    "load_field",
    "sample",
    "synth_dynamic_field",
    "synth_field",
    "write_raster",
    "HyperParams",
    "kernel_eval",
    "kernel_matrix",
    "kernel_matrix_grad",
    "MissionConfig",
    "MissionTrace",
    "run_mission",
    "traverse",
    "build_planning_grid",
    "gaussian_entropy",
    "mutual_information",
    "order_waypoints",
    "plan_waypoints",
    "posterior_cov",
    "BasisVectorSet",
    "SogpConfig",
    "bv_training_view",
    "sogp_init",
    "sogp_predict",
    "sogp_process",
    "sogp_rebuild",
]
