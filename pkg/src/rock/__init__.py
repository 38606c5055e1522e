"""Occupation-kernel learning of dynamical systems from sampled trajectories.

Core pieces: radial kernels (:mod:`rock.kernels`), Legendre test features
(:mod:`rock.test_space`), regularized solves (:mod:`rock.solvers`), the ODE
and PDE learners (:mod:`rock.ode`, :mod:`rock.pde`), reference systems
(:mod:`rock.systems`), metrics (:mod:`rock.metrics`), and the two-stage
hyperparameter search (:mod:`rock.selection`).  A FastAPI service
(:mod:`rock.service`) exposes the pipeline over HTTP and the ``rock`` CLI is
a thin client for it.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    NumericalError,
    RockError,
    SearchError,
    ShapeError,
    StorageError,
)
from .kernels import KernelSpec, RffConfig, eval_scalar_kernel, gram, rff_features, rff_gram
from .metrics import EvalReport, count_parameters, evaluate, full_trajectory_rmse, next_step_rmse
from .ode import (
    RockModel,
    Trajectory,
    TrajectorySet,
    assemble_gram,
    assemble_targets,
    eval_vector_field,
    forecast,
    train,
)
from .pde import (
    FeatureSpec,
    FieldGrid,
    PdeModel,
    forecast_pde,
    spatial_derivatives,
    train_pde,
)
from .selection import SearchSpace, cut_trajectories, split_dataset, two_stage_search
from .solvers import (
    RegularizedSystem,
    ridge_regression_oracle,
    solve_full_kronecker,
    solve_regularized,
)
from .systems import SystemSpec, generate, vector_field
from .test_space import (
    TestBlock,
    build_test_block,
    legendre_features,
    legendre_features_with_derivatives,
    trapezoid_weights,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DataError",
    "DivergenceError",
    "NumericalError",
    "RockError",
    "SearchError",
    "ShapeError",
    "StorageError",
    "KernelSpec",
    "RffConfig",
    "eval_scalar_kernel",
    "gram",
    "rff_features",
    "rff_gram",
    "EvalReport",
    "count_parameters",
    "evaluate",
    "full_trajectory_rmse",
    "next_step_rmse",
    "RockModel",
    "Trajectory",
    "TrajectorySet",
    "assemble_gram",
    "assemble_targets",
    "eval_vector_field",
    "forecast",
    "train",
    "FeatureSpec",
    "FieldGrid",
    "PdeModel",
    "forecast_pde",
    "spatial_derivatives",
    "train_pde",
    "SearchSpace",
    "cut_trajectories",
    "split_dataset",
    "two_stage_search",
    "RegularizedSystem",
    "ridge_regression_oracle",
    "solve_full_kronecker",
    "solve_regularized",
    "SystemSpec",
    "generate",
    "vector_field",
    "TestBlock",
    "build_test_block",
    "legendre_features",
    "legendre_features_with_derivatives",
    "trapezoid_weights",
]
