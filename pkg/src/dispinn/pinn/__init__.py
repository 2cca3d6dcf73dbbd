"""Loss assembly and training loops: data loss, discretized-physics loss
(full and reduced), in-graph training, and the detached external-solver
mode with epoch-interval Jacobian refresh."""

from .jacobian import JacobianMatrix, fd_jacobian
from .losses import data_loss, masked_mse, physics_loss, relative_error
from .providers import (
    BurgersProvider,
    DetachedProvider,
    ReducedBurgersProvider,
    ResidualProvider,
    RigidBodyProvider,
    assemble_residuals,
    detach,
)
from .training import (
    LossReport,
    NetworkSpec,
    TrainConfig,
    TrainingProblem,
    TrialStats,
    predict,
    run_trials,
    train,
    train_detached,
    train_in_graph,
)

__all__ = [
    "BurgersProvider",
    "DetachedProvider",
    "JacobianMatrix",
    "LossReport",
    "NetworkSpec",
    "ReducedBurgersProvider",
    "ResidualProvider",
    "RigidBodyProvider",
    "TrainConfig",
    "TrainingProblem",
    "TrialStats",
    "assemble_residuals",
    "data_loss",
    "detach",
    "fd_jacobian",
    "masked_mse",
    "physics_loss",
    "predict",
    "relative_error",
    "run_trials",
    "train",
    "train_detached",
    "train_in_graph",
]
