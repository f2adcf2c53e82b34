"""Reachability-informed avoidance prediction toolkit."""

from .dynamics import (
    DubinsParams,
    RelativeState,
    VehicleState,
    discrete_controls,
    invert_relative,
    relative_rhs,
    relative_state,
    robot_policy,
    step_vehicle,
    wrap_angle,
)
from .levelset import (
    BoundedInterval,
    Grid3,
    TubeSchedule,
    ValueFunction,
    contains_state,
    default_brs_grid,
    default_frs_grid,
    is_subset,
    read_value_function,
    solve_brs,
    solve_frs,
    solve_frs_batch,
    value_at,
    write_value_function,
)
from .features import FeatureSetId, FeatureVector, build_feature_matrix, build_features
from .learn import (
    CONTROL_CLASSES,
    Dataset,
    cross_validate,
    load_model,
    predict_labels,
    save_model,
    train_logistic,
    train_svm,
    train_tree,
)
from .metrics import TrajectoryPrediction, accuracy, d_end, d_start, mann_whitney_u
from .scenario import (
    Scene,
    SyntheticHumanPolicy,
    Trajectory,
    dataset_from_trajectories,
    generate_scene,
    make_cohort,
    make_controller,
    read_cohort,
    read_trajectories,
    simulate_episode,
    write_cohort,
    write_trajectories,
)
from .shfrs import (
    FixedPredictor,
    ModelPredictor,
    ShfrsConfig,
    ShfrsResult,
    build_shfrs,
    estimate_probabilities,
)
from .mip3 import (
    build_reward_matrix,
    compute_safety_values,
    simulate_three,
    solve_assignment,
    verify_pairwise_priority,
)

__all__ = [
    "DubinsParams",
    "RelativeState",
    "VehicleState",
    "discrete_controls",
    "invert_relative",
    "relative_rhs",
    "relative_state",
    "robot_policy",
    "step_vehicle",
    "wrap_angle",
    "BoundedInterval",
    "Grid3",
    "TubeSchedule",
    "ValueFunction",
    "contains_state",
    "default_brs_grid",
    "default_frs_grid",
    "is_subset",
    "read_value_function",
    "solve_brs",
    "solve_frs",
    "solve_frs_batch",
    "value_at",
    "write_value_function",
    "FeatureSetId",
    "FeatureVector",
    "build_feature_matrix",
    "build_features",
    "CONTROL_CLASSES",
    "Dataset",
    "cross_validate",
    "load_model",
    "predict_labels",
    "save_model",
    "train_logistic",
    "train_svm",
    "train_tree",
    "TrajectoryPrediction",
    "accuracy",
    "d_end",
    "d_start",
    "mann_whitney_u",
    "Scene",
    "SyntheticHumanPolicy",
    "Trajectory",
    "dataset_from_trajectories",
    "generate_scene",
    "make_cohort",
    "make_controller",
    "read_cohort",
    "read_trajectories",
    "simulate_episode",
    "write_cohort",
    "write_trajectories",
    "FixedPredictor",
    "ModelPredictor",
    "ShfrsConfig",
    "ShfrsResult",
    "build_shfrs",
    "estimate_probabilities",
    "build_reward_matrix",
    "compute_safety_values",
    "simulate_three",
    "solve_assignment",
    "verify_pairwise_priority",
]

__version__ = "0.1.0"
