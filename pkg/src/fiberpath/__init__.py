"""Collision-free trajectory planning for dense two-axis fiber positioner arrays.

Plan reconfigurations of hexagonally packed robotic fiber positioners with
distributed greedy or stochastic steppers, resolve deadlocks by source
replacement, post-process paths for real hardware, and run Monte Carlo
campaigns over the parameter space.
"""

from .geometry import (
    AngularPose,
    ArmGeometry,
    InfeasibleGeometryError,
    Point2,
    ReachError,
    SDSS_ARM,
    SDSS_PITCH,
    Segment2,
    beta_arm_segment,
    elbow_position,
    fiber_position,
    inverse_kinematics_right_arm,
    safe_beta_threshold,
    segment_min_distance,
)
from .grid import (
    GridConfiguration,
    GridLayout,
    HexCountError,
    InfeasibleDensityError,
    InvalidFoldError,
    RobotState,
    assign_random_targets,
    build_hex_grid,
    hex_count,
    is_collided,
    layout_from_dict,
    layout_to_dict,
    load_layout,
    save_layout,
    set_folded_destination,
)
from .pathgen import (
    CollidingStateError,
    RngState,
    RobotPath,
    SolveConfig,
    SolveOutcome,
    Trajectory,
    cost,
    energy,
    load_trajectory,
    max_displacement,
    perturb_robot,
    save_trajectory,
    solve,
    trajectory_from_dict,
    trajectory_to_dict,
    trajectory_to_timed,
)
from .postprocess import (
    DegenerateWindowError,
    PointBudgetError,
    VerificationReport,
    Violation,
    buffer_budget,
    default_window,
    lateral_uncertainty,
    simplify_rdp,
    smooth_velocity,
    verify_trajectory,
)
from .resolver import (
    ReplacementReport,
    deadlock_groups,
    efficiency,
    solve_with_replacement,
)
from .campaign import (
    AlgorithmArm,
    CampaignSpec,
    TrialRecord,
    aggregate,
    assign_targets_retry,
    campaign_to_csv,
    run_campaign,
    run_trial,
)
from .seeding import derive_seed

__version__ = "0.1.0"
