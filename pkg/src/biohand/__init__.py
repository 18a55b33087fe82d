"""Adaptive biomimetic force control for a simulated 24-DOF dexterous hand.

The package pairs a deterministic joint-space simulator (tree kinematics,
penalty contact, semi-implicit integration) with an online-adapting
impedance controller whose stiffness, damping, and feedforward force
profiles are spanned by Gaussian bases over a decaying phase variable.
Task scenarios, metrics, a CLI, and a WebSocket teleoperation endpoint
sit on top.
"""

from .basis import GaussianBasis, PhaseState, eval_basis, phase_step
from .controller import (
    AdaptationGains,
    AdaptiveController,
    AdaptiveParams,
    ControllerConfig,
    FixedGainController,
    PositionModeController,
    TorqueCommand,
    TrackingError,
    compliant_profiles,
    compute_torque,
    make_controller,
    tracking_error,
    update_params,
)
from .contact import ContactEvent, Pose, SceneObject, detect_contacts
from .dynamics import SimState, init_sim_state, step_dynamics
from .errors import (
    ControllerFault,
    SimulationFault,
    TrajectoryClampWarning,
    TrajectoryFormatError,
)
from .hand_model import (
    HandModel,
    JointState,
    default_hand24,
    fingertip_jacobian,
    forward_kinematics,
    gravity_torque,
    load_hand_model,
    point_ik,
    resolve_hand_model,
    save_hand_model,
)
from .metrics import MetricsRecord, contact_dispersion, write_metrics_csv, write_summary
from .reference import (
    FileReference,
    GraspTiming,
    KeyframeReference,
    LiveReference,
    ReferenceSample,
    StepReference,
    load_trajectory,
    min_jerk,
    save_trajectory,
    scripted_grasp_reference,
)
from .scenario import (
    Scenario,
    compare_controllers,
    load_scenario,
    resolve_scenario,
    run_scenario,
    success_check,
)

__version__ = "0.1.0"
