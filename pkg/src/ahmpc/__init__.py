"""Adaptive-horizon MPC: models, iLQR, the horizon-adapting closed loop,
a brute-force grid oracle, and the experiment CLI."""

from .controller import (
    ControllerConfig,
    ControllerState,
    LyapunovWindowReport,
    SimulationLog,
    StepRecord,
    check_lyapunov_window,
    controller_step,
    extend_with_terminal_feedback,
    simulate_closed_loop,
)
from .dynamics import (
    LinearizedStep,
    Model,
    PendulumParams,
    clamp_control,
    double_integrator,
    double_pendulum,
    linearize,
    pendulum_vector_field,
    scalar_system,
    step_euler,
)
from .errors import AhmpcError, ConfigError, DareError, NumericOverflowError
from .grid_oracle import (
    GridInstance,
    IdealTrajectory,
    builtin_instances,
    horizon_field,
    ideal_trajectory,
    integrator_2d_instance,
    min_horizon,
    reachable_sets,
    scalar_instance,
    scalar_unstable_instance,
)
from .ocp import (
    OcpProblem,
    OcpSolution,
    cost_gradient,
    rollout,
    shift_warm_start,
    solve_ocp,
    total_cost,
)
from .terminal import (
    QuadLagrangian,
    TerminalPair,
    alpha_bound,
    lqr_terminal_pair,
    riccati_step,
    solve_dare,
    terminal_cost,
    terminal_feedback,
)

__version__ = "0.1.0"

__all__ = [
    "AhmpcError",
    "ConfigError",
    "ControllerConfig",
    "ControllerState",
    "DareError",
    "GridInstance",
    "IdealTrajectory",
    "LinearizedStep",
    "LyapunovWindowReport",
    "Model",
    "NumericOverflowError",
    "OcpProblem",
    "OcpSolution",
    "PendulumParams",
    "QuadLagrangian",
    "SimulationLog",
    "StepRecord",
    "TerminalPair",
    "alpha_bound",
    "builtin_instances",
    "check_lyapunov_window",
    "clamp_control",
    "controller_step",
    "cost_gradient",
    "double_integrator",
    "double_pendulum",
    "extend_with_terminal_feedback",
    "horizon_field",
    "ideal_trajectory",
    "integrator_2d_instance",
    "linearize",
    "lqr_terminal_pair",
    "min_horizon",
    "pendulum_vector_field",
    "reachable_sets",
    "riccati_step",
    "rollout",
    "scalar_instance",
    "scalar_system",
    "scalar_unstable_instance",
    "shift_warm_start",
    "simulate_closed_loop",
    "solve_dare",
    "solve_ocp",
    "step_euler",
    "terminal_cost",
    "terminal_feedback",
    "total_cost",
]
