"""Differentiable locomotion-MPC autotuning toolkit (C++ core bindings)."""

from ._core import (
    MpcTheta,
    RobotParams,
    contact_at,
    continuous_dynamics,
    linearize,
    mlp_forward_file,
    raibert_placement,
    reference_states,
    simulate,
    solve_standing_mpc,
    __version__,
)

__all__ = [
    "MpcTheta",
    "RobotParams",
    "contact_at",
    "continuous_dynamics",
    "linearize",
    "mlp_forward_file",
    "raibert_placement",
    "reference_states",
    "simulate",
    "solve_standing_mpc",
    "__version__",
]
