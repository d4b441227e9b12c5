"""Sampling-augmented adaptive real-time iteration for vehicle control at the friction limit."""
from .constraints import InputPolytope, build_input_constraints
from .frenet import Centerline
from .optimizer import optimize
from .qp import QpProblem, solve
from .sampling import sample_trajectories, select_trajectory
from .vehicle_model import VehicleParams, discrete_step, linearize

__all__ = [
    "InputPolytope", "build_input_constraints", "Centerline", "optimize", "QpProblem", "solve",
    "sample_trajectories", "select_trajectory", "VehicleParams", "discrete_step", "linearize",
]
