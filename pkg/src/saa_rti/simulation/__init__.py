"""Closed-loop simulation harness: plant, estimator, scenarios, controllers and batches."""
from .controllers import SAA_RTI, SAA_RTI_STATIC, SQP_LEFT, SQP_RIGHT, SSS_MPC, STRATEGIES, Controller
from .estimator import EstimatorConfig, FrictionEstimator, estimator_step
from .montecarlo import Aggregate, RunSummary, aggregate, draw_scenario, run_monte_carlo
from .plant import FrictionField, RealizedForces, plant_step
from .runner import RunResult, run_closed_loop
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_dict

__all__ = [
    "SAA_RTI", "SAA_RTI_STATIC", "SQP_LEFT", "SQP_RIGHT", "SSS_MPC", "STRATEGIES", "Controller",
    "EstimatorConfig", "FrictionEstimator", "estimator_step", "Aggregate", "RunSummary", "aggregate",
    "draw_scenario", "run_monte_carlo", "FrictionField", "RealizedForces", "plant_step", "RunResult",
    "run_closed_loop", "Scenario", "ScenarioError", "load_scenario", "scenario_from_dict",
]
