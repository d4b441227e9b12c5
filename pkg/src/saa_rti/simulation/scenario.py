"""Scenario configuration: nested dataclasses loaded from YAML."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml

from ..constraints import ActuatorLimits
from ..frenet import Centerline
from ..optimizer import CorridorConfig, OptimizerConfig, SlackWeights
from ..qp import QpSettings
from ..sampling import CostWeights, Obstacle, SamplerConfig
from ..vehicle_model import VehicleParams, steady_cornering_vy
from .estimator import EstimatorConfig
from .plant import FrictionField


class ScenarioError(ValueError):
    """Invalid or inconsistent scenario configuration."""


@dataclass(frozen=True)
class RoadConfig:
    kind: str = "straight"          # straight | curve | breakpoints
    radius: float = 100.0
    length: float = 400.0
    half_width: float = 3.75
    breakpoints: tuple = ()

    def build(self) -> Centerline:
        return _build_road(self)

    def _construct(self) -> Centerline:
        if self.kind == "straight":
            return Centerline.straight(self.length, self.half_width)
        if self.kind == "curve":
            return Centerline.constant_curve(self.radius, self.length, self.half_width)
        if self.kind == "breakpoints":
            return Centerline.from_breakpoints(self.breakpoints)
        raise ScenarioError(f"unknown road kind {self.kind!r}")


@lru_cache(maxsize=32)
def _build_road(road: RoadConfig) -> Centerline:
    return road._construct()


@dataclass(frozen=True)
class ObstacleSpec:
    s_ahead: float = 15.0
    d: float = 0.0
    r: float = 0.5
    appear_time: float = 0.0


@dataclass(frozen=True)
class InitialState:
    s: float = 0.0
    d: float = 0.0
    dpsi: float | None = None       # None: velocity aligned with the lane
    psidot: float | None = None     # None: steady-state value kappa * vx
    vx: float = 15.0
    vy: float | None = None         # None: steady-cornering value for that yaw rate


@dataclass(frozen=True)
class TargetConfig:
    kind: str = "stop"              # stop | speed
    speed: float = 0.0
    stop_speed: float = 0.5
    raw_state: bool = False         # penalize raw states instead of deviations from the target

    def __post_init__(self):
        if self.kind not in ("stop", "speed"):
            raise ScenarioError(f"unknown target kind {self.kind!r}")


@dataclass(frozen=True)
class WeightConfig:
    Q: tuple = (0.0, 0.02, 0.05, 0.02, 0.003, 0.02)
    Qf: tuple = (0.0, 0.1, 0.25, 0.1, 0.015, 0.1)
    R: tuple = (1e-9, 1e-10)

    def build(self) -> CostWeights:
        return CostWeights.from_diagonals(self.Q, self.Qf, self.R)


@dataclass(frozen=True)
class TrackerConfig:
    """Weights and tube for the plan-tracking configuration of the QP."""

    Q: tuple = (0.5, 2.0, 2.0, 0.5, 0.5, 0.5)
    Qf: tuple = (0.5, 2.0, 2.0, 0.5, 0.5, 0.5)
    R: tuple = (1e-9, 1e-10)
    ds: float = 1.0
    dd: float = 0.25
    dvx: float = 1.0


@dataclass(frozen=True)
class ControllerConfig:
    N: int = 40
    Ts: float = 0.05
    weights: WeightConfig = WeightConfig()
    beta: float = 1e6
    n_edges: int = 16
    mu_design: float = 1.2
    Fx_min: float = -16e3
    Fx_max: float = 4e3
    r_veh: float = 1.0
    grid: SamplerConfig = SamplerConfig()
    corridor: CorridorConfig = CorridorConfig()
    qp: QpSettings = QpSettings()
    tracker: TrackerConfig = TrackerConfig()
    sqp_tol: float = 1e-4           # kN, on the input update
    sqp_max_iter: int = 50

    def limits(self, params: VehicleParams) -> ActuatorLimits:
        return ActuatorLimits(0.95 * params.Fzf * self.mu_design, self.Fx_min, self.Fx_max)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(self.corridor, SlackWeights(self.beta * np.eye(3)), self.qp, r_veh=self.r_veh)


@dataclass(frozen=True)
class MonteCarloConfig:
    obstacle_s_range: tuple = (12.0, 25.0)
    obstacle_d_range: tuple = (-0.5, 0.5)
    initial_conditions: tuple = (
        {"road": {"kind": "straight"}, "vx": 20.0},
        {"road": {"kind": "curve", "radius": 100.0}, "vx": 15.0},
        {"road": {"kind": "curve", "radius": 35.0}, "vx": 10.0},
    )
    conditions: tuple = (("wet", 0.55), ("dry", 0.95))


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    road: RoadConfig = RoadConfig()
    initial: InitialState = InitialState()
    obstacles: tuple = (ObstacleSpec(),)
    friction: FrictionField = FrictionField.constant(0.95)
    estimator: EstimatorConfig = EstimatorConfig()
    controller: ControllerConfig = ControllerConfig()
    vehicle: VehicleParams = VehicleParams()
    target: TargetConfig = TargetConfig()
    seed: int = 0
    duration: float = 6.0
    plant_substeps: int = 10
    monte_carlo: MonteCarloConfig = MonteCarloConfig()

    def __post_init__(self):
        if self.duration <= 0 or self.plant_substeps < 1:
            raise ScenarioError("duration and plant_substeps must be positive")
        cl = self.road.build()
        if not cl.s[0] <= self.initial.s < cl.s[-1]:
            raise ScenarioError("initial position outside the road")
        if abs(self.initial.d) + self.controller.r_veh > cl.width(self.initial.s):
            raise ScenarioError("initial position off the drivable area")
        if self.initial.vx < 0:
            raise ScenarioError("initial speed must be non-negative")
        for ob in self.obstacles:
            s_ob = self.initial.s + ob.s_ahead
            if not cl.s[0] <= s_ob <= cl.s[-1] or abs(ob.d) > cl.width(s_ob):
                raise ScenarioError(f"obstacle at s={s_ob}, d={ob.d} is not on the road")
        self.controller.optimizer_config().slack.check_dominates(self.controller.weights.build())

    # derived objects
    def centerline(self) -> Centerline:
        return self.road.build()

    def initial_state(self) -> np.ndarray:
        ini = self.initial
        kappa = float(self.centerline().curvature(ini.s))
        psidot = kappa * ini.vx if ini.psidot is None else ini.psidot
        vy = steady_cornering_vy(ini.vx, psidot, self.vehicle) if ini.vy is None else ini.vy
        dpsi = -float(np.arctan2(vy, ini.vx)) if ini.dpsi is None else ini.dpsi
        return np.array([ini.s, ini.d, dpsi, psidot, ini.vx, vy], dtype=float)

    def obstacle_list(self) -> list[tuple[Obstacle, float]]:
        """Obstacles in absolute arc length, paired with their appear times."""
        return [(Obstacle(self.initial.s + o.s_ahead, o.d, o.r), o.appear_time) for o in self.obstacles]

    def reference_state(self) -> np.ndarray:
        if self.target.raw_state:
            return np.zeros(6)
        v = 0.0 if self.target.kind == "stop" else self.target.speed
        return np.array([0.0, 0.0, 0.0, 0.0, v, 0.0])

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


# YAML <-> dataclass
_NESTED = {
    Scenario: {"road": RoadConfig, "initial": InitialState, "estimator": EstimatorConfig,
               "controller": ControllerConfig, "vehicle": VehicleParams, "target": TargetConfig,
               "monte_carlo": MonteCarloConfig},
    ControllerConfig: {"weights": WeightConfig, "grid": SamplerConfig, "corridor": CorridorConfig,
                       "qp": QpSettings, "tracker": TrackerConfig},
}


def _tuplify(v):
    if isinstance(v, list):
        return tuple(_tuplify(i) for i in v)
    return v


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ScenarioError(f"{path or 'scenario'} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ScenarioError(f"unknown keys in {path or 'scenario'}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get(cls, {}).get(key)
        where = f"{path}.{key}" if path else key
        if sub is not None:
            kwargs[key] = _build(sub, value, where)
        elif cls is Scenario and key == "obstacles":
            kwargs[key] = tuple(_build(ObstacleSpec, o, f"{where}[{i}]") for i, o in enumerate(value or []))
        elif cls is Scenario and key == "friction":
            kwargs[key] = _friction(value)
        else:
            kwargs[key] = _tuplify(value)
    try:
        return cls(**kwargs)
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path or 'scenario'}: {exc}") from exc


def _friction(value) -> FrictionField:
    try:
        if isinstance(value, (int, float)):
            return FrictionField.constant(float(value))
        if isinstance(value, dict) and set(value) <= {"mu_act", "segments"}:
            if "segments" in value:
                seg = value["segments"]
                return FrictionField(tuple(float(a) for a, _ in seg), tuple(float(b) for _, b in seg))
            return FrictionField.constant(float(value["mu_act"]))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"friction: {exc}") from exc
    raise ScenarioError("friction must be a number, {mu_act: x} or {segments: [[s, mu], ...]}")


def scenario_from_dict(data: dict) -> Scenario:
    return _build(Scenario, data, "")


def load_scenario(path) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise ScenarioError(f"scenario file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {p}: {exc}") from exc
    return scenario_from_dict(data or {})


def _plain(v):
    if dataclasses.is_dataclass(v):
        return {f.name: _plain(getattr(v, f.name)) for f in dataclasses.fields(v)}
    if isinstance(v, (tuple, list)):
        return [_plain(i) for i in v]
    if isinstance(v, dict):
        return {k: _plain(i) for k, i in v.items()}
    if isinstance(v, np.generic):
        return v.item()
    return v


def scenario_to_dict(scn: Scenario) -> dict:
    out = _plain(scn)
    out["friction"] = {"segments": [[a, b] for a, b in zip(scn.friction.starts, scn.friction.values)]}
    return out


def dump_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(scn), sort_keys=False))
