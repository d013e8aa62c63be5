"""Continuous-time arena with two differential-drive Braitenberg agents.

Each round the adaptive layer commits to an action, which inhibits the
reactive flow toward the other reward zone. Agents then drive toward their
zone until one of them enters a detection circle. Predictive agents watch
the opponent's motion and, when it contradicts their prediction, revise the
prediction and re-decide mid-round.

Geometry lives in a normalized unit square; angles are radians, counter-
clockwise positive, with headings kept in (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

from .agents import Agent, AgentRng, Decision
from .engine import (
    DyadConfig,
    ExperimentGrid,
    RoundRecord,
    agent_rngs,
    commit_round,
    make_agents,
    resolve_round,
)
from .games import Action, Game
from .rl_core import TDParams

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    theta = math.fmod(theta, TWO_PI)
    if theta <= -math.pi:
        theta += TWO_PI
    elif theta > math.pi:
        theta -= TWO_PI
    return theta


@dataclass(frozen=True)
class Zone:
    center: tuple[float, float]
    visual_radius: float
    detect_radius: float

    def contains(self, x: float, y: float) -> bool:
        return math.hypot(x - self.center[0], y - self.center[1]) <= self.detect_radius


@dataclass(frozen=True)
class ArenaConfig:
    coop_zone: Zone = Zone((0.5, 0.8), 0.08, 0.10)
    defect_zone: Zone = Zone((0.5, 0.2), 0.04, 0.06)
    start_pose_a: tuple[float, float, float] = (0.2, 0.5, 0.0)
    start_pose_b: tuple[float, float, float] = (0.8, 0.5, math.pi)
    dt: float = 0.01
    max_steps_per_round: int = 2000
    sensor_range: float = 0.8
    base_speed: float = 0.3
    axle: float = 0.05
    w_exc: float = 1.0
    w_inh: float = 0.5
    monitor_threshold_deg: float = 60.0
    monitor_debounce: int = 10

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if not self.dt > 0:
            out.append(f"dt must be > 0, got {self.dt}")
        if self.max_steps_per_round < 1:
            out.append("max_steps_per_round must be >= 1")
        if not self.sensor_range > 0:
            out.append("sensor_range must be > 0")
        if not self.axle > 0:
            out.append("axle must be > 0")
        if self.monitor_debounce < 1:
            out.append("monitor_debounce must be >= 1")
        for name in ("coop_zone", "defect_zone"):
            z = getattr(self, name)
            if not z.detect_radius > 0:
                out.append(f"{name}.detect_radius must be > 0")
        for name in ("start_pose_a", "start_pose_b"):
            x, y, _ = getattr(self, name)
            dc = math.dist((x, y), self.coop_zone.center)
            dd = math.dist((x, y), self.defect_zone.center)
            if not math.isclose(dc, dd, rel_tol=1e-9, abs_tol=1e-9):
                out.append(f"{name} is not equidistant from the two zones ({dc:.6g} vs {dd:.6g})")
        return out

    def zone(self, action: Action) -> Zone:
        return self.coop_zone if action == Action.COOPERATE else self.defect_zone

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> ArenaConfig:
        data = dict(data)
        for name in ("coop_zone", "defect_zone"):
            if name in data and isinstance(data[name], dict):
                z = data[name]
                data[name] = Zone(tuple(z["center"]), z["visual_radius"], z["detect_radius"])
        for name in ("start_pose_a", "start_pose_b"):
            if name in data:
                data[name] = tuple(data[name])
        return cls(**data)


@dataclass
class BodyState:
    x: float
    y: float
    theta: float
    wheel_left: float = 0.0
    wheel_right: float = 0.0

    @classmethod
    def at(cls, pose: tuple[float, float, float]) -> BodyState:
        return cls(pose[0], pose[1], wrap_angle(pose[2]))

    @property
    def pose(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)


@dataclass(frozen=True)
class SensorReadings:
    sC: tuple[float, float]
    sD: tuple[float, float]
    sA: tuple[float, float]


NO_INHIBITION = "none"
INHIBIT_FC = "fC"
INHIBIT_FD = "fD"


@dataclass(frozen=True)
class InhibitionState:
    inhibited_flow: str = NO_INHIBITION


@dataclass(frozen=True)
class Wiring:
    base: float = 0.3
    w_exc: float = 1.0
    w_inh: float = 0.5

    @classmethod
    def from_arena(cls, arena: ArenaConfig) -> Wiring:
        return cls(arena.base_speed, arena.w_exc, arena.w_inh)


def bearing_to(body: BodyState, tx: float, ty: float) -> float:
    return wrap_angle(math.atan2(ty - body.y, tx - body.x) - body.theta)


def sensor_pair(body: BodyState, tx: float, ty: float, sensor_range: float) -> tuple[float, float]:
    """Left/right intensity for one target.

    ``intensity = (1 - d/range) * max(0, cos b)``, split as
    ``intensity * (1 +/- sin b) / 2`` for bearing ``b`` (left positive).
    """
    d = math.hypot(tx - body.x, ty - body.y)
    if d > sensor_range:
        return (0.0, 0.0)
    b = bearing_to(body, tx, ty)
    intensity = (1.0 - d / sensor_range) * max(0.0, math.cos(b))
    s = math.sin(b)
    left = min(1.0, max(0.0, intensity * (1.0 + s) / 2.0))
    right = min(1.0, max(0.0, intensity * (1.0 - s) / 2.0))
    return (left, right)


def sense(arena: ArenaConfig, self_body: BodyState, other_body: BodyState) -> SensorReadings:
    rng = arena.sensor_range
    return SensorReadings(
        sC=sensor_pair(self_body, *arena.coop_zone.center, rng),
        sD=sensor_pair(self_body, *arena.defect_zone.center, rng),
        sA=sensor_pair(self_body, other_body.x, other_body.y, rng),
    )


def apply_inhibition(selected: Action) -> InhibitionState:
    return InhibitionState(INHIBIT_FD if selected == Action.COOPERATE else INHIBIT_FC)


def reactive_drive(readings: SensorReadings, inhibition: InhibitionState,
                   wiring: Wiring = Wiring()) -> tuple[float, float]:
    """Crossed excitation plus direct inhibition from each active reward sensor pair."""
    ml = mr = wiring.base
    active = []
    if inhibition.inhibited_flow != INHIBIT_FC:
        active.append(readings.sC)
    if inhibition.inhibited_flow != INHIBIT_FD:
        active.append(readings.sD)
    for s_left, s_right in active:
        ml += wiring.w_exc * s_right - wiring.w_inh * s_left
        mr += wiring.w_exc * s_left - wiring.w_inh * s_right
    return ml, mr


def integrate(body: BodyState, ml: float, mr: float, dt: float, axle: float) -> BodyState:
    if not dt > 0:
        raise ValueError("dt must be > 0")
    v = (ml + mr) / 2.0
    omega = (mr - ml) / axle
    return BodyState(
        body.x + v * math.cos(body.theta) * dt,
        body.y + v * math.sin(body.theta) * dt,
        wrap_angle(body.theta + omega * dt),
        ml,
        mr,
    )


def error_monitor(prediction: Action, other_body: BodyState, arena: ArenaConfig,
                  threshold: float) -> bool:
    """Instantaneous check: does the opponent's motion contradict ``prediction``?

    True when the opponent is inside the non-predicted zone's detection circle,
    or when its heading points more than ``threshold`` radians away from the
    predicted zone.
    """
    if arena.zone(prediction.other()).contains(other_body.x, other_body.y):
        return True
    cx, cy = arena.zone(prediction).center
    return abs(bearing_to(other_body, cx, cy)) > threshold


class ErrorMonitor:
    """Debounced :func:`error_monitor`: fires after ``debounce`` consecutive hits."""

    def __init__(self, arena: ArenaConfig):
        self.arena = arena
        self.threshold = math.radians(arena.monitor_threshold_deg)
        self.debounce = arena.monitor_debounce
        self.count = 0

    def reset(self) -> None:
        self.count = 0

    def check(self, prediction: Action, other_body: BodyState) -> bool:
        arena = self.arena
        if arena.zone(prediction.other()).contains(other_body.x, other_body.y):
            self.count = 0
            return True
        if error_monitor(prediction, other_body, arena, self.threshold):
            self.count += 1
        else:
            self.count = 0
        if self.count >= self.debounce:
            self.count = 0
            return True
        return False


@dataclass(slots=True)
class ContinuousRoundRecord(RoundRecord):
    steps: int = 0
    switches_a: int = 0
    switches_b: int = 0
    timeout: bool = False
    initial_prediction_a: Optional[Action] = None
    initial_prediction_b: Optional[Action] = None


TrajectorySink = Callable[[int, int, str, BodyState, Action], None]


class _Embodiment:
    __slots__ = ("agent", "rng", "decision", "inhibition", "monitor", "switches", "body")

    def __init__(self, agent: Agent, rng: AgentRng, arena: ArenaConfig, pose):
        self.agent = agent
        self.rng = rng
        self.decision = agent.decide(agent.observation, rng)
        self.inhibition = apply_inhibition(self.decision.action)
        # error monitoring only for phenotypes that hold a prediction
        self.monitor = ErrorMonitor(arena) if self.decision.prediction is not None else None
        self.switches = 0
        self.body = BodyState.at(pose)

    def monitor_step(self, other_body: BodyState) -> None:
        if self.monitor is None:
            return
        prediction = self.decision.prediction
        if self.monitor.check(prediction, other_body):
            revised = self.agent.redecide(self.agent.observation, prediction.other(), self.rng)
            if revised.action != self.decision.action:
                self.switches += 1
                self.inhibition = apply_inhibition(revised.action)
            self.decision = revised


def _reached(arena: ArenaConfig, body: BodyState) -> bool:
    return arena.coop_zone.contains(body.x, body.y) or arena.defect_zone.contains(body.x, body.y)


def run_round_continuous(game: Game, agent_a: Agent, agent_b: Agent, arena: ArenaConfig,
                         rng_a: AgentRng, rng_b: AgentRng, round_idx: int = 0,
                         trajectory: TrajectorySink | None = None) -> ContinuousRoundRecord:
    ea = _Embodiment(agent_a, rng_a, arena, arena.start_pose_a)
    eb = _Embodiment(agent_b, rng_b, arena, arena.start_pose_b)
    init_a, init_b = ea.decision.prediction, eb.decision.prediction
    wiring = Wiring.from_arena(arena)
    dt, axle = arena.dt, arena.axle

    finished = False
    steps = 0
    while steps < arena.max_steps_per_round:
        if trajectory is not None:
            trajectory(round_idx, steps, "a", ea.body, ea.decision.action)
            trajectory(round_idx, steps, "b", eb.body, eb.decision.action)
        # lockstep: both agents sense and re-decide from the same snapshot
        body_a, body_b = ea.body, eb.body
        read_a = sense(arena, body_a, body_b)
        read_b = sense(arena, body_b, body_a)
        ea.monitor_step(body_b)
        eb.monitor_step(body_a)
        ea.body = integrate(body_a, *reactive_drive(read_a, ea.inhibition, wiring), dt, axle)
        eb.body = integrate(body_b, *reactive_drive(read_b, eb.inhibition, wiring), dt, axle)
        steps += 1
        if _reached(arena, ea.body) or _reached(arena, eb.body):
            finished = True
            break

    if trajectory is not None:
        trajectory(round_idx, steps, "a", ea.body, ea.decision.action)
        trajectory(round_idx, steps, "b", eb.body, eb.decision.action)

    base = resolve_round(game, round_idx, ea.decision, eb.decision,
                         None if finished else (0, 0))
    rec = ContinuousRoundRecord(
        **{name: getattr(base, name) for name in RoundRecord.__dataclass_fields__},
        steps=steps,
        switches_a=ea.switches,
        switches_b=eb.switches,
        timeout=not finished,
        initial_prediction_a=init_a,
        initial_prediction_b=init_b,
    )
    commit_round(agent_a, agent_b, rec, ea.decision, eb.decision)
    return rec


def run_continuous_dyad(config: DyadConfig, arena: ArenaConfig,
                        trajectory: TrajectorySink | None = None) -> list[ContinuousRoundRecord]:
    agent_a, agent_b = make_agents(config)
    rng_a, rng_b = agent_rngs(config.seed)
    return [
        run_round_continuous(config.game, agent_a, agent_b, arena, rng_a, rng_b, t, trajectory)
        for t in range(config.rounds)
    ]


def run_continuous_cell(grid: ExperimentGrid, model: str, opponent: str, game: Game,
                        arena: ArenaConfig, params: TDParams | None = None,
                        predictor_input: str = "opp_action"
                        ) -> list[list[ContinuousRoundRecord]]:
    params = params or TDParams()
    return [
        run_continuous_dyad(grid.dyad_config(model, opponent, game, d, params, predictor_input), arena)
        for d in range(grid.dyads_per_cell)
    ]


@dataclass(frozen=True)
class ContinuousExperimentConfig:
    grid: ExperimentGrid = field(default_factory=ExperimentGrid)
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    learner_params: TDParams = field(default_factory=TDParams)
    predictor_input: str = "opp_action"


def run_continuous_experiment(config: ContinuousExperimentConfig
                              ) -> dict[tuple[str, str, str, int], list[ContinuousRoundRecord]]:
    results = {}
    for model, opponent, game in config.grid.cells():
        cell = run_continuous_cell(config.grid, model, opponent, game, config.arena,
                                   config.learner_params, config.predictor_input)
        for d, records in enumerate(cell):
            results[(model, opponent, game.name, d)] = records
    return results
