"""Run configuration: JSON schema, validation and conversion to engine objects.

A config file is a JSON object; every key is optional except ``arena`` in
continuous mode. A run manifest is also accepted, in which case its
embedded ``config`` is used.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Discriminator,
    Field,
    Tag,
    ValidationError,
    field_validator,
    model_validator,
)

from .agents import LEARNING_PHENOTYPES, PREDICTOR_INPUTS
from .embodied import ArenaConfig, Zone
from .engine import DEFAULT_OPPONENTS, ExperimentGrid
from .games import BUILTIN_GAMES, ORDERING_CLASSES, Game, GameError, get_game, load_game
from .metrics import SurprisalParams
from .rl_core import TDParams

Phenotype = Literal["nice", "greedy", "tft", "original", "rational", "predictive", "others_model"]
BuiltinGameName = Literal[tuple(BUILTIN_GAMES)]  # type: ignore[valid-type]


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GameSpec(_Strict):
    name: str
    payoff: tuple[tuple[tuple[int, int], tuple[int, int]], tuple[tuple[int, int], tuple[int, int]]]
    ordering_class: Literal[ORDERING_CLASSES]  # type: ignore[valid-type]
    action_labels: tuple[str, str] = ("Cooperate", "Defect")
    title: str = ""

    def to_game(self) -> Game:
        return Game(self.name, self.payoff, self.ordering_class, self.action_labels, self.title)


class GameFile(_Strict):
    file: str


_GAME_TAGS = ("builtin", "inline", "file")


def _game_kind(value) -> str:
    if isinstance(value, str):
        return "builtin"
    if isinstance(value, GameFile) or (isinstance(value, dict) and "file" in value):
        return "file"
    return "inline"


# a bare string names a built-in game, {"file": ...} points at a game JSON,
# anything else is an inline definition
GameEntry = Annotated[
    Union[
        Annotated[BuiltinGameName, Tag("builtin")],
        Annotated[GameSpec, Tag("inline")],
        Annotated[GameFile, Tag("file")],
    ],
    Discriminator(_game_kind),
]


class GridSpec(_Strict):
    models: tuple[Phenotype, ...] = Field(default=LEARNING_PHENOTYPES, min_length=1)
    opponents: tuple[Phenotype, ...] = Field(default=DEFAULT_OPPONENTS, min_length=1)
    games: tuple[GameEntry, ...] = Field(
        default=tuple(BUILTIN_GAMES), min_length=1
    )
    dyads_per_cell: int = Field(default=50, ge=1)
    rounds: int = Field(default=1000, ge=1)
    base_seed: int = Field(default=0, ge=0, lt=2**63)


class LearnerSpec(_Strict):
    gamma: float = Field(default=TDParams.gamma, ge=0.0, le=1.0)
    delta: float = Field(default=TDParams.delta, gt=0.0)
    alpha: float = Field(default=TDParams.alpha, gt=0.0)
    temperature: float = Field(default=TDParams.temperature, gt=0.0)

    @field_validator("gamma", "delta", "alpha", "temperature")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    def to_params(self) -> TDParams:
        return TDParams(self.gamma, self.delta, self.alpha, self.temperature)


class ZoneSpec(_Strict):
    center: tuple[float, float]
    visual_radius: float = Field(gt=0.0)
    detect_radius: float = Field(gt=0.0)


_ARENA_DEFAULTS = ArenaConfig()


def _zone_spec(z: Zone) -> ZoneSpec:
    return ZoneSpec(center=z.center, visual_radius=z.visual_radius, detect_radius=z.detect_radius)


class ArenaSpec(_Strict):
    coop_zone: ZoneSpec = _zone_spec(_ARENA_DEFAULTS.coop_zone)
    defect_zone: ZoneSpec = _zone_spec(_ARENA_DEFAULTS.defect_zone)
    start_pose_a: tuple[float, float, float] = _ARENA_DEFAULTS.start_pose_a
    start_pose_b: tuple[float, float, float] = _ARENA_DEFAULTS.start_pose_b
    dt: float = Field(default=_ARENA_DEFAULTS.dt, gt=0.0)
    max_steps_per_round: int = Field(default=_ARENA_DEFAULTS.max_steps_per_round, ge=1)
    sensor_range: float = Field(default=_ARENA_DEFAULTS.sensor_range, gt=0.0)
    base_speed: float = Field(default=_ARENA_DEFAULTS.base_speed, ge=0.0)
    axle: float = Field(default=_ARENA_DEFAULTS.axle, gt=0.0)
    w_exc: float = _ARENA_DEFAULTS.w_exc
    w_inh: float = _ARENA_DEFAULTS.w_inh
    monitor_threshold_deg: float = Field(default=_ARENA_DEFAULTS.monitor_threshold_deg, gt=0.0, le=180.0)
    monitor_debounce: int = Field(default=_ARENA_DEFAULTS.monitor_debounce, ge=1)

    @model_validator(mode="after")
    def _geometry(self):
        self.to_arena()  # ArenaConfig raises ValueError listing geometry problems
        return self

    def to_arena(self) -> ArenaConfig:
        return ArenaConfig.from_dict(self.model_dump())


class SurprisalSpec(_Strict):
    estimator: Literal["marginal", "transition"] = "marginal"
    log_base: float = Field(default=2.0, gt=1.0)

    def to_params(self) -> SurprisalParams:
        return SurprisalParams(self.log_base, self.estimator)


class RunConfig(_Strict):
    mode: Literal["discrete", "continuous"] = "discrete"
    grid: GridSpec = GridSpec()
    learner_params: LearnerSpec = LearnerSpec()
    predictor_input: Literal[PREDICTOR_INPUTS] = "opp_action"  # type: ignore[valid-type]
    arena: Optional[ArenaSpec] = None
    surprisal: SurprisalSpec = SurprisalSpec()
    output_dir: Optional[str] = None
    emit_trajectories: bool = False
    emit_plots: bool = True

    @model_validator(mode="after")
    def _arena_for_continuous(self):
        if self.mode == "continuous" and self.arena is None:
            raise ValueError("continuous mode requires an 'arena' section (use {} for defaults)")
        return self

    def games(self, base_dir: Path | None = None) -> tuple[Game, ...]:
        out = []
        for g in self.grid.games:
            if isinstance(g, str):
                out.append(get_game(g))
            elif isinstance(g, GameFile):
                path = Path(g.file)
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                out.append(load_game(path))
            else:
                out.append(g.to_game())
        return tuple(out)

    def experiment_grid(self, base_dir: Path | None = None) -> ExperimentGrid:
        return ExperimentGrid(
            models=self.grid.models,
            opponents=self.grid.opponents,
            games=self.games(base_dir),
            dyads_per_cell=self.grid.dyads_per_cell,
            rounds=self.grid.rounds,
            base_seed=self.grid.base_seed,
        )

    def td_params(self) -> TDParams:
        return self.learner_params.to_params()

    def arena_config(self) -> ArenaConfig | None:
        return None if self.arena is None else self.arena.to_arena()

    def surprisal_params(self) -> SurprisalParams:
        return self.surprisal.to_params()

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None,
                       emit_trajectories: bool | None = None) -> RunConfig:
        data = self.model_dump()
        if seed is not None:
            data["grid"]["base_seed"] = seed
        if output_dir is not None:
            data["output_dir"] = output_dir
        if emit_trajectories is not None:
            data["emit_trajectories"] = emit_trajectories
        return RunConfig.model_validate(data)


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        parts = list(err["loc"])
        # the game-entry union adds its tag after the list index; drop it
        parts = [p for i, p in enumerate(parts)
                 if not (p in _GAME_TAGS and i > 0 and isinstance(parts[i - 1], int))]
        loc = ".".join(str(p) for p in parts) or "<root>"
        out.append(f"{loc}: {err['msg']}")
    return out


def parse_config(data: dict, base_dir: Path | None = None) -> RunConfig:
    if isinstance(data, dict) and "config" in data and "manifest_version" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    try:
        config.experiment_grid(base_dir)
    except (GameError, OSError, ValueError) as exc:
        raise ConfigError([f"grid.games: {exc}"]) from None
    return config


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
    return parse_config(data, path.parent)


def serialize_config(config: RunConfig) -> dict:
    return config.model_dump(mode="json")


def dump_config(config: RunConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(serialize_config(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
