"""Discrete-time dyads and the model x opponent x game experiment grid."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from typing import Iterator, Optional

from .agents import (
    LEARNING_PHENOTYPES,
    PHENOTYPES,
    Agent,
    AgentRng,
    Decision,
    Observation,
    make_agent,
)
from .games import Action, Game, Outcome, builtin_games, classify_outcome
from .rl_core import TDParams

DEFAULT_OPPONENTS = ("greedy", "nice", "tft", "original")


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary parts (sha256 of their ``:``-joined str)."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def dyad_seed(base_seed: int, model: str, opponent: str, game: str, dyad: int) -> int:
    return derive_seed(base_seed, model, opponent, game, dyad)


@dataclass(frozen=True)
class DyadConfig:
    game: Game
    phenotype_a: str
    phenotype_b: str
    rounds: int = 1000
    seed: int = 0
    learner_params: TDParams = field(default_factory=TDParams)
    predictor_input: str = "opp_action"

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        for p in (self.phenotype_a, self.phenotype_b):
            if p not in PHENOTYPES:
                raise ValueError(f"unknown phenotype {p!r}; valid options: {list(PHENOTYPES)}")


@dataclass(slots=True)
class RoundRecord:
    round: int
    action_a: Action
    action_b: Action
    outcome_a: Outcome
    outcome_b: Outcome
    reward_a: int
    reward_b: int
    prediction_a: Optional[Action] = None
    prediction_b: Optional[Action] = None
    pred_correct_a: Optional[bool] = None
    pred_correct_b: Optional[bool] = None


RECORD_FIELDS = tuple(f.name for f in fields(RoundRecord))


@dataclass(frozen=True)
class ExperimentGrid:
    models: tuple[str, ...] = LEARNING_PHENOTYPES
    opponents: tuple[str, ...] = DEFAULT_OPPONENTS
    games: tuple[Game, ...] = field(default_factory=lambda: tuple(builtin_games()))
    dyads_per_cell: int = 50
    rounds: int = 1000
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "opponents", tuple(self.opponents))
        object.__setattr__(self, "games", tuple(self.games))
        for name in ("models", "opponents", "games"):
            if not getattr(self, name):
                raise ValueError(f"grid.{name} must be non-empty")
        for p in self.models + self.opponents:
            if p not in PHENOTYPES:
                raise ValueError(f"unknown phenotype {p!r}; valid options: {list(PHENOTYPES)}")
        if self.dyads_per_cell < 1 or self.rounds < 1:
            raise ValueError("dyads_per_cell and rounds must be >= 1")

    def cells(self) -> Iterator[tuple[str, str, Game]]:
        for model in self.models:
            for opponent in self.opponents:
                for game in self.games:
                    yield model, opponent, game

    @property
    def n_cells(self) -> int:
        return len(self.models) * len(self.opponents) * len(self.games)

    def dyad_config(self, model: str, opponent: str, game: Game, dyad: int,
                    params: TDParams, predictor_input: str = "opp_action") -> DyadConfig:
        return DyadConfig(game, model, opponent, self.rounds,
                          dyad_seed(self.base_seed, model, opponent, game.name, dyad),
                          params, predictor_input)


def _prediction_flag(decision: Decision, opp_action: Action) -> Optional[bool]:
    if decision.prediction is None:
        return None
    return decision.prediction == opp_action


def resolve_round(game: Game, round_idx: int, dec_a: Decision, dec_b: Decision,
                  rewards: tuple[int, int] | None = None) -> RoundRecord:
    a, b = dec_a.action, dec_b.action
    if rewards is None:
        rewards = game.payoff[a][b]
    return RoundRecord(
        round=round_idx,
        action_a=a,
        action_b=b,
        outcome_a=classify_outcome(game, a, b),
        outcome_b=classify_outcome(game, b, a),
        reward_a=rewards[0],
        reward_b=rewards[1],
        prediction_a=dec_a.prediction,
        prediction_b=dec_b.prediction,
        pred_correct_a=_prediction_flag(dec_a, b),
        pred_correct_b=_prediction_flag(dec_b, a),
    )


def observations_after(rec: RoundRecord) -> tuple[Observation, Observation]:
    nxt = rec.round + 1
    obs_a = Observation(nxt, rec.outcome_a, rec.outcome_b, rec.action_b,
                        rec.reward_a, rec.reward_b, rec.action_a)
    obs_b = Observation(nxt, rec.outcome_b, rec.outcome_a, rec.action_a,
                        rec.reward_b, rec.reward_a, rec.action_b)
    return obs_a, obs_b


def commit_round(agent_a: Agent, agent_b: Agent, rec: RoundRecord,
                 dec_a: Decision, dec_b: Decision) -> None:
    obs_a, obs_b = observations_after(rec)
    agent_a.observe(dec_a, obs_a)
    agent_b.observe(dec_b, obs_b)


def play_round(game: Game, agent_a: Agent, agent_b: Agent, round_idx: int,
               rng_a: AgentRng, rng_b: AgentRng) -> RoundRecord:
    # both decisions read pre-round state only; observe() runs after the record is fixed
    dec_a = agent_a.decide(agent_a.observation, rng_a)
    dec_b = agent_b.decide(agent_b.observation, rng_b)
    rec = resolve_round(game, round_idx, dec_a, dec_b)
    commit_round(agent_a, agent_b, rec, dec_a, dec_b)
    return rec


def agent_rngs(seed: int) -> tuple[AgentRng, AgentRng]:
    return AgentRng(derive_seed(seed, "a")), AgentRng(derive_seed(seed, "b"))


def make_agents(config: DyadConfig) -> tuple[Agent, Agent]:
    return (
        make_agent(config.phenotype_a, config.game, config.learner_params, config.predictor_input),
        make_agent(config.phenotype_b, config.game, config.learner_params, config.predictor_input),
    )


def run_dyad(config: DyadConfig) -> list[RoundRecord]:
    agent_a, agent_b = make_agents(config)
    rng_a, rng_b = agent_rngs(config.seed)
    game = config.game
    return [play_round(game, agent_a, agent_b, t, rng_a, rng_b) for t in range(config.rounds)]


CellKey = tuple[str, str, str]


def run_cell(grid: ExperimentGrid, model: str, opponent: str, game: Game,
             params: TDParams | None = None, predictor_input: str = "opp_action"
             ) -> list[list[RoundRecord]]:
    params = params or TDParams()
    return [
        run_dyad(grid.dyad_config(model, opponent, game, d, params, predictor_input))
        for d in range(grid.dyads_per_cell)
    ]


def run_experiment(grid: ExperimentGrid, params: TDParams | None = None,
                   predictor_input: str = "opp_action"
                   ) -> dict[tuple[str, str, str, int], list[RoundRecord]]:
    """Run every dyad of the grid in memory.

    Keys are ``(model, opponent, game_name, dyad_index)``. For full-size grids
    prefer the streaming runner in :mod:`dyadlab.runner`, which writes one cell
    at a time.
    """
    results = {}
    try:
        for model, opponent, game in grid.cells():
            for d, records in enumerate(run_cell(grid, model, opponent, game, params, predictor_input)):
                results[(model, opponent, game.name, d)] = records
    except MemoryError as exc:
        results.clear()
        raise RuntimeError("experiment aborted: out of memory; partial results discarded") from exc
    return results
