"""Behavioral phenotypes.

Every agent exposes the same two calls:

``decide(obs, rng)``
    Pure with respect to the agent's tables; returns a :class:`Decision`.
``observe(decision, obs_after)``
    The only mutator. ``decision`` is the one the agent committed to for the
    round just played and ``obs_after`` describes that round's result.

Predictive phenotypes keep two independent random streams (``rng.predict``
for the predictor, ``rng.act`` for the policy and tie breaks) so that the
prediction path does not depend on how many draws the policy consumes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .games import ACTIONS, Action, Game, Outcome, payoff, scalar_rstp
from .rl_core import TabularLearner, TDParams, implicit_reward

PHENOTYPES = ("nice", "greedy", "tft", "original", "rational", "predictive", "others_model")
LEARNING_PHENOTYPES = ("original", "rational", "predictive", "others_model")
PREDICTIVE_PHENOTYPES = ("rational", "predictive", "others_model")

OUTCOME_STATES = (Outcome.START, Outcome.R, Outcome.S, Outcome.T, Outcome.P)
COMPOSITE_STATES = tuple((o, a) for o in OUTCOME_STATES for a in ACTIONS)
OPP_ACTION_STATES = (Outcome.START,) + ACTIONS

# What the Rational/Predictive predictor conditions on. The opponent's outcome
# label also encodes this agent's own last move, which makes Tit-for-Tat
# trivially predictable, so the opponent's last action is the default.
PREDICTOR_INPUTS = ("opp_action", "opp_outcome")


class ContractError(RuntimeError):
    """An agent was driven outside its calling contract."""


@dataclass(frozen=True, slots=True)
class Observation:
    round_index: int = 0
    my_prev_outcome: Outcome = Outcome.START
    opp_prev_outcome: Outcome = Outcome.START
    opp_prev_action: Optional[Action] = None
    my_prev_reward: float = 0.0
    opp_prev_reward: float = 0.0
    my_prev_action: Optional[Action] = None


INITIAL_OBSERVATION = Observation()


@dataclass(frozen=True, slots=True)
class Decision:
    action: Action
    prediction: Optional[Action] = None
    # composite state the policy sampled from; needed to credit the right cell
    actor_state: Optional[tuple] = None


class AgentRng:
    """Per-agent pair of independent random streams."""

    __slots__ = ("predict", "act")

    def __init__(self, seed: int):
        self.predict = random.Random(f"{seed}:predict")
        self.act = random.Random(f"{seed}:act")


def best_response(game: Game, predicted_opp: Action, rng: random.Random | None = None) -> Action:
    r_c = payoff(game, Action.COOPERATE, predicted_opp)[0]
    r_d = payoff(game, Action.DEFECT, predicted_opp)[0]
    if r_c > r_d:
        return Action.COOPERATE
    if r_d > r_c:
        return Action.DEFECT
    if rng is None:
        raise ContractError("best_response tie needs an rng to break it")
    return Action.COOPERATE if rng.random() < 0.5 else Action.DEFECT


class Agent:
    phenotype: str = ""
    predictive: bool = False

    def __init__(self, game: Game, params: TDParams | None = None):
        self.game = game
        self.params = params or TDParams()
        self.predictor: TabularLearner | None = None
        self.actor_learner: TabularLearner | None = None
        self.last_prediction: Action | None = None
        self.last_action: Action | None = None
        self.observation = INITIAL_OBSERVATION

    def decide(self, obs: Observation, rng: AgentRng) -> Decision:
        raise NotImplementedError

    def redecide(self, obs: Observation, prediction: Action, rng: AgentRng) -> Decision:
        """Re-choose an action for a revised prediction (mid-round, embodied mode)."""
        raise ContractError(f"{self.phenotype} agent has no prediction to revise")

    def observe(self, decision: Decision, obs_after: Observation) -> None:
        self.last_action = decision.action
        self.last_prediction = decision.prediction
        self.observation = obs_after

    def tables(self) -> dict:
        out = {}
        if self.predictor is not None:
            out["predictor"] = self.predictor.to_dict()
        if self.actor_learner is not None:
            out["actor"] = self.actor_learner.to_dict()
        return out

    def __repr__(self):
        return f"<{type(self).__name__} game={self.game.name}>"


class NiceAgent(Agent):
    phenotype = "nice"

    def decide(self, obs, rng):
        return nice_decide()


class GreedyAgent(Agent):
    phenotype = "greedy"

    def decide(self, obs, rng):
        return greedy_decide(self.game)


class TitForTatAgent(Agent):
    phenotype = "tft"

    def decide(self, obs, rng):
        return tft_decide(obs)


class OriginalAgent(Agent):
    phenotype = "original"

    def __init__(self, game, params=None):
        super().__init__(game, params)
        self.actor_learner = TabularLearner(OUTCOME_STATES, self.params)

    def decide(self, obs, rng):
        state = obs.my_prev_outcome
        return Decision(self.actor_learner.select_action(state, rng.act), actor_state=state)

    def observe(self, decision, obs_after):
        self.actor_learner.learn(
            self.observation.my_prev_outcome,
            decision.action,
            obs_after.my_prev_reward,
            obs_after.my_prev_outcome,
        )
        super().observe(decision, obs_after)


def _opp_action_key(obs: Observation):
    return Outcome.START if obs.opp_prev_action is None else obs.opp_prev_action


def _opp_outcome_key(obs: Observation):
    return obs.opp_prev_outcome


class _PredictorMixin:
    def _init_predictor(self, predictor_input: str) -> None:
        if predictor_input == "opp_action":
            self._pkey, states = _opp_action_key, OPP_ACTION_STATES
        elif predictor_input == "opp_outcome":
            self._pkey, states = _opp_outcome_key, OUTCOME_STATES
        else:
            raise ValueError(
                f"unknown predictor_input {predictor_input!r}; valid options: {list(PREDICTOR_INPUTS)}"
            )
        self.predictor = TabularLearner(states, self.params)

    def _predict(self, obs: Observation, rng: AgentRng) -> Action:
        return self.predictor.select_action(self._pkey(obs), rng.predict)

    def _learn_prediction(self, decision: Decision, obs_after: Observation) -> None:
        if decision.prediction is None:
            raise ContractError(f"{self.phenotype} observe() called without a prediction")
        self.predictor.learn(
            self._pkey(self.observation),
            decision.prediction,
            implicit_reward(decision.prediction, obs_after.opp_prev_action),
            self._pkey(obs_after),
        )


class RationalAgent(_PredictorMixin, Agent):
    phenotype = "rational"
    predictive = True

    def __init__(self, game, params=None, predictor_input="opp_action"):
        super().__init__(game, params)
        self._init_predictor(predictor_input)

    def decide(self, obs, rng):
        prediction = self._predict(obs, rng)
        return Decision(best_response(self.game, prediction, rng.act), prediction)

    def redecide(self, obs, prediction, rng):
        return Decision(best_response(self.game, prediction, rng.act), prediction)

    def observe(self, decision, obs_after):
        self._learn_prediction(decision, obs_after)
        super().observe(decision, obs_after)


class _CompositeActorMixin:
    def _act(self, obs: Observation, prediction: Action, rng: AgentRng) -> Decision:
        state = (obs.my_prev_outcome, prediction)
        return Decision(self.actor_learner.select_action(state, rng.act), prediction, state)

    def _learn_action(self, decision: Decision, obs_after: Observation) -> None:
        # next composite state uses the opponent's realised action in the
        # prediction slot; the next prediction itself is not drawn yet
        self.actor_learner.learn(
            decision.actor_state,
            decision.action,
            obs_after.my_prev_reward,
            (obs_after.my_prev_outcome, obs_after.opp_prev_action),
        )


class PredictiveAgent(_CompositeActorMixin, _PredictorMixin, Agent):
    phenotype = "predictive"
    predictive = True

    def __init__(self, game, params=None, predictor_input="opp_action"):
        super().__init__(game, params)
        self._init_predictor(predictor_input)
        self.actor_learner = TabularLearner(COMPOSITE_STATES, self.params)

    def decide(self, obs, rng):
        return self._act(obs, self._predict(obs, rng), rng)

    def redecide(self, obs, prediction, rng):
        return self._act(obs, prediction, rng)

    def observe(self, decision, obs_after):
        self._learn_prediction(decision, obs_after)
        self._learn_action(decision, obs_after)
        super().observe(decision, obs_after)


class OthersModelAgent(_CompositeActorMixin, Agent):
    """Predicts by sampling a learned copy of the opponent's own policy.

    The opponent model is a TD learner over the opponent's outcome labels,
    trained on the opponent's taken action and explicit reward.
    """

    phenotype = "others_model"
    predictive = True

    def __init__(self, game, params=None, predictor_input="opp_action"):
        # the opponent model always lives on the opponent's own outcome states
        super().__init__(game, params)
        self.predictor = TabularLearner(OUTCOME_STATES, self.params)
        self.actor_learner = TabularLearner(COMPOSITE_STATES, self.params)

    def decide(self, obs, rng):
        prediction = self.predictor.select_action(obs.opp_prev_outcome, rng.predict)
        return self._act(obs, prediction, rng)

    def redecide(self, obs, prediction, rng):
        return self._act(obs, prediction, rng)

    def observe(self, decision, obs_after):
        if obs_after.opp_prev_action is None:
            raise ContractError("others_model observe() needs the opponent's action")
        self.predictor.learn(
            self.observation.opp_prev_outcome,
            obs_after.opp_prev_action,
            obs_after.opp_prev_reward,
            obs_after.opp_prev_outcome,
        )
        self._learn_action(decision, obs_after)
        super().observe(decision, obs_after)


def nice_decide() -> Decision:
    return Decision(Action.COOPERATE)


def greedy_decide(game: Game) -> Decision:
    r, _, t, _ = scalar_rstp(game)
    return Decision(Action.COOPERATE if r > t else Action.DEFECT)


def tft_decide(obs: Observation) -> Decision:
    if obs.round_index == 0 or obs.opp_prev_action is None:
        return Decision(Action.COOPERATE)
    return Decision(obs.opp_prev_action)


_AGENT_TYPES = {
    cls.phenotype: cls
    for cls in (NiceAgent, GreedyAgent, TitForTatAgent, OriginalAgent,
                RationalAgent, PredictiveAgent, OthersModelAgent)
}


def make_agent(phenotype: str, game: Game, params: TDParams | None = None,
               predictor_input: str = "opp_action") -> Agent:
    try:
        cls = _AGENT_TYPES[phenotype]
    except KeyError:
        raise ValueError(
            f"unknown phenotype {phenotype!r}; valid options: {list(PHENOTYPES)}"
        ) from None
    if cls.predictive:
        return cls(game, params, predictor_input)
    return cls(game, params)
