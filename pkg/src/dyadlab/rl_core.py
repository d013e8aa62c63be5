"""Tabular actor-critic TD(0) learner over two actions.

The critic keeps one value per state, the actor one preference per
(state, action). Action selection is a softmax over the actor row.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Hashable, Iterable

from .games import ACTIONS, Action


class UnknownStateError(KeyError):
    """A learner was queried with a state outside its declared space."""


@dataclass(frozen=True)
class TDParams:
    """Learner hyperparameters.

    ``alpha`` (critic rate) and ``temperature`` default high enough that the
    critic baseline catches up before an early, all-positive reward stream
    locks the actor onto whichever action it happened to sample first.
    """

    gamma: float = 0.9
    delta: float = 0.15
    alpha: float = 1.0
    temperature: float = 2.0

    def __post_init__(self):
        for name in ("gamma", "delta", "alpha", "temperature"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        for name in ("delta", "alpha", "temperature"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return asdict(self)


def _state_name(state) -> str:
    if isinstance(state, tuple):
        return "|".join(_state_name(s) for s in state)
    if isinstance(state, Action):
        return _action_name(state)
    return str(getattr(state, "value", state))


def _action_name(action: Action) -> str:
    return action.name.lower()


def softmax_cooperate_probability(pref_c: float, pref_d: float, temperature: float) -> float:
    z = (pref_d - pref_c) / temperature
    # logistic form of the two-way softmax; branches avoid exp overflow
    if z >= 0:
        ez = math.exp(-z)
        return ez / (1.0 + ez)
    return 1.0 / (1.0 + math.exp(z))


class TabularLearner:
    __slots__ = ("states", "params", "_index", "_values", "_prefs")

    def __init__(self, states: Iterable[Hashable], params: TDParams | None = None):
        self.states = tuple(states)
        if len(set(self.states)) != len(self.states):
            raise ValueError("duplicate state identifiers")
        self.params = params or TDParams()
        self._index = {s: i for i, s in enumerate(self.states)}
        self._values = [0.0] * len(self.states)
        self._prefs = [[0.0, 0.0] for _ in self.states]

    def _idx(self, state) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise UnknownStateError(
                f"state {state!r} not in learner state space {self.states!r}"
            ) from None

    def value(self, state) -> float:
        return self._values[self._idx(state)]

    def pref(self, state, action: Action) -> float:
        return self._prefs[self._idx(state)][action]

    def probabilities(self, state) -> tuple[float, float]:
        row = self._prefs[self._idx(state)]
        p_c = softmax_cooperate_probability(row[0], row[1], self.params.temperature)
        return p_c, 1.0 - p_c

    def select_action(self, state, rng) -> Action:
        row = self._prefs[self._idx(state)]
        p_c = softmax_cooperate_probability(row[0], row[1], self.params.temperature)
        return Action.COOPERATE if rng.random() < p_c else Action.DEFECT

    def td_error(self, s_prev, r: float, s_cur) -> float:
        values = self._values
        return r + self.params.gamma * values[self._idx(s_cur)] - values[self._idx(s_prev)]

    def apply_update(self, s_prev, a_taken: Action, e: float) -> None:
        i = self._idx(s_prev)
        self._prefs[i][a_taken] += self.params.delta * e
        self._values[i] += self.params.alpha * e

    def learn(self, s_prev, a_taken: Action, r: float, s_cur) -> float:
        """One full TD step; returns the error that was applied."""
        e = self.td_error(s_prev, r, s_cur)
        self.apply_update(s_prev, a_taken, e)
        return e

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "values": {_state_name(s): self._values[i] for i, s in enumerate(self.states)},
            "prefs": {
                _state_name(s): {_action_name(a): self._prefs[i][a] for a in ACTIONS}
                for i, s in enumerate(self.states)
            },
        }

    def load_tables(self, data: dict) -> None:
        """Restore tables written by :meth:`to_dict` into this learner."""
        names = {_state_name(s): i for i, s in enumerate(self.states)}
        for name, v in data["values"].items():
            self._values[names[name]] = float(v)
        for name, row in data["prefs"].items():
            i = names[name]
            for a in ACTIONS:
                self._prefs[i][a] = float(row[_action_name(a)])


def select_action(learner: TabularLearner, state, rng) -> Action:
    return learner.select_action(state, rng)


def td_error(learner: TabularLearner, s_prev, r: float, s_cur) -> float:
    return learner.td_error(s_prev, r, s_cur)


def apply_update(learner: TabularLearner, s_prev, a_taken: Action, e: float) -> None:
    learner.apply_update(s_prev, a_taken, e)


def implicit_reward(predicted: Action, actual: Action) -> float:
    return 1.0 if predicted == actual else -1.0
