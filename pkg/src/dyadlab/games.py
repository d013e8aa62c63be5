"""Two-player, two-action normal-form games.

Payoffs are stored from the row player's point of view as
``payoff[a_self][a_other] -> (r_self, r_other)``. The five built-in games
are symmetric, so the same table serves both seats of a dyad.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from pathlib import Path


class Action(IntEnum):
    COOPERATE = 0
    DEFECT = 1

    def other(self) -> Action:
        return Action.DEFECT if self is Action.COOPERATE else Action.COOPERATE

    @property
    def code(self) -> str:
        return "C" if self is Action.COOPERATE else "D"

    @classmethod
    def from_code(cls, code: str) -> Action:
        try:
            return _ACTION_CODES[code]
        except KeyError:
            raise ValueError(f"unknown action code {code!r}") from None


_ACTION_CODES = {"C": Action.COOPERATE, "D": Action.DEFECT}

C = Action.COOPERATE
D = Action.DEFECT
ACTIONS = (C, D)


class Outcome(str, Enum):
    R = "R"
    S = "S"
    T = "T"
    P = "P"
    START = "Start"


# (a_self, a_other) -> label; label depends on the action pair only
_OUTCOME_BY_ACTIONS = {
    (C, C): Outcome.R,
    (C, D): Outcome.S,
    (D, C): Outcome.T,
    (D, D): Outcome.P,
}

ORDERING_CLASSES = ("PD", "SH", "HD", "HG", "BoE")

Payoff = tuple[tuple[tuple[int, int], tuple[int, int]], tuple[tuple[int, int], tuple[int, int]]]


class GameError(ValueError):
    pass


@dataclass(frozen=True)
class Game:
    name: str
    payoff: Payoff
    ordering_class: str
    action_labels: tuple[str, str] = ("Cooperate", "Defect")
    title: str = field(default="", compare=False)

    def __post_init__(self):
        if self.ordering_class not in ORDERING_CLASSES:
            raise GameError(
                f"game {self.name!r}: ordering_class must be one of {ORDERING_CLASSES}, "
                f"got {self.ordering_class!r}"
            )
        try:
            rows = tuple(
                tuple((int(cell[0]), int(cell[1])) for cell in row) for row in self.payoff
            )
        except (TypeError, IndexError, ValueError) as exc:
            raise GameError(f"game {self.name!r}: malformed payoff table") from exc
        if len(rows) != 2 or any(len(row) != 2 for row in rows):
            raise GameError(f"game {self.name!r}: payoff table must be 2x2")
        object.__setattr__(self, "payoff", rows)

    def label(self, action: Action) -> str:
        return self.action_labels[action]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "payoff": [[list(cell) for cell in row] for row in self.payoff],
            "ordering_class": self.ordering_class,
            "action_labels": list(self.action_labels),
            **({"title": self.title} if self.title else {}),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Game:
        missing = {"name", "payoff", "ordering_class"} - set(data)
        if missing:
            raise GameError(f"game definition missing keys: {sorted(missing)}")
        labels = tuple(data.get("action_labels", ("Cooperate", "Defect")))
        if len(labels) != 2:
            raise GameError("action_labels must have exactly two entries")
        return cls(
            name=data["name"],
            payoff=data["payoff"],
            ordering_class=data["ordering_class"],
            action_labels=labels,
            title=data.get("title", ""),
        )


def payoff(game: Game, a_self: Action, a_other: Action) -> tuple[int, int]:
    return game.payoff[a_self][a_other]


def classify_outcome(game: Game, a_self: Action, a_other: Action) -> Outcome:
    """Label the round from the self player's seat.

    For Battle of the Exes, Cooperate is the low-reward action A and Defect
    the high-reward action B, so the action-based rule gives T for earning 4,
    S for earning 1, R for (A, A) and P for (B, B).
    """
    return _OUTCOME_BY_ACTIONS[(Action(a_self), Action(a_other))]


def scalar_rstp(game: Game) -> tuple[int, int, int, int]:
    table = game.payoff
    return (table[C][C][0], table[C][D][0], table[D][C][0], table[D][D][0])


def is_symmetric(game: Game) -> bool:
    return all(
        game.payoff[a][b][0] == game.payoff[b][a][1] for a in ACTIONS for b in ACTIONS
    )


def validate_ordering(game: Game) -> bool:
    r, s, t, p = scalar_rstp(game)
    cls = game.ordering_class
    if cls == "PD":
        return t > r > p > s
    if cls == "SH":
        return r > t > p > s
    if cls == "HD":
        return t > r > s > p
    if cls == "HG":
        return r > t > s > p
    if cls == "BoE":
        return t > s and r == 0 and p == 0
    return False


def _symmetric_table(r: int, s: int, t: int, p: int) -> Payoff:
    return (((r, r), (s, t)), ((t, s), (p, p)))


PRISONERS_DILEMMA = Game("prisoners_dilemma", _symmetric_table(2, 0, 3, 1), "PD",
                         title="Prisoner's Dilemma")
STAG_HUNT = Game("stag_hunt", _symmetric_table(3, 0, 2, 1), "SH", title="Stag-Hunt")
HAWK_DOVE = Game("hawk_dove", _symmetric_table(2, 1, 3, 0), "HD", title="Hawk-Dove")
HARMONY = Game("harmony", _symmetric_table(3, 1, 2, 0), "HG", title="Harmony")
BATTLE_OF_EXES = Game("battle_of_exes", _symmetric_table(0, 1, 4, 0), "BoE",
                      action_labels=("A", "B"), title="Battle of the Exes")

_BUILTIN = (PRISONERS_DILEMMA, HAWK_DOVE, STAG_HUNT, HARMONY, BATTLE_OF_EXES)
BUILTIN_GAMES = {g.name: g for g in _BUILTIN}


def builtin_games() -> list[Game]:
    return list(_BUILTIN)


def get_game(name: str) -> Game:
    try:
        return BUILTIN_GAMES[name]
    except KeyError:
        raise GameError(
            f"unknown game {name!r}; valid options: {sorted(BUILTIN_GAMES)}"
        ) from None


def load_game(path: str | Path) -> Game:
    with open(path) as fh:
        return Game.from_dict(json.load(fh))
