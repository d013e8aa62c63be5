import json

import pytest
from hypothesis import given, strategies as st

from dyadlab.games import (
    ACTIONS,
    BATTLE_OF_EXES,
    BUILTIN_GAMES,
    C,
    D,
    HARMONY,
    HAWK_DOVE,
    PRISONERS_DILEMMA,
    STAG_HUNT,
    Action,
    Game,
    GameError,
    Outcome,
    builtin_games,
    classify_outcome,
    get_game,
    is_symmetric,
    load_game,
    payoff,
    scalar_rstp,
    validate_ordering,
)

A, B = C, D  # Battle of the Exes action names


def test_five_builtin_games_in_order():
    names = [g.name for g in builtin_games()]
    assert names == ["prisoners_dilemma", "hawk_dove", "stag_hunt", "harmony", "battle_of_exes"]


@pytest.mark.parametrize("game, a, b, expected", [
    (PRISONERS_DILEMMA, C, C, (2, 2)),
    (PRISONERS_DILEMMA, D, C, (3, 0)),
    (BATTLE_OF_EXES, A, B, (1, 4)),
    (BATTLE_OF_EXES, A, A, (0, 0)),
    (STAG_HUNT, C, C, (3, 3)),
    (STAG_HUNT, C, D, (0, 2)),
    (HAWK_DOVE, D, D, (0, 0)),
    (HARMONY, C, D, (1, 2)),
])
def test_payoff_table_entries(game, a, b, expected):
    assert payoff(game, a, b) == expected


@pytest.mark.parametrize("game, rstp", [
    (PRISONERS_DILEMMA, (2, 0, 3, 1)),
    (STAG_HUNT, (3, 0, 2, 1)),
    (HAWK_DOVE, (2, 1, 3, 0)),
    (HARMONY, (3, 1, 2, 0)),
    (BATTLE_OF_EXES, (0, 1, 4, 0)),
])
def test_scalar_rstp(game, rstp):
    assert scalar_rstp(game) == rstp


def test_classify_sucker_and_mutual_cooperation():
    assert classify_outcome(PRISONERS_DILEMMA, C, D) is Outcome.S
    for game in builtin_games():
        assert classify_outcome(game, C, C) is Outcome.R


def test_boe_high_earner_is_labelled_t():
    assert classify_outcome(BATTLE_OF_EXES, B, A) is Outcome.T
    assert classify_outcome(BATTLE_OF_EXES, A, B) is Outcome.S
    assert classify_outcome(BATTLE_OF_EXES, B, B) is Outcome.P


def test_ordering_holds_for_builtins():
    for game in builtin_games():
        assert validate_ordering(game), game.name
        assert is_symmetric(game), game.name


def test_ordering_violation_detected():
    table = ((( 4, 4), (0, 3)), ((3, 0), (1, 1)))
    assert not validate_ordering(Game("pd_bad", table, "PD"))


def test_classification_ignores_payoff_values():
    scrambled = Game("odd", (((9, 9), (7, 5)), ((5, 7), (8, 8))), "PD")
    for a in ACTIONS:
        for b in ACTIONS:
            assert classify_outcome(scrambled, a, b) == classify_outcome(PRISONERS_DILEMMA, a, b)


def test_reward_matches_outcome_label():
    for game in builtin_games():
        rstp = dict(zip("RSTP", scalar_rstp(game)))
        for a in ACTIONS:
            for b in ACTIONS:
                label = classify_outcome(game, a, b).value
                assert payoff(game, a, b)[0] == rstp[label]


@given(st.sampled_from(list(BUILTIN_GAMES.values())), st.sampled_from(ACTIONS), st.sampled_from(ACTIONS))
def test_payoff_symmetry(game, a, b):
    mine, theirs = payoff(game, a, b)
    assert payoff(game, b, a) == (theirs, mine)


def test_get_game_unknown_name_lists_options():
    with pytest.raises(GameError, match="prisoners_dilemma"):
        get_game("chicken")


def test_malformed_table_rejected():
    with pytest.raises(GameError):
        Game("bad", ((1, 2), (3, 4)), "PD")
    with pytest.raises(GameError):
        Game("bad", PRISONERS_DILEMMA.payoff, "XX")


def test_game_file_round_trip(tmp_path):
    path = tmp_path / "boe.json"
    path.write_text(json.dumps(BATTLE_OF_EXES.to_dict()))
    loaded = load_game(path)
    assert loaded == BATTLE_OF_EXES
    assert loaded.label(Action.COOPERATE) == BATTLE_OF_EXES.label(Action.COOPERATE)
