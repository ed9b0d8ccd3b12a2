import pytest

from crnplan.errors import ConfigurationError, RuleViolationError
from crnplan.ludo import (
    BOARD,
    LogEntry,
    LudoEnv,
    LudoState,
    apply_move,
    legal_moves,
    ludo_uct_match,
    parse_board_map,
    play_game,
    random_agent,
    random_match,
    replay_log,
)
from crnplan.fixtures import ludo_rule_checks
from crnplan.planner import PlanningConfig, SimNoise
from crnplan.seeding import SeedScheme


def occupied(pieces, for_agent):
    return {BOARD.square(r, for_agent) for r in pieces} - {None}


def check_position(agent, opponent):
    assert len(agent) == len(opponent) == 4
    assert all(0 <= r <= BOARD.home for r in agent + opponent)
    shared = occupied(agent, True) & occupied(opponent, False)
    assert shared <= set(BOARD.safe_squares)


def test_hand_worked_positions():
    assert ludo_rule_checks(BOARD) == "rules ok"


def test_board_map_shape():
    assert BOARD.track_length == 52 and BOARD.home == 57
    assert len(BOARD.safe_squares) == 8
    assert BOARD.square(1, True) == 0 and BOARD.square(1, False) == 26
    assert BOARD.square(52, True) is None and BOARD.square(0, False) is None


@pytest.mark.parametrize("text", [
    "",
    "track_length 52\nhome_column 5\nsafe 0 8\nentry agent 0\n",
    "track_length 52\nhome_column 5\nsafe 0 8 13 21 26\nentry agent 3\nentry opponent 26\n",
    "track_length 52\nhome_column 5\nsafe 0 8\nentry agent 0\nentry opponent 0\n",
    "track_length x\n",
])
def test_bad_board_maps(text):
    with pytest.raises(ConfigurationError):
        parse_board_map(text)


def test_logged_games_replay_and_keep_invariants():
    for g in range(30):
        log = []
        result = play_game(random_agent(f"g{g}"), f"g{g}", log=log)
        for e in log:
            check_position(e.agent, e.opponent)
        final = replay_log([LogEntry.parse(e.format()) for e in log])
        assert (final.agent, final.opponent) == (result.state.agent, result.state.opponent)
        assert log[0].player == "opponent"


def test_replay_rejects_tampering():
    log = []
    play_game(random_agent("t"), "t", log=log)
    moved = next(k for k, e in enumerate(log) if e.piece)
    bad = list(log)
    e = bad[moved]
    bad[moved] = LogEntry(e.turn, e.player, e.die, e.piece, e.agent,
                          tuple(reversed(e.opponent)) if e.player == "agent" else (1, 1, 1, 1))
    with pytest.raises(RuleViolationError):
        replay_log(bad)
    swapped = [LogEntry(e.turn, "agent", e.die, e.piece, e.agent, e.opponent) for e in log[:1]]
    with pytest.raises(RuleViolationError):
        replay_log(swapped)


def test_log_line_round_trip():
    e = LogEntry(3, "agent", 6, 2, (0, 1, 0, 57), (5, 0, 0, 0))
    assert LogEntry.parse(e.format()) == e


def test_illegal_move_raises():
    s = LudoState(2, (0, 0, 0, 0), (0, 0, 0, 0))
    with pytest.raises(RuleViolationError):
        apply_move(s, 1, True)
    assert legal_moves(s, True) == ()


def test_env_adapter_is_seeded():
    env = LudoEnv()
    noise = SimNoise("s", 1, None, 0)
    s0 = env.initial_state(noise)
    assert s0 == env.initial_state(SimNoise("s", 1, None, 0))
    with pytest.raises(ConfigurationError):
        env.initial_state()
    legal = env.legal_actions(s0)
    if legal:
        a = env.step(s0, legal[0], SimNoise("s", 1, None, 1))
        assert a == env.step(s0, legal[0], SimNoise("s", 1, None, 1))


def test_random_vs_random_first_player_band():
    # the opponent always moves first; its win rate is one minus the agent's
    m = random_match(10_000, "band")
    first = 1.0 - m.win_fraction - m.capped / m.games
    assert 0.45 < first < 0.55


def test_match_determinism():
    cfg = PlanningConfig(2, 4, 2 ** 0.5, SeedScheme.dependent())
    a = ludo_uct_match(3, 4, SeedScheme.dependent(), cfg, "det")
    b = ludo_uct_match(3, 4, SeedScheme.dependent(), cfg, "det")
    assert a.rewards == b.rewards
    with pytest.raises(ConfigurationError):
        ludo_uct_match(0, 4, SeedScheme.dependent())
