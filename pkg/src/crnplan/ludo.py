"""Two-player Ludo against a uniform-random opponent.

The opponent is folded into the environment: after the agent moves (and
finishes any extra rolls earned by sixes) the opponent rolls and picks one of
its legal moves uniformly at random, then the agent's next die is rolled.  The
agent sees a state only when it has at least one legal move.

Piece progress is stored relative to the owning player (see
``data/ludo_board.txt``): 0 is the start area, 1..51 the main track, 52..56
the home column and 57 home.  Moves are piece numbers 1..4.

Rules pinned here:

* a 6 is needed to leave the start area, which puts the piece on its entry
  square;
* pieces must reach home on an exact count;
* landing on a main-track square that is not safe sends every opposing piece
  there back to start;
* a 6 earns another roll, but a third consecutive 6 forfeits the rest of the
  turn without moving;
* the game ends when a player has all four pieces home or after 300 piece
  moves, whichever comes first.  A capped game pays the agent 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence

from .errors import ConfigurationError, RuleViolationError
from .seeding import GAMMA, MASK64, SEP, CounterStream, SeedScheme, fnv1a64, mix64, to_unit

MOVE_CAP = 300
PIECES = 4
MOVES = (1, 2, 3, 4)

# -- board ----------------------------------------------------------------------


@dataclass(frozen=True)
class BoardMap:
    track_length: int
    home_column: int
    safe_squares: frozenset
    agent_entry: int
    opponent_entry: int

    def __post_init__(self):
        n = self.track_length
        if n < 2 or self.home_column < 1:
            raise ConfigurationError("track and home column must be non-empty")
        for sq in self.safe_squares:
            if not 0 <= sq < n:
                raise ConfigurationError(f"safe square {sq} off the track")
        for entry in (self.agent_entry, self.opponent_entry):
            if not 0 <= entry < n:
                raise ConfigurationError(f"entry square {entry} off the track")
            if entry not in self.safe_squares:
                raise ConfigurationError(f"entry square {entry} must be safe")
        if self.agent_entry == self.opponent_entry:
            raise ConfigurationError("players need distinct entry squares")
        home = n + self.home_column
        object.__setattr__(self, "home", home)
        # per player, relative position -> absolute square (-1 off the track)
        tables = {}
        for for_agent, entry in ((True, self.agent_entry), (False, self.opponent_entry)):
            tables[for_agent] = tuple((entry + r - 1) % n if 1 <= r < n else -1
                                      for r in range(home + 1))
        object.__setattr__(self, "_squares", tables)

    home: int = field(init=False, repr=False, compare=False)

    @property
    def last_track(self) -> int:
        """Last relative position on the shared main track."""
        return self.track_length - 1

    def square(self, relative: int, for_agent: bool) -> Optional[int]:
        """Absolute main-track square, or None off the shared track."""
        sq = self._squares[for_agent][relative]
        return None if sq < 0 else sq


def parse_board_map(text: str) -> BoardMap:
    fields: dict = {}
    entries: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        key, args = line[0], line[1:]
        try:
            if key in ("track_length", "home_column") and len(args) == 1:
                fields[key] = int(args[0])
            elif key == "safe" and args:
                fields["safe_squares"] = frozenset(int(a) for a in args)
            elif key == "entry" and len(args) == 2 and args[0] in ("agent", "opponent"):
                entries[args[0]] = int(args[1])
            else:
                raise ValueError
        except ValueError:
            raise ConfigurationError(f"board map line {lineno}: cannot parse {raw!r}") from None
    missing = {"track_length", "home_column", "safe_squares"} - fields.keys()
    missing |= {f"entry {p}" for p in ("agent", "opponent") if p not in entries}
    if missing:
        raise ConfigurationError(f"board map lacks {', '.join(sorted(missing))}")
    return BoardMap(agent_entry=entries["agent"], opponent_entry=entries["opponent"], **fields)


def load_board_map(path=None) -> BoardMap:
    if path is None:
        text = resources.files("crnplan").joinpath("data/ludo_board.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_board_map(text)


BOARD = load_board_map()

# -- state and rules ------------------------------------------------------------


class LudoState(NamedTuple):
    """Board seen by the player about to move with ``die``.

    ``sixes`` counts the consecutive sixes already rolled in the current turn
    before ``die``; ``moves`` counts piece moves by both players so far.
    """

    die: int
    agent: tuple
    opponent: tuple
    sixes: int = 0
    moves: int = 0


def initial_state(die: int = 1) -> LudoState:
    return LudoState(die, (0,) * PIECES, (0,) * PIECES)


def all_home(pieces: Sequence[int], board: BoardMap = BOARD) -> bool:
    return all(p == board.home for p in pieces)


def is_terminal(state: LudoState, board: BoardMap = BOARD, cap: int = MOVE_CAP) -> bool:
    return (all_home(state.agent, board) or all_home(state.opponent, board)
            or state.moves >= cap)


def legal_moves(state: LudoState, for_agent: bool, board: BoardMap = BOARD) -> tuple:
    """Piece numbers (1..4) that may move with ``state.die``."""
    pieces = state.agent if for_agent else state.opponent
    die, home = state.die, board.home
    legal = []
    for i, p in enumerate(pieces):
        if p == 0:
            if die == 6:
                legal.append(i + 1)
        elif p + die <= home:
            legal.append(i + 1)
    return tuple(legal)


def apply_move(state: LudoState, move: int, for_agent: bool, board: BoardMap = BOARD) -> LudoState:
    """Move piece ``move`` by ``state.die`` and resolve captures.

    The returned state keeps ``die`` so callers can tell whether the move
    earned another roll (``die == 6``).
    """
    mine, theirs = (state.agent, state.opponent) if for_agent else (state.opponent, state.agent)
    if move not in MOVES:
        raise RuleViolationError(f"no piece {move!r}")
    p = mine[move - 1]
    die = state.die
    if p == 0:
        if die != 6:
            raise RuleViolationError(f"piece {move} needs a 6 to leave start, rolled {die}")
        q = 1
    elif p + die > board.home:
        raise RuleViolationError(f"piece {move} at {p} cannot move {die}")
    else:
        q = p + die
    mine = mine[: move - 1] + (q,) + mine[move:]
    sq = board._squares[for_agent][q]
    if sq >= 0 and sq not in board.safe_squares:
        other = board._squares[not for_agent]
        if sq in (other[t] for t in theirs):
            theirs = tuple(0 if other[t] == sq else t for t in theirs)
    if for_agent:
        return LudoState(die, mine, theirs, state.sixes, state.moves + 1)
    return LudoState(die, theirs, mine, state.sixes, state.moves + 1)


# -- randomness -----------------------------------------------------------------

# Purposes get interleaved, independent counters so that e.g. an extra
# opponent roll never shifts the agent's dice.
AGENT_DIE, OPPONENT_DIE, OPPONENT_CHOICE, ROLLOUT = 0, 1, 2, 3
_PURPOSES = 4


class Dice:
    """Die rolls and opponent choices for one environment step.

    The ``c``-th draw for purpose ``p`` is the splitmix64 output at counter
    ``4c + p + 1`` of the step's seed.
    """

    __slots__ = ("seed", "_counts")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self._counts = [0, 0, 0, 0]

    def _below(self, purpose: int, n: int) -> int:
        c = self._counts[purpose]
        self._counts[purpose] = c + 1
        x = mix64((self.seed + (_PURPOSES * c + purpose + 1) * GAMMA) & MASK64)
        return min(int(to_unit(x) * n), n - 1)

    def roll(self, for_agent: bool) -> int:
        return self._below(AGENT_DIE if for_agent else OPPONENT_DIE, 6) + 1

    def opponent_choice(self, n: int) -> int:
        return self._below(OPPONENT_CHOICE, n)

    def rollout_choice(self, n: int) -> int:
        return self._below(ROLLOUT, n)


@dataclass(frozen=True)
class LogEntry:
    """One line of a game log: a roll and the piece moved (0 for none)."""

    turn: int
    player: str
    die: int
    piece: int
    agent: tuple
    opponent: tuple

    def format(self) -> str:
        pos = lambda ps: ",".join(map(str, ps))  # noqa: E731
        return f"{self.turn} {self.player} {self.die} {self.piece} {pos(self.agent)} {pos(self.opponent)}"

    @classmethod
    def parse(cls, line: str) -> "LogEntry":
        turn, player, die, piece, agent, opponent = line.split()
        pos = lambda s: tuple(int(x) for x in s.split(","))  # noqa: E731
        return cls(int(turn), player, int(die), int(piece), pos(agent), pos(opponent))


class _Turns:
    """Turn counter shared by a game's log entries."""

    __slots__ = ("log", "turn")

    def __init__(self, log: Optional[list], turn: int = 0):
        self.log = log
        self.turn = turn

    def record(self, player: str, die: int, piece: int, state: LudoState):
        if self.log is not None:
            self.log.append(LogEntry(self.turn, player, die, piece, state.agent, state.opponent))


def _resolve(state: LudoState, agent_turn: bool, sixes: int, dice: Dice,
             board: BoardMap, cap: int, turns: Optional[_Turns] = None):
    """Roll until the agent has a move to choose or the game ends.

    Returns ``(state, terminated)``; a non-terminal state carries the agent's
    die and at least one legal agent move.
    """
    while True:
        if turns is not None and sixes == 0:
            turns.turn += 1
        d = dice.roll(agent_turn)
        if d == 6 and sixes == 2:
            if turns is not None:
                turns.record("agent" if agent_turn else "opponent", d, 0, state)
            agent_turn, sixes = not agent_turn, 0
            continue
        state = state._replace(die=d, sixes=sixes)
        if agent_turn:
            if legal_moves(state, True, board):
                return state, False
            if turns is not None:
                turns.record("agent", d, 0, state)
        else:
            legal = legal_moves(state, False, board)
            piece = 0
            if legal:
                piece = legal[dice.opponent_choice(len(legal))]
                state = apply_move(state, piece, False, board)
            if turns is not None:
                turns.record("opponent", d, piece, state)
            if legal and (all_home(state.opponent, board) or state.moves >= cap):
                return state, True
        if d == 6:
            sixes += 1
        else:
            agent_turn, sixes = not agent_turn, 0


def start_game(dice: Dice, board: BoardMap = BOARD, cap: int = MOVE_CAP,
               log: Optional[list] = None, turns: Optional[_Turns] = None):
    """Opening position: the opponent moves first, then the agent rolls."""
    if turns is None and log is not None:
        turns = _Turns(log)
    return _resolve(initial_state(), False, 0, dice, board, cap, turns)


def env_step(state: LudoState, agent_move: int, dice: Dice, board: BoardMap = BOARD,
             cap: int = MOVE_CAP, turns: Optional[_Turns] = None):
    """Play ``agent_move`` and everything up to the agent's next decision.

    Returns ``(next_state, reward, terminated)``.
    """
    if agent_move not in legal_moves(state, True, board):
        raise RuleViolationError(f"piece {agent_move!r} cannot move with a {state.die}")
    nxt = apply_move(state, agent_move, True, board)
    if turns is not None:
        turns.record("agent", state.die, agent_move, nxt)
    if all_home(nxt.agent, board):
        return nxt, 1.0, True
    if nxt.moves >= cap:
        return nxt, 0.0, True
    if state.die == 6:
        nxt, done = _resolve(nxt, True, state.sixes + 1, dice, board, cap, turns)
    else:
        nxt, done = _resolve(nxt, False, 0, dice, board, cap, turns)
    return nxt, 0.0, done


# -- game log replay ------------------------------------------------------------


def replay_log(entries: Sequence[LogEntry], board: BoardMap = BOARD) -> LudoState:
    """Re-apply a game log under the rules, checking every line.

    Verifies turn alternation (a player keeps the turn only after a 6, and at
    most three rolls), that each recorded move is legal, that passes happen
    only when nothing can move, and that recorded positions match.
    """
    state = initial_state()
    player, rolls, turn = None, 0, 0
    last_die = None
    for k, e in enumerate(entries):
        if e.player not in ("agent", "opponent"):
            raise RuleViolationError(f"line {k + 1}: unknown player {e.player!r}")
        if player is None:
            if e.player != "opponent":
                raise RuleViolationError("the opponent moves first")
            player, rolls, turn = e.player, 0, e.turn
        elif e.player == player and last_die == 6 and rolls < 3:
            if e.turn != turn:
                raise RuleViolationError(f"line {k + 1}: extra roll must keep the turn number")
        else:
            if e.player == player:
                raise RuleViolationError(f"line {k + 1}: {player} moved twice without a 6")
            if e.turn != turn + 1:
                raise RuleViolationError(f"line {k + 1}: turn number must advance by one")
            player, rolls, turn = e.player, 0, e.turn
        rolls += 1
        if not 1 <= e.die <= 6:
            raise RuleViolationError(f"line {k + 1}: die {e.die}")
        for_agent = player == "agent"
        state = state._replace(die=e.die)
        if rolls == 3 and e.die == 6:
            if e.piece != 0:
                raise RuleViolationError(f"line {k + 1}: third six must forfeit")
        elif e.piece == 0:
            if legal_moves(state, for_agent, board):
                raise RuleViolationError(f"line {k + 1}: pass with a legal move available")
        else:
            state = apply_move(state, e.piece, for_agent, board)
        if (state.agent, state.opponent) != (e.agent, e.opponent):
            raise RuleViolationError(f"line {k + 1}: positions disagree with the rules")
        last_die = e.die
    return state


# -- environment adapter for UCT ------------------------------------------------


def _dice_for(noise) -> Dice:
    return Dice(noise.seed("ludo", ""))


class LudoEnv:
    """UCT view: states are agent decision points, actions piece numbers.

    All randomness of one step (agent dice, opponent dice and choices, and the
    rollout choice) comes from one seed per (simulation, depth), so two
    simulations sharing that seed see the same dice and opponent picks for
    each round.
    """

    def __init__(self, board: BoardMap = BOARD, cap: int = MOVE_CAP):
        self.board = board
        self.cap = cap

    def initial_state(self, noise=None):
        if noise is None:
            raise ConfigurationError("Ludo needs noise to roll the opening dice")
        state, _ = start_game(_dice_for(noise), self.board, self.cap)
        return state

    def legal_actions(self, state: LudoState):
        if is_terminal(state, self.board, self.cap):
            return ()
        return legal_moves(state, True, self.board)

    def step(self, state: LudoState, action: int, noise):
        return env_step(state, action, _dice_for(noise), self.board, self.cap)

    def rollout_action(self, state: LudoState, noise):
        legal = legal_moves(state, True, self.board)
        return legal[_dice_for(noise).rollout_choice(len(legal))]


# -- matches --------------------------------------------------------------------


@dataclass(frozen=True)
class GameResult:
    reward: float
    state: LudoState
    agent_decisions: int
    capped: bool


@dataclass(frozen=True)
class MatchResult:
    win_fraction: float
    std_error: float
    wins: int
    games: int
    capped: int
    rewards: tuple

    @property
    def win_percentage(self) -> float:
        return 100.0 * self.win_fraction


def play_game(choose: Callable[[LudoState, tuple, int], int], game_salt: str,
              board: BoardMap = BOARD, cap: int = MOVE_CAP,
              log: Optional[list] = None) -> GameResult:
    """Play one game; ``choose(state, legal, k)`` picks the agent's k-th move.

    All real dice come from the ``game_salt + SEP + "real"`` domain, step
    ``k`` using one seed, so planning never perturbs the executed dice.
    """
    from .planner import SimNoise

    real_salt = f"{game_salt}{SEP}real"
    turns = _Turns(log) if log is not None else None
    state, done = start_game(_dice_for(SimNoise(real_salt, 0, None, 0)), board, cap, turns=turns)
    reward, k = 0.0, 0
    while not done:
        k += 1
        legal = legal_moves(state, True, board)
        move = legal[0] if len(legal) == 1 else choose(state, legal, k)
        state, reward, done = env_step(state, move, _dice_for(SimNoise(real_salt, 0, None, k)),
                                       board, cap, turns)
    capped = state.moves >= cap and not (all_home(state.agent, board)
                                         or all_home(state.opponent, board))
    return GameResult(reward, state, k, capped)


def random_agent(game_salt: str):
    """A uniform-random agent drawing from its own stream."""
    stream = CounterStream(fnv1a64(f"{game_salt}{SEP}random-agent".encode()))
    return lambda state, legal, k: legal[stream.below(len(legal))]


def uct_agent(config, game_salt: str, board: BoardMap = BOARD, cap: int = MOVE_CAP):
    from .planner import uct_plan

    env = LudoEnv(board, cap)
    return lambda state, legal, k: uct_plan(env, state, config, f"{game_salt}{SEP}plan{k}")


def _summarize(rewards: list, capped: int) -> MatchResult:
    n = len(rewards)
    wins = int(sum(rewards))
    p = wins / n
    se = math.sqrt(p * (1 - p) / n) if n > 1 else float("nan")
    return MatchResult(p, se, wins, n, capped, tuple(rewards))


def ludo_uct_match(num_games: int, num_simulations: int, scheme: SeedScheme, config=None,
                   run_salt: str = "", board: BoardMap = BOARD, cap: int = MOVE_CAP,
                   first_game: int = 0) -> MatchResult:
    """UCT agent against the random opponent over ``num_games`` games.

    Game ``g`` uses salt ``run_salt + SEP + "game" + g`` for everything, so
    the same game index sees the same opening dice under every scheme.
    """
    from dataclasses import replace

    from .planner import PlanningConfig

    if num_games < 1:
        raise ConfigurationError("need at least one game")
    config = PlanningConfig() if config is None else config
    config = replace(config, num_simulations=num_simulations, scheme=scheme)
    rewards, capped = [], 0
    for g in range(first_game, first_game + num_games):
        salt = f"{run_salt}{SEP}game{g}"
        result = play_game(uct_agent(config, salt, board, cap), salt, board, cap)
        rewards.append(result.reward)
        capped += result.capped
    return _summarize(rewards, capped)


def random_match(num_games: int, run_salt: str = "", board: BoardMap = BOARD,
                 cap: int = MOVE_CAP) -> MatchResult:
    """Random agent against the random opponent (who moves first)."""
    rewards, capped = [], 0
    for g in range(num_games):
        salt = f"{run_salt}{SEP}game{g}"
        result = play_game(random_agent(salt), salt, board, cap)
        rewards.append(result.reward)
        capped += result.capped
    return _summarize(rewards, capped)
