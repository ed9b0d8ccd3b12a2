"""Self-checks runnable from a fresh checkout (``crnplan verify-fixtures``).

Three groups:

* seed vectors: reference outputs of the hash and mixer;
* tiny-MDP oracle: exact variances of the three estimators by enumeration
  on small fixture MDPs, checking the depth-dependent estimator never has
  larger variance than the independent one and is strictly better somewhere;
* Ludo rules: hand-worked positions on the board map, plus a logged random
  game replayed against the rules.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mdp import Policy, TabularMdp

# -- tiny MDPs ------------------------------------------------------------------


@dataclass(frozen=True)
class TinyCase:
    name: str
    mdp: TabularMdp
    p1: Policy
    p2: Policy
    d: int


def _random_tiny_mdp(stream, S: int, A: int, H: int, sparse: bool) -> TabularMdp:
    p = np.zeros((S, A, H, S + 1))
    for s, a, t in itertools.product(range(S), range(A), range(H - 1)):
        w = np.array([stream.uniform() for _ in range(S)])
        if sparse:
            keep = np.array([stream.below(2) for _ in range(S)], dtype=bool)
            keep[stream.below(S)] = True
            w = np.where(keep, w + 0.05, 0.0)
        p[s, a, t, :S] = w / w.sum()
    p[:, :, H - 1, S] = 1.0
    rewards = np.array([stream.uniform() for _ in range(S * A * H)]).reshape(S, A, H)
    return TabularMdp(p, rewards, 0)


def _agreeing_pair(stream, S: int, A: int, H: int, d: int):
    suffix = np.array([[stream.below(A) for _ in range(H - d)] for _ in range(S)],
                      dtype=np.int64).reshape(S, H - d)
    prefixes = [np.array([[stream.below(A) for _ in range(d)] for _ in range(S)],
                         dtype=np.int64).reshape(S, d) for _ in range(2)]
    return tuple(Policy(np.concatenate([pre, suffix], axis=1)) for pre in prefixes)


def tiny_cases(pairs_per_depth: int = 2) -> list:
    """Fixture MDPs with at most 3 states and horizon at most 3, each with
    policy pairs agreeing after every depth ``0..H``; plus the two-step
    counterexample."""
    from .estimators import counterexample_mdp
    from .seeding import CounterStream, fnv1a64

    cases = []
    mdp, p1, p2 = counterexample_mdp(2, 4, 3, 2)
    cases.append(TinyCase("counterexample", mdp, p1, p2, 2))
    cases.append(TinyCase("counterexample-d1", mdp, p1, p2, 1))
    stream = CounterStream(fnv1a64(b"tiny-fixtures"))
    for S, A, H in itertools.product((1, 2, 3), (2, 3), (1, 2, 3)):
        if A == 3 and S == 3 and H == 3:
            continue  # 9^18 joint outcomes; too many to enumerate
        for sparse in (False, True):
            mdp = _random_tiny_mdp(stream, S, A, H, sparse)
            for d in range(H + 1):
                for k in range(pairs_per_depth):
                    p1, p2 = _agreeing_pair(stream, S, A, H, d)
                    tag = "sparse" if sparse else "dense"
                    cases.append(TinyCase(f"S{S}A{A}H{H}-{tag}-d{d}-{k}", mdp, p1, p2, d))
    return cases


@dataclass(frozen=True)
class TinyOutcome:
    case: TinyCase
    var_xi: float
    var_xdd: float
    brute_force_checked: bool


def check_tiny_cases(cases=None, brute_force_limit: int = 64, tol: float = 1e-10) -> list:
    """Exact moments for each case; cross-checks the factored enumeration
    against the brute-force pair enumeration where that is small."""
    from .estimators import enumeration_size, exact_moments, exact_moments_by_pairs

    out = []
    for case in tiny_cases() if cases is None else cases:
        m = exact_moments(case.mdp, case.p1, case.p2, case.d)
        checked = enumeration_size(case.mdp) <= brute_force_limit
        if checked:
            b = exact_moments_by_pairs(case.mdp, case.p1, case.p2, case.d)
            for x, y in zip((m.mean_difference, m.var_xi, m.var_xd, m.var_xdd),
                            (b.mean_difference, b.var_xi, b.var_xd, b.var_xdd)):
                if abs(x - y) > tol * max(1.0, abs(y)):
                    raise AssertionError(f"{case.name}: enumerations disagree ({x} vs {y})")
        out.append(TinyOutcome(case, m.var_xi, m.var_xdd, checked))
    return out


# -- report ---------------------------------------------------------------------


@dataclass
class FixtureResult:
    name: str
    ok: bool
    detail: str = ""
    seconds: float = 0.0


@dataclass
class FixtureReport:
    results: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def lines(self) -> list:
        out = [f"{'PASS' if r.ok else 'FAIL'}  {r.name}  ({r.seconds:.2f}s)"
               + (f"  {r.detail}" if r.detail else "") for r in self.results]
        n_bad = sum(not r.ok for r in self.results)
        out.append(f"{len(self.results) - n_bad} passed, {n_bad} failed")
        return out


def _run(report: FixtureReport, name: str, check: Callable[[], str]):
    start = time.perf_counter()
    try:
        detail = check() or ""
        ok = True
    except Exception as exc:  # report every failure, keep going
        detail, ok = f"{type(exc).__name__}: {exc}", False
    report.results.append(FixtureResult(name, ok, detail, time.perf_counter() - start))


# -- individual fixtures ----------------------------------------------------------


def _seed_vectors() -> str:
    from .seeding import GAMMA, fnv1a64, splitmix64

    vectors = [
        (fnv1a64(b""), 0xCBF29CE484222325),
        (fnv1a64(b"a"), 0xAF63DC4C8601EC8C),
        (fnv1a64(b"foobar"), 0x85944171F73967E8),
        (splitmix64(0), 0xE220A8397B1DCDAF),
        (splitmix64(GAMMA), 0x6E789E6AA1B965F4),
    ]
    for got, want in vectors:
        if got != want:
            raise AssertionError(f"got {got:#018x}, want {want:#018x}")
    return f"{len(vectors)} vectors"


def _tiny_oracle() -> str:
    outcomes = check_tiny_cases()
    strict = 0
    for o in outcomes:
        if o.var_xdd > o.var_xi + 1e-12 * max(1.0, o.var_xi):
            raise AssertionError(f"{o.case.name}: var XDD {o.var_xdd} > var XI {o.var_xi}")
        strict += o.var_xdd < o.var_xi - 1e-9
    if not strict:
        raise AssertionError("no fixture shows a strict variance reduction")
    brute = sum(o.brute_force_checked for o in outcomes)
    return f"{len(outcomes)} cases, {strict} strict, {brute} brute-forced"


def ludo_rule_checks(board) -> str:
    """Hand-worked positions.  Expected outcomes assume the standard board
    (entries at squares 0 and 26, safe squares 0 8 13 21 26 34 39 47)."""
    from .errors import RuleViolationError
    from .ludo import LudoState, apply_move, env_step, legal_moves

    def expect(cond, what):
        if not cond:
            raise AssertionError(what)

    start = LudoState(3, (0, 0, 0, 0), (0, 0, 0, 0))
    expect(legal_moves(start, True, board) == (), "no move from start without a 6")
    expect(legal_moves(start._replace(die=6), True, board) == (1, 2, 3, 4),
           "a 6 frees any piece")
    s = apply_move(start._replace(die=6), 2, True, board)
    expect(s.agent == (0, 1, 0, 0), "leaving start lands on the entry square")

    # agent piece at relative 10 (square 9) moves 3 to square 12, where the
    # opponent's piece at its relative 39 sits: capture
    s = LudoState(3, (10, 0, 54, 57), (39, 0, 0, 0))
    expect(legal_moves(s, True, board) == (1, 3), "mid-game legal set")
    after = apply_move(s, 1, True, board)
    expect(after.agent == (13, 0, 54, 57) and after.opponent == (0, 0, 0, 0),
           "landing on a plain square captures")
    after = apply_move(s, 3, True, board)
    expect(after.agent == (10, 0, 57, 57), "exact count reaches home")

    # square 8 is safe: agent from relative 6 to 9 meets opponent relative 35
    s = LudoState(3, (6, 0, 0, 0), (35, 0, 0, 0))
    after = apply_move(s, 1, True, board)
    expect(after.opponent == (35, 0, 0, 0), "no capture on a safe square")

    # opponent captures the agent: opponent relative 20 is square 45, +5 is
    # square 50 = agent relative 51
    s = LudoState(5, (51, 51, 0, 0), (20, 0, 0, 0))
    after = apply_move(s, 1, False, board)
    expect(after.agent == (0, 0, 0, 0) and after.opponent == (25, 0, 0, 0),
           "capture sends every piece on the square back")

    s = LudoState(4, (55, 0, 0, 0), (0, 0, 0, 0))
    expect(legal_moves(s, True, board) == (), "overshooting home is illegal")
    try:
        apply_move(s, 1, True, board)
    except RuleViolationError:
        pass
    else:
        raise AssertionError("illegal move accepted")

    class Scripted:
        def __init__(self, agent, opponent):
            self.agent, self.opponent = list(agent), list(opponent)

        def roll(self, for_agent):
            return (self.agent if for_agent else self.opponent).pop(0)

        def opponent_choice(self, n):
            return 0

    # a 6 gives the agent another roll before the opponent moves
    s = LudoState(6, (1, 0, 0, 0), (0, 0, 0, 0))
    nxt, r, done = env_step(s, 1, Scripted([2], []), board)
    expect(nxt.agent == (7, 0, 0, 0) and nxt.die == 2 and nxt.sixes == 1 and not done,
           "six grants an extra roll")
    # after a non-6 the opponent rolls; two sixes move it twice, the third
    # forfeits, and the agent rolls next
    s = LudoState(2, (1, 0, 0, 0), (0, 0, 0, 0))
    nxt, r, done = env_step(s, 1, Scripted([4], [6, 6, 6, 1]), board)
    expect(nxt.opponent == (7, 0, 0, 0) and nxt.die == 4, "third six forfeits the turn")
    # last piece home wins
    s = LudoState(2, (55, 57, 57, 57), (0, 0, 0, 0))
    nxt, r, done = env_step(s, 1, Scripted([], []), board)
    expect(done and r == 1.0, "agent win pays 1")
    return "rules ok"


def _ludo_rules(board_map: Optional[str]) -> str:
    from .ludo import load_board_map

    return ludo_rule_checks(load_board_map(board_map))


def _ludo_replay(board_map: Optional[str]) -> str:
    from .ludo import LogEntry, load_board_map, play_game, random_agent, replay_log

    board = load_board_map(board_map)
    log: list = []
    result = play_game(random_agent("fixture"), "fixture", board, log=log)
    final = replay_log([LogEntry.parse(e.format()) for e in log], board)
    if (final.agent, final.opponent) != (result.state.agent, result.state.opponent):
        raise AssertionError("replayed game ends elsewhere")
    return f"{len(log)} log lines"


def verify_fixtures(board_map: Optional[str] = None) -> FixtureReport:
    report = FixtureReport()
    _run(report, "seed-vectors", _seed_vectors)
    _run(report, "tiny-mdp-oracle", _tiny_oracle)
    _run(report, "ludo-rules", lambda: _ludo_rules(board_map))
    _run(report, "ludo-replay", lambda: _ludo_replay(board_map))
    return report
