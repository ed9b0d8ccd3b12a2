"""Finite-horizon tabular MDPs.

Time steps are 1-based in every public signature (``t`` runs over ``1..H``)
and 0-based along array axes, so ``transitions[s, a, t - 1]`` is the
successor distribution for taking ``a`` in ``s`` at time ``t``.  The
terminal sink is the extra state index ``num_states``.
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, InvalidDistributionError

ROW_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


def cumulative(p: np.ndarray) -> np.ndarray:
    """Cumulative sums along the last axis, pinned to exactly 1.0 from the
    last positive entry onwards so a uniform draw in [0, 1) always lands on
    a state with positive probability."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p.sum(axis=-1) <= 0):
        raise InvalidDistributionError("distribution has no positive mass")
    c = np.cumsum(p, axis=-1)
    positive = p > 0
    width = p.shape[-1]
    last = width - 1 - np.argmax(positive[..., ::-1], axis=-1)
    return np.where(np.arange(width) >= last[..., None], 1.0, c)


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """``(S, A, P, R, H, s1)`` with dense tables.

    ``transitions`` has shape ``(S, A, H, S + 1)``; the last column is the
    terminal sink, which must receive all mass at ``t = H`` and none before.
    ``rewards`` has shape ``(S, A, H)``.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    start_state: int = 0

    def __post_init__(self):
        p = np.array(self.transitions, dtype=np.float64)
        r = np.array(self.rewards, dtype=np.float64)
        if p.ndim != 4 or r.ndim != 3:
            raise ConfigurationError("transitions must be 4-d and rewards 3-d")
        S, A, H, width = p.shape
        if width != S + 1 or r.shape != (S, A, H):
            raise ConfigurationError(
                f"inconsistent shapes: transitions {p.shape}, rewards {r.shape}"
            )
        if min(S, A, H) < 1:
            raise ConfigurationError("need at least one state, action and step")
        if not 0 <= self.start_state < S:
            raise ConfigurationError(f"start state {self.start_state} out of range")
        if np.any(p < 0) or not np.all(np.isfinite(p)) or not np.all(np.isfinite(r)):
            raise InvalidDistributionError("probabilities must be finite and non-negative")
        sums = p.sum(axis=-1)
        err = np.abs(sums - 1.0)
        if np.any(err > RENORMALIZE_TOL):
            raise InvalidDistributionError(
                f"transition rows off by up to {err.max():.3g}; not a distribution"
            )
        if np.any(err > ROW_TOL):
            p = p / sums[..., None]
        if np.any(p[:, :, H - 1, :S] != 0):
            raise InvalidDistributionError("every transition at t = H must go to the sink")
        if H > 1 and np.any(p[:, :, : H - 1, S] != 0):
            raise InvalidDistributionError("the sink is only reachable from t = H")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transitions", p)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "start_state", int(self.start_state))

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    @property
    def horizon(self) -> int:
        return self.rewards.shape[2]

    @property
    def sink(self) -> int:
        return self.num_states

    @cached_property
    def cdf(self) -> np.ndarray:
        c = cumulative(self.transitions)
        c.setflags(write=False)
        return c

    @cached_property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.transitions == 0) | (self.transitions == 1)))

    def same_shape(self, other: "TabularMdp") -> bool:
        return (
            self.transitions.shape == other.transitions.shape
            and self.start_state == other.start_state
        )

    def __eq__(self, other):
        if not isinstance(other, TabularMdp):
            return NotImplemented
        return (
            self.same_shape(other)
            and np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.rewards, other.rewards)
        )

    __hash__ = None

    @classmethod
    def from_successors(cls, successors, rewards, start_state=0) -> "TabularMdp":
        """Deterministic MDP from an integer table ``next[s, a, t - 1]``."""
        succ = np.asarray(successors, dtype=np.int64)
        S, A, H = succ.shape
        p = np.zeros((S, A, H, S + 1))
        np.put_along_axis(p, succ[..., None], 1.0, axis=-1)
        return cls(p, rewards, start_state)

    def successors(self) -> np.ndarray:
        """Inverse of :meth:`from_successors` for deterministic MDPs."""
        if not self.is_deterministic:
            raise ConfigurationError("MDP is not deterministic")
        return np.argmax(self.transitions, axis=-1)


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic time-dependent policy; ``actions[s, t - 1]``."""

    actions: np.ndarray

    def __post_init__(self):
        a = np.array(self.actions, dtype=np.int64)
        if a.ndim != 2:
            raise ConfigurationError("policy table must be indexed (state, time)")
        if np.any(a < 0):
            raise ConfigurationError("negative action index")
        a.setflags(write=False)
        object.__setattr__(self, "actions", a)

    @classmethod
    def constant(cls, num_states: int, horizon: int, action: int) -> "Policy":
        return cls(np.full((num_states, horizon), action))

    def __call__(self, s: int, t: int) -> int:
        return int(self.actions[s, t - 1])

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return np.array_equal(self.actions, other.actions)

    __hash__ = None

    @cached_property
    def key(self) -> str:
        # digest of the canonical table string; short enough to hash per step
        text = f"{self.actions.shape[0]}x{self.actions.shape[1]}:" + ",".join(
            map(str, self.actions.ravel().tolist())
        )
        return "pi" + hashlib.blake2b(text.encode(), digest_size=8).hexdigest()

    def check(self, mdp: TabularMdp) -> None:
        if self.actions.shape != (mdp.num_states, mdp.horizon):
            raise ConfigurationError(
                f"policy shape {self.actions.shape} does not match MDP "
                f"({mdp.num_states}, {mdp.horizon})"
            )
        if self.actions.max() >= mdp.num_actions:
            raise ConfigurationError("policy uses an action index outside the MDP")


@dataclass(frozen=True)
class ValueTable:
    """``values[s, t - 1]`` for ``t`` in ``1..H + 1``; row ``S`` is the sink.

    The last column (``t = H + 1``) is identically zero.
    """

    values: np.ndarray

    def __call__(self, s: int, t: int) -> float:
        return float(self.values[s, t - 1])


def exact_value(mdp: TabularMdp, policy: Policy) -> ValueTable:
    """Backward induction of the finite-horizon Bellman recursion."""
    policy.check(mdp)
    S, H = mdp.num_states, mdp.horizon
    states = np.arange(S)
    v = np.zeros((S + 1, H + 1))
    for t in range(H - 1, -1, -1):
        a = policy.actions[:, t]
        v[:S, t] = mdp.rewards[states, a, t] + mdp.transitions[states, a, t] @ v[:, t + 1]
    v.setflags(write=False)
    return ValueTable(v)


def utility(mdp: TabularMdp, policy: Policy) -> float:
    return exact_value(mdp, policy)(mdp.start_state, 1)


def bellman_residual(mdp: TabularMdp, policy: Policy, table: ValueTable) -> float:
    """Largest violation of the Bellman recursion by ``table``."""
    S, H = mdp.num_states, mdp.horizon
    v = table.values
    worst = float(np.max(np.abs(v[:, H])))
    worst = max(worst, float(np.max(np.abs(v[S]))))
    for s in range(S):
        for t in range(H):
            a = policy.actions[s, t]
            rhs = mdp.rewards[s, a, t] + sum(
                mdp.transitions[s, a, t, s2] * v[s2, t + 1] for s2 in range(S + 1)
            )
            worst = max(worst, abs(v[s, t] - rhs))
    return worst


def sample_successors(mdp: TabularMdp, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent backward-process draws as successor tables.

    Returns an int array of shape ``(size, S, A, H)``; entry ``[b, s, a, t-1]``
    is ``next(s, a, t)`` in the ``b``-th sampled deterministic MDP.  Every
    ``(s, a, t)`` is sampled, reachable or not.
    """
    u = rng.random((size,) + mdp.rewards.shape)
    return np.sum(u[..., None] >= mdp.cdf, axis=-1)


def sample_deterministic(mdp: TabularMdp, seed_source=None) -> TabularMdp:
    rng = np.random.default_rng(seed_source)
    succ = sample_successors(mdp, rng, 1)[0]
    return TabularMdp.from_successors(succ, mdp.rewards, mdp.start_state)


def deterministic_utilities(
    mdp: TabularMdp, policy: Policy, successors: np.ndarray
) -> np.ndarray:
    """``U(policy, M')`` for a batch of successor tables ``(B, S, A, H)``."""
    policy.check(mdp)
    S, H = mdp.num_states, mdp.horizon
    states = np.arange(S)
    v = np.zeros((successors.shape[0], S + 1))
    for t in range(H - 1, -1, -1):
        a = policy.actions[:, t]
        nxt = successors[:, states, a, t]
        nv = np.zeros_like(v)
        nv[:, :S] = mdp.rewards[states, a, t] + np.take_along_axis(v, nxt, axis=1)
        v = nv
    return v[:, mdp.start_state]


def splice_mdps(m2: TabularMdp, m1: TabularMdp, d: int) -> TabularMdp:
    """``m2`` for steps ``1..d`` followed by ``m1`` for steps ``d+1..H``."""
    if not m1.same_shape(m2):
        raise ConfigurationError("spliced MDPs must share S, A, H and s1")
    if not np.array_equal(m1.rewards, m2.rewards):
        raise ConfigurationError("spliced MDPs must share the reward table")
    if not 0 <= d <= m1.horizon:
        raise ConfigurationError(f"splice depth {d} outside [0, {m1.horizon}]")
    p = np.concatenate([m2.transitions[:, :, :d], m1.transitions[:, :, d:]], axis=2)
    return TabularMdp(p, m1.rewards, m1.start_state)


def splice_successors(succ2: np.ndarray, succ1: np.ndarray, d: int) -> np.ndarray:
    """Batch form of :func:`splice_mdps` on successor tables."""
    return np.concatenate([succ2[..., :d], succ1[..., d:]], axis=-1)


def policies_agree_after(p1: Policy, p2: Policy, d: int) -> bool:
    if p1.actions.shape != p2.actions.shape:
        raise ConfigurationError("policies have different shapes")
    return bool(np.array_equal(p1.actions[:, d:], p2.actions[:, d:]))


# -- plain-text serialization -------------------------------------------------
#
#   S A H s1
#   s a t p(0) ... p(S-1) p(sink)      one line per (s, a, t), t 1-based
#   s a t r                            one line per (s, a, t)
#
# Blank lines and lines starting with '#' are ignored.


def dumps_mdp(mdp: TabularMdp) -> str:
    S, A, H = mdp.rewards.shape
    out = io.StringIO()
    out.write("# tabular MDP: header, transition rows, reward rows\n")
    out.write(f"{S} {A} {H} {mdp.start_state}\n")
    for s in range(S):
        for a in range(A):
            for t in range(H):
                row = " ".join(repr(float(x)) for x in mdp.transitions[s, a, t])
                out.write(f"{s} {a} {t + 1} {row}\n")
    for s in range(S):
        for a in range(A):
            for t in range(H):
                out.write(f"{s} {a} {t + 1} {float(mdp.rewards[s, a, t])!r}\n")
    return out.getvalue()


def _data_lines(text: str):
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            yield line.split()


def loads_mdp(text: str) -> TabularMdp:
    lines = list(_data_lines(text))
    if not lines or len(lines[0]) != 4:
        raise ConfigurationError("missing 'S A H s1' header")
    S, A, H, s1 = map(int, lines[0])
    n = S * A * H
    if len(lines) != 1 + 2 * n:
        raise ConfigurationError(f"expected {2 * n} data lines, found {len(lines) - 1}")
    p = np.zeros((S, A, H, S + 1))
    r = np.zeros((S, A, H))
    for fields in lines[1 : 1 + n]:
        s, a, t = map(int, fields[:3])
        if len(fields) != 3 + S + 1:
            raise ConfigurationError(f"bad transition row for {(s, a, t)}")
        p[s, a, t - 1] = [float(x) for x in fields[3:]]
    for fields in lines[1 + n :]:
        s, a, t = map(int, fields[:3])
        r[s, a, t - 1] = float(fields[3])
    return TabularMdp(p, r, s1)


def dumps_policy(policy: Policy) -> str:
    S, H = policy.actions.shape
    rows = [" ".join(map(str, row)) for row in policy.actions.tolist()]
    return f"# policy: header 'S H', then one row of H actions per state\n{S} {H}\n" + (
        "\n".join(rows) + "\n"
    )


def loads_policy(text: str) -> Policy:
    lines = list(_data_lines(text))
    S, H = map(int, lines[0])
    table = np.array([[int(x) for x in row] for row in lines[1:]], dtype=np.int64)
    if table.shape != (S, H):
        raise ConfigurationError(f"policy table has shape {table.shape}, header says {(S, H)}")
    return Policy(table)


def save_mdp(mdp: TabularMdp, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_mdp(mdp))


def load_mdp(path: str | os.PathLike) -> TabularMdp:
    with open(path) as fh:
        return loads_mdp(fh.read())
