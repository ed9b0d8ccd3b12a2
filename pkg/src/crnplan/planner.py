"""Decision-time planning with seeded simulations.

Two planners share the seeding rules of :mod:`crnplan.seeding`:

* :func:`select_best_policy` runs each candidate policy ``n`` times and
  keeps the best average.
* :func:`uct_plan` is depth-limited UCT with decision and chance nodes and a
  rollout policy past the depth limit.  Only the root action enters the
  seed as the "policy" key.

Environments used by UCT are plain objects with ``initial_state()``,
``legal_actions(state)``, ``step(state, action, noise)`` returning
``(next_state, reward, done)``, and ``rollout_action(state, noise)``.
States must be immutable and hashable; they double as chance-node keys.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .errors import AgreementWarning, ConfigurationError, TerminalStateError
from .mdp import Policy, TabularMdp, policies_agree_after, utility
from .seeding import (
    FNV_PRIME,
    MASK64,
    SEP,
    CounterStream,
    EpisodeRecord,
    EpisodeStep,
    SeedScheme,
    evaluate_batch,
    fnv1a64,
    uniform,
)

# -- fixed policy sets ---------------------------------------------------------


@dataclass(frozen=True)
class PolicySelectionReport:
    chosen_index: int
    estimated_utilities: np.ndarray
    true_utility_of_chosen: Optional[float] = None


def select_best_policy(
    mdp: TabularMdp,
    policies: Sequence[Policy],
    d: int,
    n: int,
    scheme: SeedScheme,
    run_salt: str = "",
    true_utilities: Optional[Sequence[float]] = None,
) -> PolicySelectionReport:
    """Pick the policy with the best average of ``n`` seeded returns.

    ``d`` is the depth after which the candidates are meant to agree; a
    violation only triggers a warning.  Ties go to the lowest index.
    """
    if not policies:
        raise ConfigurationError("empty policy set")
    if n < 1:
        raise ConfigurationError("need at least one simulation per policy")
    depth = scheme.depth if scheme.variant == "depth-dependent" else d
    if any(not policies_agree_after(policies[0], p, depth) for p in policies[1:]):
        warnings.warn(f"candidate policies do not all agree after depth {depth}",
                      AgreementWarning, stacklevel=2)
    returns = evaluate_batch(mdp, policies, scheme, np.arange(1, n + 1), run_salt)
    estimates = returns.mean(axis=1)
    chosen = int(np.argmax(estimates))
    if true_utilities is None:
        true_value = utility(mdp, policies[chosen])
    else:
        true_value = float(true_utilities[chosen])
    return PolicySelectionReport(chosen, estimates, true_value)


# -- seeded noise handed to environments ----------------------------------------


@lru_cache(maxsize=1 << 16)
def _prefix_hash(salt: str, state_key: str, action_key: str, time: int) -> int:
    return fnv1a64(f"{salt}{SEP}{state_key}{SEP}{action_key}{SEP}{time}{SEP}".encode())


class SimNoise:
    """Seeds for one simulation at one depth.

    ``seed(state_key, action_key, time)`` hashes exactly the key that a
    :class:`~crnplan.seeding.SeedContext` with the same fields would; the
    policy key is present only when the scheme asks for it at this depth.
    """

    __slots__ = ("salt", "simulation_index", "policy_key", "depth", "_tail")

    def __init__(self, salt: str, simulation_index: int, policy_key: Optional[str], depth: int):
        self.salt = salt
        self.simulation_index = simulation_index
        self.policy_key = policy_key
        self.depth = depth
        tail = str(simulation_index)
        if policy_key is not None:
            tail += SEP + policy_key
        self._tail = tail.encode()

    def seed(self, state_key: str, action_key: str, time: Optional[int] = None) -> int:
        h = _prefix_hash(self.salt, state_key, action_key,
                         self.depth if time is None else time)
        for byte in self._tail:
            h = ((h ^ byte) * FNV_PRIME) & MASK64
        return h

    def uniform(self, state_key: str, action_key: str, time: Optional[int] = None) -> float:
        return uniform(self.seed(state_key, action_key, time))

    def stream(self, state_key: str, action_key: str = "", time: Optional[int] = None) -> CounterStream:
        return CounterStream(self.seed(state_key, action_key, time))


# -- tabular MDP as a simulation environment -----------------------------------


class TabularEnv:
    """A :class:`TabularMdp` seen through its sampling interface.

    States are ``(s, t)`` with ``t`` in ``1..H + 1``; ``t = H + 1`` is terminal.
    """

    def __init__(self, mdp: TabularMdp):
        self.mdp = mdp
        self._cdf = mdp.cdf.tolist()
        self._rewards = mdp.rewards.tolist()
        self._actions = tuple(range(mdp.num_actions))

    def initial_state(self):
        return (self.mdp.start_state, 1)

    def is_terminal(self, state) -> bool:
        return state[1] > self.mdp.horizon

    def legal_actions(self, state):
        return () if self.is_terminal(state) else self._actions

    def step(self, state, action, noise: SimNoise):
        s, t = state
        seed = noise.seed(str(s), str(action), t)
        s2 = bisect.bisect_right(self._cdf[s][action][t - 1], uniform(seed))
        return (s2, t + 1), self._rewards[s][action][t - 1], t == self.mdp.horizon

    def rollout_action(self, state, noise: SimNoise):
        s, t = state
        u = noise.uniform(str(s), "rollout", t)
        return min(int(u * len(self._actions)), len(self._actions) - 1)


# -- UCT ------------------------------------------------------------------------


@dataclass
class PlanningConfig:
    depth_limit: int = 2
    num_simulations: int = 32
    exploration_constant: float = math.sqrt(2)
    scheme: SeedScheme = field(default_factory=SeedScheme.dependent)
    rollout_policy: str = "uniform"

    def __post_init__(self):
        if self.depth_limit < 1:
            raise ConfigurationError("depth_limit must be at least 1")
        if self.num_simulations < 1:
            raise ConfigurationError("num_simulations must be at least 1")
        if self.exploration_constant < 0:
            raise ConfigurationError("exploration constant must be non-negative")
        if self.rollout_policy != "uniform":
            raise ConfigurationError(f"unknown rollout policy {self.rollout_policy!r}")


@dataclass
class UctNode:
    node_kind: str
    depth: int
    visit_count: int = 0
    total_value: float = 0.0
    children: dict = field(default_factory=dict)
    actions: tuple = ()

    @property
    def mean_value(self) -> float:
        return self.total_value / self.visit_count if self.visit_count else float("nan")


def _ucb_select(node: UctNode, c: float):
    for a in node.actions:
        if a not in node.children or node.children[a].visit_count == 0:
            return a
    log_n = math.log(node.visit_count)
    best, best_score = None, -math.inf
    for a in node.actions:
        child = node.children[a]
        score = child.total_value / child.visit_count + c * math.sqrt(log_n / child.visit_count)
        if score > best_score:
            best, best_score = a, score
    return best


def _simulate(env, root: UctNode, root_state, config: PlanningConfig, salt: str):
    """One descent, rollout and backup.

    The simulation index in the seed is ``j`` for the ``j``-th simulation
    through the chosen root action, so under shared seeding the ``j``-th
    simulations of different root actions face the same noise.
    """
    scheme = config.scheme
    node, state, depth = root, root_state, 0
    root_key = None
    index = 0
    path = []
    done = False
    while depth < config.depth_limit and not done:
        if not node.actions:
            node.actions = tuple(env.legal_actions(state))
            if not node.actions:
                break
        a = _ucb_select(node, config.exploration_constant)
        if depth == 0:
            root_key = str(a)
            first = node.children.get(a)
            index = 1 + (first.visit_count if first is not None else 0)
        depth += 1
        noise = SimNoise(salt, index, root_key if scheme.includes_policy_key(depth) else None, depth)
        state, r, done = env.step(state, a, noise)
        chance = node.children.get(a)
        if chance is None:
            chance = node.children[a] = UctNode("chance", depth - 1)
        path.append((node, chance, r))
        child = chance.children.get(state)
        if child is None:
            child = chance.children[state] = UctNode("decision", depth)
        node = child
    tail = 0.0
    while not done:
        depth += 1
        noise = SimNoise(salt, index, root_key if scheme.includes_policy_key(depth) else None, depth)
        a = env.rollout_action(state, noise)
        state, r, done = env.step(state, a, noise)
        tail += r
    node.visit_count += 1
    node.total_value += tail
    value = tail
    for dnode, chance, r in reversed(path):
        value += r
        chance.visit_count += 1
        chance.total_value += value
        dnode.visit_count += 1
        dnode.total_value += value


def uct_search(env, root_state, config: PlanningConfig, run_salt: str = "") -> UctNode:
    """Build the search tree for ``root_state`` and return its root."""
    root = UctNode("decision", 0, actions=tuple(env.legal_actions(root_state)))
    if not root.actions:
        raise TerminalStateError("no legal action at the root")
    for _ in range(config.num_simulations):
        _simulate(env, root, root_state, config, run_salt)
    return root


def best_root_action(root: UctNode):
    best, best_value = None, -math.inf
    for a in root.actions:
        child = root.children.get(a)
        if child is None or child.visit_count == 0:
            continue
        if child.mean_value > best_value:
            best, best_value = a, child.mean_value
    return best


def uct_plan(env, root_state, config: PlanningConfig, run_salt: str = ""):
    """Root action with the highest mean simulated return."""
    actions = tuple(env.legal_actions(root_state))
    if not actions:
        raise TerminalStateError("no legal action at the root")
    if len(actions) == 1:
        return actions[0]
    return best_root_action(uct_search(env, root_state, config, run_salt))


def run_episode_with_planner(env, config: PlanningConfig, run_salt: str = "") -> EpisodeRecord:
    """Replan with UCT at every step and execute in the real environment.

    Real transitions draw from their own salt domain, disjoint from every
    planning simulation, so seeding schemes never touch the executed
    trajectory.
    """
    state = env.initial_state()
    real_salt = f"{run_salt}{SEP}real"
    steps = []
    k = 0
    while env.legal_actions(state):
        k += 1
        a = uct_plan(env, state, config, f"{run_salt}{SEP}plan{k}")
        next_state, r, done = env.step(state, a, SimNoise(real_salt, 0, None, k))
        steps.append(EpisodeStep(state, a, r))
        state = next_state
        if done:
            break
    return EpisodeRecord.from_steps(steps)
