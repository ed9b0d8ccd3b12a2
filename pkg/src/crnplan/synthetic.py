"""Random synthetic MDPs and sets of policies that agree after a depth."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .mdp import Policy, TabularMdp
from .seeding import SEP, CounterStream, fnv1a64, stream_uniforms


@dataclass(frozen=True)
class SyntheticSpec:
    num_states: int = 7
    num_actions: int = 4
    horizon: int = 20
    generator_seed: int = 0

    def __post_init__(self):
        if min(self.num_states, self.num_actions, self.horizon) < 1:
            raise ValueError("states, actions and horizon must be positive")
        if self.generator_seed < 0:
            raise ValueError("generator seed must be non-negative")


def _tagged_seed(tag: str, generator_seed: int) -> int:
    return fnv1a64(f"{tag}{SEP}{generator_seed}".encode())


def generate_mdp(spec: SyntheticSpec) -> TabularMdp:
    """Uniform [0, 1] rewards and transition weights, rows normalised."""
    S, A, H = spec.num_states, spec.num_actions, spec.horizon
    seed = np.array(_tagged_seed("synthetic-mdp", spec.generator_seed), dtype=np.uint64)
    n_weights = S * A * (H - 1) * S
    u = stream_uniforms(seed, n_weights + S * A * H)
    weights = u[:n_weights].reshape(S, A, H - 1, S)
    rewards = u[n_weights:].reshape(S, A, H)
    p = np.zeros((S, A, H, S + 1))
    p[:, :, : H - 1, :S] = weights / weights.sum(axis=-1, keepdims=True)
    p[:, :, H - 1, S] = 1.0
    return TabularMdp(p, rewards, 0)


def generate_agreeing_policies(
    spec: SyntheticSpec, m: int, d: int, generator_seed: int = 0
) -> list[Policy]:
    """``m`` policies with a shared random suffix after step ``d`` and
    independent random prefixes on steps ``1..d``.

    Prefixes are pairwise distinct whenever that is possible.
    """
    S, A, H = spec.num_states, spec.num_actions, spec.horizon
    if m < 1 or not 0 <= d <= H:
        raise ValueError(f"need m >= 1 and 0 <= d <= H, got m={m}, d={d}")
    rng = CounterStream(_tagged_seed("synthetic-policies", generator_seed))
    suffix = np.array([[rng.below(A) for _ in range(H - d)] for _ in range(S)],
                      dtype=np.int64).reshape(S, H - d)
    distinct = S * d * np.log(A) >= np.log(m) if A > 1 else m == 1
    if not distinct:
        warnings.warn(f"only {A ** (S * d)} distinct prefixes for {m} policies; "
                      "duplicates allowed", stacklevel=2)
    seen = set()
    policies = []
    while len(policies) < m:
        prefix = np.array([[rng.below(A) for _ in range(d)] for _ in range(S)],
                          dtype=np.int64).reshape(S, d)
        key = prefix.tobytes()
        if distinct and key in seen:
            continue
        seen.add(key)
        policies.append(Policy(np.concatenate([prefix, suffix], axis=1)))
    return policies
