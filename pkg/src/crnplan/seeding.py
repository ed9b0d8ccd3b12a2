"""Seed derivation and the seeded forward process.

Every random decision in a simulation is driven by a seed derived from a
key string, never by shared generator state.  Keys are the UTF-8 encoding of

    run_salt US state US action US t US simulation_index [US policy_key]

where US is the ASCII unit separator (0x1F).  The key is hashed with 64-bit
FNV-1a and the hash is fed to splitmix64; a transition consumes exactly one
64-bit output, mapped to a uniform in [0, 1) from its top 53 bits.

Reference values (checked in the test suite)::

    fnv1a64(b"")                 == 0xCBF29CE484222325
    fnv1a64(b"a")                == 0xAF63DC4C8601EC8C
    fnv1a64(b"foobar")           == 0x85944171F73967E8
    splitmix64(0)                == 0xE220A8397B1DCDAF
    splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .mdp import Policy, TabularMdp, cumulative

MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
SEP = "\x1f"
_SEP_BYTE = 0x1F
_TO_UNIT = 2.0**-53


# -- scalar primitives ---------------------------------------------------------


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    """64-bit FNV-1a of ``data``, optionally continuing from hash state ``h``."""
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64(seed: int) -> int:
    """First output of a splitmix64 generator whose state is ``seed``."""
    return mix64((seed + GAMMA) & MASK64)


def to_unit(x: int) -> float:
    return (x >> 11) * _TO_UNIT


def uniform(seed: int) -> float:
    return to_unit(splitmix64(seed))


class CounterStream:
    """Successive splitmix64 outputs from one seed (``k``-th draw is pure in
    ``(seed, k)``), for environments that need several numbers per step."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def uniform(self) -> float:
        return to_unit(self.next_u64())

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)``."""
        return min(int(self.uniform() * n), n - 1)


# -- schemes and contexts ------------------------------------------------------


@dataclass(frozen=True)
class SeedScheme:
    """Which transitions get the policy (or root action) folded into their seed."""

    variant: str
    depth: Optional[int] = None

    def __post_init__(self):
        if self.variant not in ("independent", "dependent", "depth-dependent"):
            raise ValueError(f"unknown seeding scheme {self.variant!r}")
        if self.variant == "depth-dependent":
            if self.depth is None or self.depth < 0:
                raise ValueError("depth-dependent seeding needs a depth d >= 0")
        elif self.depth is not None:
            raise ValueError(f"{self.variant} seeding takes no depth")

    @classmethod
    def independent(cls) -> "SeedScheme":
        return cls("independent")

    @classmethod
    def dependent(cls) -> "SeedScheme":
        return cls("dependent")

    @classmethod
    def depth_dependent(cls, d: int) -> "SeedScheme":
        return cls("depth-dependent", d)

    @classmethod
    def parse(cls, text: str, depth: Optional[int] = None) -> "SeedScheme":
        text = text.strip().lower().replace("_", "-")
        if text in ("independent", "i", "xi"):
            return cls.independent()
        if text in ("dependent", "d", "xd"):
            return cls.dependent()
        if text in ("depth-dependent", "dd", "xdd"):
            return cls.depth_dependent(depth if depth is not None else 0)
        raise ValueError(f"unknown seeding scheme {text!r}")

    @property
    def name(self) -> str:
        return self.variant

    def includes_policy_key(self, t: int) -> bool:
        """Whether the transition at (relative) step ``t`` is policy-keyed."""
        if self.variant == "independent":
            return True
        if self.variant == "dependent":
            return False
        return t <= self.depth

    def check_horizon(self, horizon: int) -> None:
        if self.variant == "depth-dependent" and self.depth > horizon:
            raise ValueError(f"depth {self.depth} exceeds horizon {horizon}")

    def __str__(self):
        return self.name if self.depth is None else f"{self.name}({self.depth})"


@dataclass(frozen=True)
class SeedContext:
    state_key: str
    action_key: str
    time: int
    simulation_index: int
    policy_key: Optional[str] = None
    salt: str = ""

    def key(self) -> str:
        fields = [self.salt, self.state_key, self.action_key, str(self.time),
                  str(self.simulation_index)]
        if self.policy_key is not None:
            fields.append(self.policy_key)
        return SEP.join(fields)


def derive_seed(ctx: SeedContext) -> int:
    return fnv1a64(ctx.key().encode("utf-8"))


def next_state(distribution, seed: int) -> int:
    """Inverse-CDF sample from ``distribution`` using one splitmix64 draw."""
    cdf = cumulative(np.asarray(distribution, dtype=np.float64))
    return _sample_cdf(cdf.tolist(), seed)


def _sample_cdf(cdf: Sequence[float], seed: int) -> int:
    return bisect.bisect_right(cdf, uniform(seed))


# -- forward process -----------------------------------------------------------


@dataclass(frozen=True)
class EpisodeStep:
    state: object
    action: object
    reward: float
    seed: Optional[int] = None


@dataclass(frozen=True)
class EpisodeRecord:
    steps: tuple
    total_return: float

    @classmethod
    def from_steps(cls, steps) -> "EpisodeRecord":
        steps = tuple(steps)
        return cls(steps, float(sum(step.reward for step in steps)))

    def __len__(self):
        return len(self.steps)


def evaluate(
    mdp: TabularMdp,
    policy: Policy,
    scheme: SeedScheme,
    simulation_index: int,
    run_salt: str = "",
    policy_key: Optional[str] = None,
) -> EpisodeRecord:
    """One seeded forward-process episode of ``policy`` from ``s1``.

    ``policy_key`` overrides the policy's own key string (planners pass the
    root action instead).
    """
    policy.check(mdp)
    scheme.check_horizon(mdp.horizon)
    pkey = policy.key if policy_key is None else policy_key
    cdf = mdp.cdf
    s = mdp.start_state
    steps = []
    for t in range(1, mdp.horizon + 1):
        a = policy(s, t)
        r = float(mdp.rewards[s, a, t - 1])
        ctx = SeedContext(str(s), str(a), t, simulation_index,
                          pkey if scheme.includes_policy_key(t) else None, run_salt)
        seed = derive_seed(ctx)
        steps.append(EpisodeStep(s, a, r, seed))
        s = _sample_cdf(cdf[s, a, t - 1].tolist(), seed)
    return EpisodeRecord.from_steps(steps)


# -- vectorised forward process ------------------------------------------------
#
# Same keys, same hash, same draws as ``evaluate``; FNV-1a is continued from a
# cached hash of the "salt US s US a US t US" prefix so only the simulation
# index and policy key are hashed per sample.

_U64 = np.uint64


def _extend_byte(h: np.ndarray, byte) -> np.ndarray:
    return (h ^ _U64(byte)) * _U64(FNV_PRIME)


def _extend_digits(h: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Continue FNV-1a over the decimal digits of non-negative ``values``."""
    values = np.asarray(values, dtype=np.int64)
    if np.any(values < 0):
        raise ValueError("only non-negative integers are supported")
    width = len(str(int(values.max()))) if values.size else 1
    for pos in range(width - 1, -1, -1):
        scale = 10**pos
        digit = (values // scale) % 10 + 48
        active = (values >= scale) | (pos == 0)
        h = np.where(active, (h ^ digit.astype(_U64)) * _U64(FNV_PRIME), h)
    return h


def _extend_keys(h: np.ndarray, keys: Sequence[str]) -> np.ndarray:
    """Continue each row of ``h`` (first axis indexes ``keys``) with its key."""
    encoded = [k.encode("utf-8") for k in keys]
    width = max(len(k) for k in encoded)
    table = np.zeros((len(encoded), width), dtype=np.uint64)
    length = np.array([len(k) for k in encoded])
    for i, k in enumerate(encoded):
        table[i, : len(k)] = np.frombuffer(k, dtype=np.uint8)
    shape = (len(encoded),) + (1,) * (h.ndim - 1)
    for j in range(width):
        byte = table[:, j].reshape(shape)
        active = (length > j).reshape(shape)
        h = np.where(active, (h ^ byte) * _U64(FNV_PRIME), h)
    return h


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U64(30))) * _U64(_MIX1)
    z = (z ^ (z >> _U64(27))) * _U64(_MIX2)
    return z ^ (z >> _U64(31))


def uniform_array(seeds: np.ndarray) -> np.ndarray:
    z = mix64_array(seeds + _U64(GAMMA))
    return (z >> _U64(11)).astype(np.float64) * _TO_UNIT


def stream_uniforms(seeds: np.ndarray, count: int) -> np.ndarray:
    """First ``count`` :class:`CounterStream` draws for every seed; new last axis."""
    k = np.arange(1, count + 1, dtype=np.uint64)
    z = mix64_array(seeds[..., None] + k * _U64(GAMMA))
    return (z >> _U64(11)).astype(np.float64) * _TO_UNIT


def fnv1a64_array(prefix: str, values: np.ndarray) -> np.ndarray:
    """Hashes of ``prefix + str(v)`` for an integer array ``values``."""
    h0 = fnv1a64(prefix.encode("utf-8"))
    h = np.full(np.shape(values), h0, dtype=np.uint64)
    return _extend_digits(h, values)


@lru_cache(maxsize=64)
def _prefix_table(salt: str, S: int, A: int, H: int) -> np.ndarray:
    table = np.empty((S, A, H), dtype=np.uint64)
    base = fnv1a64(salt.encode("utf-8"))
    for s in range(S):
        hs = fnv1a64(f"{SEP}{s}{SEP}".encode(), base)
        for a in range(A):
            ha = fnv1a64(f"{a}{SEP}".encode(), hs)
            for t in range(1, H + 1):
                table[s, a, t - 1] = fnv1a64(f"{t}{SEP}".encode(), ha)
    table.setflags(write=False)
    return table


def evaluate_batch(
    mdp: TabularMdp,
    policies: Sequence[Policy],
    scheme: SeedScheme,
    simulation_indices,
    run_salt: str = "",
    policy_keys: Optional[Sequence[str]] = None,
) -> np.ndarray:
    """Returns of ``evaluate`` for every (policy, simulation index) pair.

    Result has shape ``(len(policies), len(simulation_indices))`` and equals,
    bit for bit, ``evaluate(mdp, p, scheme, i, run_salt).total_return``.
    """
    for p in policies:
        p.check(mdp)
    scheme.check_horizon(mdp.horizon)
    keys = [p.key for p in policies] if policy_keys is None else list(policy_keys)
    idx = np.asarray(simulation_indices, dtype=np.int64)
    m, n = len(policies), idx.size
    S, A, H = mdp.rewards.shape
    prefix = _prefix_table(run_salt, S, A, H)
    acts = np.stack([p.actions for p in policies])  # (m, S, H)
    rows = np.arange(m)[:, None]
    cdf = mdp.cdf
    s = np.full((m, n), mdp.start_state, dtype=np.int64)
    ret = np.zeros((m, n))
    for t in range(H):
        a = acts[rows, s, t]
        ret += mdp.rewards[s, a, t]
        h = _extend_digits(prefix[s, a, t], np.broadcast_to(idx, (m, n)))
        if scheme.includes_policy_key(t + 1):
            h = _extend_keys(_extend_byte(h, _SEP_BYTE), keys)
        u = uniform_array(h)
        s = np.sum(u[..., None] >= cdf[s, a, t], axis=-1)
    return ret
