"""Fixed-term variable annuity fund (FTVAF) and single-step lookahead.

Each year the fund pays out a fraction ``a`` of its corpus to living
members, loses the shares of members who died (paid to their
beneficiaries), and grows under geometric Brownian motion.  Deaths per age
group are Poisson with rate ``N_x * lambda_x``, capped at the group size.

Per-year randomness (one Gaussian and one uniform per age group) comes from
a counter stream keyed ``(salt, "ftvaf", year, simulation_index[, candidate])``,
so lookahead candidates can share or split scenarios per seeding scheme.
The pure-Python :func:`ftvaf_step` is the reference; the lookahead runs the
same arithmetic in a compiled kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Optional

import numpy as np
from numba import njit

from .errors import ConfigurationError
from .seeding import (
    FNV_PRIME,
    GAMMA,
    SEP,
    CounterStream,
    EpisodeRecord,
    EpisodeStep,
    SeedContext,
    SeedScheme,
    derive_seed,
    fnv1a64,
)


def load_mortality_table(path=None) -> tuple:
    """``((age, rate), ...)`` from a text file of ``age lambda`` rows."""
    if path is None:
        text = resources.files("crnplan.data").joinpath("mortality_us2003.txt").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        age, rate = line.split()
        rows.append((int(age), float(rate)))
    if not rows:
        raise ConfigurationError("empty mortality table")
    return tuple(sorted(rows))


@dataclass(frozen=True)
class FtvafParams:
    drift: float = 0.15
    volatility: float = 0.2
    horizon: int = 20
    solvency_threshold: float = 0.05
    penalty_scale: float = 5.0
    terminal_scale: float = 0.03
    rollout_fraction: float = 0.11
    grid_size: int = 101
    min_age: int = 60
    max_age: int = 70
    population_size: int = 1000
    mortality_table: tuple = field(default_factory=load_mortality_table)

    def __post_init__(self):
        if self.volatility < 0:
            raise ConfigurationError("volatility must be non-negative")
        if self.horizon < 1 or self.population_size < 1 or self.grid_size < 2:
            raise ConfigurationError("horizon, population and grid must be positive")
        if self.min_age > self.max_age:
            raise ConfigurationError("min_age exceeds max_age")
        if any(rate < 0 for _, rate in self.mortality_table):
            raise ConfigurationError("mortality rates must be non-negative")

    @property
    def num_ages(self) -> int:
        # room for the oldest member to age through every year of the term
        return self.max_age - self.min_age + self.horizon + 1

    @cached_property
    def rates(self) -> np.ndarray:
        """Rate for each slot of the age vector (slot j is age min_age + j)."""
        ages = np.array([a for a, _ in self.mortality_table])
        table = np.array([r for _, r in self.mortality_table], dtype=np.float64)
        slots = np.clip(self.min_age + np.arange(self.num_ages), ages[0], ages[-1])
        return table[np.searchsorted(ages, slots)]

    @property
    def actions(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size)


@dataclass(frozen=True, eq=False)
class FtvafState:
    wealth: float
    year: int
    alive_fraction: float
    age_distribution: np.ndarray

    def counts(self, params: FtvafParams) -> np.ndarray:
        return np.rint(self.age_distribution * params.population_size).astype(np.int64)


def init_population(params: FtvafParams, seed=None) -> FtvafState:
    """Members with integer ages uniform on ``[min_age, max_age]``; W1 = 1."""
    rng = np.random.default_rng(seed)
    ages = rng.integers(params.min_age, params.max_age + 1, size=params.population_size)
    counts = np.bincount(ages - params.min_age, minlength=params.num_ages)
    return _state(1.0, 1, counts, params)


def _state(wealth, year, counts, params) -> FtvafState:
    n = params.population_size
    dist = counts / n
    dist.setflags(write=False)
    return FtvafState(float(wealth), int(year), int(counts.sum()) / n, dist)


@dataclass(frozen=True)
class YearNoise:
    z: float
    mortality_u: np.ndarray


def _box_muller(u1: float, u2: float) -> float:
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def scenario_noise(salt: str, year: int, simulation_index: int,
                   policy_key: Optional[str], num_ages: int) -> YearNoise:
    ctx = SeedContext("ftvaf", "", year, simulation_index, policy_key, salt)
    stream = CounterStream(derive_seed(ctx))
    z = _box_muller(stream.uniform(), stream.uniform())
    return YearNoise(z, np.array([stream.uniform() for _ in range(num_ages)]))


def poisson_inverse(u: float, mean: float, cap: int) -> int:
    """Smallest ``k`` with ``u < F(k)`` for Poisson(mean), at most ``cap``."""
    p = math.exp(-mean)
    F = p
    k = 0
    while u >= F and k < cap:
        k += 1
        p *= mean / k
        F += p
    return k


@dataclass(frozen=True)
class StepOutcome:
    next_state: FtvafState
    reward: float
    terminated: bool
    payout: float
    beneficiary_outflow: float
    retained: float
    growth: float
    deaths: np.ndarray
    penalty: float


def ftvaf_transition(state: FtvafState, action: float, noise: YearNoise,
                     params: FtvafParams) -> StepOutcome:
    """One year, with the full breakdown of where the corpus went."""
    if not 0.0 <= action <= 1.0:
        raise ValueError(f"payout fraction {action} outside [0, 1]")
    if state.year > params.horizon:
        raise ValueError("fund term already over")
    counts = state.counts(params)
    G = params.num_ages
    if counts[-1] > 0:
        raise ConfigurationError("age vector too short for the remaining term")
    deaths = np.zeros(G, dtype=np.int64)
    for j in range(G - 1, -1, -1):
        if counts[j] > 0:
            deaths[j] = poisson_inverse(float(noise.mortality_u[j]),
                                        counts[j] * params.rates[j], int(counts[j]))
    survivors = counts - deaths
    next_counts = np.zeros(G, dtype=np.int64)
    next_counts[1:] = survivors[:-1]
    n = params.population_size
    l_prev = int(counts.sum()) / n
    l_next = int(next_counts.sum()) / n
    w = state.wealth
    payout = w * action
    after = w * (1.0 - action)
    ratio = l_next / l_prev if l_prev > 0 else 0.0
    retained = after * ratio
    drift = params.drift - 0.5 * params.volatility * params.volatility
    growth = math.exp(drift + params.volatility * noise.z)
    w_next = retained * growth
    penalty = 0.0
    terminated = False
    if state.year == params.horizon:
        terminated = True
        penalty = -params.terminal_scale * after
    elif next_counts.sum() == 0:
        terminated = True
    elif w_next < params.solvency_threshold * l_next:
        terminated = True
        penalty = l_next * (state.year - params.horizon) * params.penalty_scale
    return StepOutcome(
        next_state=_state(w_next, state.year + 1, next_counts, params),
        reward=payout + penalty,
        terminated=terminated,
        payout=payout,
        beneficiary_outflow=after - retained,
        retained=retained,
        growth=growth,
        deaths=deaths,
        penalty=penalty,
    )


def ftvaf_step(state, action, noise, params=None):
    """``(next_state, reward, terminated)`` for one year of the fund."""
    params = params or FtvafParams()
    out = ftvaf_transition(state, action, noise, params)
    return out.next_state, out.reward, out.terminated


# -- lookahead ------------------------------------------------------------------

_U = np.uint64
_MODES = {"independent": 0, "dependent": 1, "depth-dependent": 2}


@njit(cache=True)
def _fnv_digits(h, v):
    prime = _U(FNV_PRIME)
    p = 1
    while p * 10 <= v:
        p *= 10
    while p > 0:
        d = (v // p) % 10
        h = (h ^ _U(48 + d)) * prime
        p //= 10
    return h


@njit(cache=True)
def _draw(seed, k):
    z = seed + _U(k) * _U(GAMMA)
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    z = z ^ (z >> _U(31))
    return float(z >> _U(11)) * 2.0**-53


@njit(cache=True)
def _poisson_inverse(u, mean, cap):
    p = math.exp(-mean)
    F = p
    k = 0
    while u >= F and k < cap:
        k += 1
        p *= mean / k
        F += p
    return k


@njit(cache=True)
def _lookahead_kernel(wealth, year, counts, rates, actions, n, mode, depth, prefix,
                      mu, sigma, horizon, threshold, c1, c2, frac, pop):
    C = actions.shape[0]
    G = counts.shape[0]
    prime = _U(FNV_PRIME)
    drift = mu - 0.5 * sigma * sigma
    means = np.zeros(C)
    cnt = np.empty(G, np.int64)
    for c in range(C):
        total = 0.0
        for i in range(1, n + 1):
            w = wealth
            for j in range(G):
                cnt[j] = counts[j]
            alive = counts.sum()
            ret = 0.0
            for y in range(year, horizon + 1):
                h = _fnv_digits(prefix[y], i)
                if mode == 0 or (mode == 2 and y - year + 1 <= depth):
                    h = (h ^ _U(0x1F)) * prime
                    h = (h ^ _U(97)) * prime
                    h = _fnv_digits(h, c)
                a = actions[c] if y == year else frac
                z = math.sqrt(-2.0 * math.log(1.0 - _draw(h, 1))) * math.cos(
                    2.0 * math.pi * _draw(h, 2))
                new_alive = 0
                for j in range(G - 1, -1, -1):
                    nx = cnt[j]
                    surv = 0
                    if nx > 0:
                        surv = nx - _poisson_inverse(_draw(h, 3 + j), nx * rates[j], nx)
                    if j + 1 < G:
                        cnt[j + 1] = surv
                    cnt[j] = 0
                    new_alive += surv
                l_prev = alive / pop
                l_next = new_alive / pop
                payout = w * a
                after = w * (1.0 - a)
                ratio = l_next / l_prev if l_prev > 0 else 0.0
                w = after * ratio * math.exp(drift + sigma * z)
                alive = new_alive
                penalty = 0.0
                done = True
                if y == horizon:
                    penalty = -c2 * after
                elif new_alive == 0:
                    pass
                elif w < threshold * l_next:
                    penalty = l_next * (y - horizon) * c1
                else:
                    done = False
                ret += payout + penalty
                if done:
                    break
            total += ret
        means[c] = total / n
    return means


def _year_prefixes(salt: str, horizon: int) -> np.ndarray:
    base = fnv1a64(f"{salt}{SEP}ftvaf{SEP}{SEP}".encode())
    out = np.zeros(horizon + 2, dtype=np.uint64)
    for y in range(1, horizon + 1):
        out[y] = fnv1a64(f"{y}{SEP}".encode(), base)
    return out


def lookahead_values(state: FtvafState, num_simulations: int, scheme: SeedScheme,
                     run_salt: str = "", params: Optional[FtvafParams] = None) -> np.ndarray:
    """Average simulated return of every payout fraction on the grid.

    Candidate ``c`` takes fraction ``actions[c]`` this year and the constant
    rollout fraction afterwards.  Its ``i``-th scenario uses the policy key
    ``"a<c>"`` in the years the scheme keys (all years, none, or the first
    ``depth`` years).
    """
    params = params or FtvafParams()
    if num_simulations < 1:
        raise ConfigurationError("need at least one simulation")
    depth = scheme.depth if scheme.depth is not None else 0
    return _lookahead_kernel(
        state.wealth, state.year, state.counts(params), params.rates, params.actions,
        num_simulations, _MODES[scheme.variant], depth,
        _year_prefixes(run_salt, params.horizon), params.drift, params.volatility,
        params.horizon, params.solvency_threshold, params.penalty_scale,
        params.terminal_scale, params.rollout_fraction, float(params.population_size))


def reference_lookahead_values(state, num_simulations, scheme, run_salt="", params=None,
                               candidates=None) -> np.ndarray:
    """:func:`lookahead_values` through :func:`ftvaf_step`, for checking."""
    params = params or FtvafParams()
    grid = params.actions
    candidates = range(len(grid)) if candidates is None else candidates
    out = []
    for c in candidates:
        total = 0.0
        for i in range(1, num_simulations + 1):
            s, ret = state, 0.0
            while True:
                rel = s.year - state.year + 1
                key = f"a{c}" if scheme.includes_policy_key(rel) else None
                noise = scenario_noise(run_salt, s.year, i, key, params.num_ages)
                a = grid[c] if rel == 1 else params.rollout_fraction
                s, r, done = ftvaf_step(s, a, noise, params)
                ret += r
                if done:
                    break
            total += ret
        out.append(total / num_simulations)
    return np.array(out)


def lookahead_policy(state, num_simulations, scheme, run_salt="", params=None) -> float:
    """Payout fraction with the best average simulated return (lowest on ties)."""
    params = params or FtvafParams()
    values = lookahead_values(state, num_simulations, scheme, run_salt, params)
    return float(params.actions[int(np.argmax(values))])


def run_ftvaf_episode(num_simulations: int, scheme: SeedScheme, run_salt: str = "",
                      params: Optional[FtvafParams] = None,
                      population_seed=None) -> EpisodeRecord:
    """One fund term, replanning every year against real (unshared) noise."""
    params = params or FtvafParams()
    if population_seed is None:
        population_seed = derive_seed(SeedContext("ftvaf-population", "", 0, 0, None, run_salt))
    state = init_population(params, population_seed)
    real_salt = f"{run_salt}{SEP}real"
    steps = []
    while True:
        a = lookahead_policy(state, num_simulations, scheme,
                             f"{run_salt}{SEP}plan{state.year}", params)
        noise = scenario_noise(real_salt, state.year, 0, None, params.num_ages)
        next_state, r, done = ftvaf_step(state, a, noise, params)
        steps.append(EpisodeStep(state.year, a, r))
        state = next_state
        if done:
            break
    return EpisodeRecord.from_steps(steps)
