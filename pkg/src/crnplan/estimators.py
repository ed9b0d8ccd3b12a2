"""Value-difference estimators under independent, dependent and
depth-dependent sampling, plus exact moments by enumeration."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import AgreementWarning, ConfigurationError, InsufficientDataError
from .mdp import (
    Policy,
    TabularMdp,
    deterministic_utilities,
    policies_agree_after,
    sample_successors,
    splice_successors,
)
from .seeding import SeedScheme, evaluate_batch


@dataclass(frozen=True)
class EstimatorKind:
    variant: str
    depth: Optional[int] = None

    def __post_init__(self):
        if self.variant not in ("XI", "XD", "XDD"):
            raise ValueError(f"unknown estimator {self.variant!r}")
        if (self.variant == "XDD") != (self.depth is not None):
            raise ValueError("only XDD carries a depth")
        if self.depth is not None and self.depth < 0:
            raise ValueError("depth must be non-negative")

    @classmethod
    def XI(cls):
        return cls("XI")

    @classmethod
    def XD(cls):
        return cls("XD")

    @classmethod
    def XDD(cls, d: int):
        return cls("XDD", d)

    @property
    def scheme(self) -> SeedScheme:
        if self.variant == "XI":
            return SeedScheme.independent()
        if self.variant == "XD":
            return SeedScheme.dependent()
        return SeedScheme.depth_dependent(self.depth)

    def __str__(self):
        return self.variant if self.depth is None else f"XDD({self.depth})"


@dataclass(frozen=True)
class EstimateSample:
    value: float
    kind: EstimatorKind
    simulation_index: int = 0


@dataclass(frozen=True)
class EstimatorStats:
    n: int
    mean: float
    variance: float
    std_error: float


def _check(mdp, p1, p2, kind):
    p1.check(mdp)
    p2.check(mdp)
    if kind.variant == "XDD":
        if kind.depth > mdp.horizon:
            raise ConfigurationError(f"depth {kind.depth} exceeds horizon {mdp.horizon}")
        if not policies_agree_after(p1, p2, kind.depth):
            warnings.warn(
                f"policies do not agree after depth {kind.depth}; "
                "XDD loses its variance guarantee",
                AgreementWarning,
                stacklevel=3,
            )


def _backward_chunk(mdp, p1, p2, kind, size, rng):
    succ1 = sample_successors(mdp, rng, size)
    u1 = deterministic_utilities(mdp, p1, succ1)
    if kind.variant == "XD":
        return u1 - deterministic_utilities(mdp, p2, succ1)
    succ2 = sample_successors(mdp, rng, size)
    if kind.variant == "XDD":
        succ2 = splice_successors(succ2, succ1, kind.depth)
    return u1 - deterministic_utilities(mdp, p2, succ2)


def backward_draws(
    mdp: TabularMdp,
    p1: Policy,
    p2: Policy,
    kind: EstimatorKind,
    n: int,
    seed_source=None,
    chunk: int = 50_000,
) -> np.ndarray:
    """``n`` i.i.d. draws of the estimator via sampled deterministic MDPs."""
    _check(mdp, p1, p2, kind)
    rng = np.random.default_rng(seed_source)
    parts = []
    for start in range(0, n, chunk):
        parts.append(_backward_chunk(mdp, p1, p2, kind, min(chunk, n - start), rng))
    return np.concatenate(parts) if parts else np.empty(0)


def draw_backward(mdp, p1, p2, kind, seed_source=None, simulation_index=0) -> EstimateSample:
    value = backward_draws(mdp, p1, p2, kind, 1, seed_source)[0]
    return EstimateSample(float(value), kind, simulation_index)


def paired_backward_draws(
    mdp: TabularMdp,
    p1: Policy,
    p2: Policy,
    d: int,
    n: int,
    seed_source=None,
    chunk: int = 50_000,
) -> dict[str, np.ndarray]:
    """XI, XD and XDD(d) computed from the same ``(M1, M2)`` per draw.

    Sharing the sampled MDPs across estimators is a comparison device: each
    column is still an exact i.i.d. sample of its own estimator.  Also
    returns the components ``U1 = U(p1, M1)`` and ``U2 = U(p2, M1)``.
    """
    _check(mdp, p1, p2, EstimatorKind.XDD(d))
    rng = np.random.default_rng(seed_source)
    out = {k: [] for k in ("XI", "XD", "XDD", "U1", "U2")}
    for start in range(0, n, chunk):
        size = min(chunk, n - start)
        succ1 = sample_successors(mdp, rng, size)
        succ2 = sample_successors(mdp, rng, size)
        u1 = deterministic_utilities(mdp, p1, succ1)
        u2_m1 = deterministic_utilities(mdp, p2, succ1)
        u2_m2 = deterministic_utilities(mdp, p2, succ2)
        u2_m3 = deterministic_utilities(mdp, p2, splice_successors(succ2, succ1, d))
        out["XI"].append(u1 - u2_m2)
        out["XD"].append(u1 - u2_m1)
        out["XDD"].append(u1 - u2_m3)
        out["U1"].append(u1)
        out["U2"].append(u2_m1)
    return {k: np.concatenate(v) for k, v in out.items()}


def forward_draws(
    mdp: TabularMdp,
    p1: Policy,
    p2: Policy,
    kind: EstimatorKind,
    simulation_indices,
    run_salt: str = "",
) -> np.ndarray:
    """Estimator draws through the seeded forward process."""
    _check(mdp, p1, p2, kind)
    returns = evaluate_batch(mdp, [p1, p2], kind.scheme, simulation_indices, run_salt)
    return returns[0] - returns[1]


def draw_forward(mdp, p1, p2, kind, simulation_index, run_salt="") -> EstimateSample:
    value = forward_draws(mdp, p1, p2, kind, [simulation_index], run_salt)[0]
    return EstimateSample(float(value), kind, simulation_index)


# -- the negative example ------------------------------------------------------


def counterexample_mdp(r0: float, r1: float, r2: float, r3: float):
    """Two-step MDP on which full dependence can inflate variance.

    States 0, 1, 2 are s1, s2, s3.  From s1 either action moves to s2 or s3
    with probability 1/2 and reward 0; at t = 2, action 0 pays r0 in s2 and
    r2 in s3, action 1 pays r1 in s2 and r3 in s3.  Returns
    ``(mdp, pi1, pi2)`` with pi1 always 0 and pi2 taking 1 at t = 2.
    """
    p = np.zeros((3, 2, 2, 4))
    p[0, :, 0, 1] = p[0, :, 0, 2] = 0.5
    p[1, :, 0, 1] = 1.0  # s2, s3 are unreachable at t = 1
    p[2, :, 0, 2] = 1.0
    p[:, :, 1, 3] = 1.0
    r = np.zeros((3, 2, 2))
    r[1, 0, 1], r[1, 1, 1] = r0, r1
    r[2, 0, 1], r[2, 1, 1] = r2, r3
    pi1 = Policy(np.zeros((3, 2), dtype=int))
    pi2 = Policy(np.array([[0, 1], [0, 1], [0, 1]]))
    return TabularMdp(p, r, 0), pi1, pi2


def analytic_counterexample_covariance(r0, r1, r2, r3) -> float:
    """cov(U(pi1, M1), U(pi2, M1)) on :func:`counterexample_mdp`."""
    return (r0 - r2) * (r1 - r3) / 4


# -- statistics ----------------------------------------------------------------


def collect_stats(samples) -> EstimatorStats:
    values = np.array(
        [s.value if isinstance(s, EstimateSample) else s for s in samples], dtype=np.float64
    )
    n = values.size
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {n}")
    var = float(values.var(ddof=1))
    return EstimatorStats(n, float(values.mean()), var, float(np.sqrt(var / n)))


def variance_difference(a, b) -> tuple[float, float]:
    """``var(a) - var(b)`` for paired samples, with its standard error.

    Uses the per-draw difference of squared deviations, so correlation
    between the columns shrinks the error of the comparison.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.size
    if n < 2 or b.size != n:
        raise InsufficientDataError("need two equally long samples of size >= 2")
    g = (a - a.mean()) ** 2 - (b - b.mean()) ** 2
    diff = float(a.var(ddof=1) - b.var(ddof=1))
    return diff, float(g.std(ddof=1) / np.sqrt(n))


def covariance(x, y) -> tuple[float, float]:
    """Sample covariance and its standard error."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 2:
        raise InsufficientDataError("need at least 2 pairs")
    prod = (x - x.mean()) * (y - y.mean())
    return float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / np.sqrt(n))


# -- exact moments by enumeration ----------------------------------------------


@dataclass(frozen=True)
class ExactMoments:
    mean_difference: float
    var_xi: float
    var_xd: float
    var_xdd: float


def _support_table(mdp: TabularMdp, t_lo: int, t_hi: int):
    """All joint outcomes of next(s, a, t) for 0-based t in [t_lo, t_hi).

    Returns (tables, probs): tables has shape (K, S, A, t_hi - t_lo)."""
    S, A, _ = mdp.rewards.shape
    cells = [(s, a, t) for s in range(S) for a in range(A) for t in range(t_lo, t_hi)]
    supports = [np.flatnonzero(mdp.transitions[c]) for c in cells]
    sizes = [len(x) for x in supports]
    K = int(np.prod(sizes, dtype=np.int64)) if cells else 1
    width = t_hi - t_lo
    tables = np.zeros((K, S, A, width), dtype=np.int64)
    probs = np.ones(K)
    if not cells:
        return tables, probs
    grids = np.indices(sizes).reshape(len(cells), -1)
    for j, (s, a, t) in enumerate(cells):
        choice = supports[j][grids[j]]
        tables[:, s, a, t - t_lo] = choice
        probs *= mdp.transitions[s, a, t][choice]
    return tables, probs


def exact_moments(mdp: TabularMdp, p1: Policy, p2: Policy, d: int) -> ExactMoments:
    """Exact variances of XI, XD and XDD(d) by enumerating sampled MDPs.

    The sampled MDP is split into its prefix (steps ``1..d``) and suffix
    (steps ``d+1..H``), which are independent.  ``M1 = (A1, B1)`` and
    ``M3 = (A2, B1)``, so the cross moment of XDD needs only one sum over
    suffixes of products of prefix-averaged utilities.  Cost is
    ``|prefixes| * |suffixes|`` deterministic evaluations.
    """
    p1.check(mdp)
    p2.check(mdp)
    H = mdp.horizon
    if not 0 <= d <= H:
        raise ConfigurationError(f"depth {d} outside [0, {H}]")
    pre, wp = _support_table(mdp, 0, d)
    suf, ws = _support_table(mdp, d, H)
    KA, KB = len(wp), len(ws)
    full = np.concatenate(
        [np.repeat(pre, KB, axis=0), np.tile(suf, (KA, 1, 1, 1))], axis=-1
    )
    u1 = deterministic_utilities(mdp, p1, full).reshape(KA, KB)
    u2 = deterministic_utilities(mdp, p2, full).reshape(KA, KB)
    w = np.outer(wp, ws)
    m1, m2 = np.sum(w * u1), np.sum(w * u2)
    v1 = np.sum(w * u1**2) - m1**2
    v2 = np.sum(w * u2**2) - m2**2
    diff = u1 - u2
    vd = np.sum(w * diff**2) - (m1 - m2) ** 2
    a1 = wp @ u1  # prefix-averaged, per suffix
    a2 = wp @ u2
    cov_dd = np.sum(ws * a1 * a2) - m1 * m2
    return ExactMoments(float(m1 - m2), float(v1 + v2), float(vd), float(v1 + v2 - 2 * cov_dd))


def exact_moments_by_pairs(mdp: TabularMdp, p1: Policy, p2: Policy, d: int) -> ExactMoments:
    """Same quantities as :func:`exact_moments` by brute force over every
    pair ``(M1, M2)`` of sampled deterministic MDPs, built as full
    :class:`TabularMdp` objects.  Only for very small supports."""
    from .mdp import splice_mdps, utility

    tables, probs = _support_table(mdp, 0, mdp.horizon)
    mdps = [TabularMdp.from_successors(t, mdp.rewards, mdp.start_state) for t in tables]
    u1 = np.array([utility(m, p1) for m in mdps])
    u2 = np.array([utility(m, p2) for m in mdps])
    xi, xd, xdd, w = [], [], [], []
    for i, j in itertools.product(range(len(mdps)), repeat=2):
        m3 = splice_mdps(mdps[j], mdps[i], d)
        xi.append(u1[i] - u2[j])
        xdd.append(u1[i] - utility(m3, p2))
        w.append(probs[i] * probs[j])
    w = np.array(w)

    def var(x, weights):
        x = np.asarray(x)
        mean = np.sum(weights * x)
        return float(np.sum(weights * (x - mean) ** 2)), float(mean)

    vxi, mean = var(xi, w)
    vxdd, _ = var(xdd, w)
    vxd, _ = var(u1 - u2, probs)
    return ExactMoments(mean, vxi, vxd, vxdd)


def enumeration_size(mdp: TabularMdp) -> int:
    """Number of distinct sampled deterministic MDPs (with positive mass)."""
    return int(np.prod(np.count_nonzero(mdp.transitions, axis=-1), dtype=np.int64))
