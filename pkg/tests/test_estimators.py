import numpy as np
import pytest

from crnplan.errors import AgreementWarning, ConfigurationError, InsufficientDataError
from crnplan.estimators import (
    EstimatorKind,
    analytic_counterexample_covariance,
    backward_draws,
    collect_stats,
    counterexample_mdp,
    covariance,
    exact_moments,
    exact_moments_by_pairs,
    forward_draws,
    paired_backward_draws,
    variance_difference,
)
from crnplan.mdp import Policy, utility

from conftest import random_mdp, random_policy


def agreeing_pair(rng, S, A, H, d):
    a = rng.integers(0, A, size=(S, H))
    b = a.copy()
    b[:, :d] = rng.integers(0, A, size=(S, d))
    return Policy(a), Policy(b)


def test_kind_validation():
    with pytest.raises(ValueError):
        EstimatorKind("XQ")
    with pytest.raises(ValueError):
        EstimatorKind("XI", 2)
    with pytest.raises(ValueError):
        EstimatorKind("XDD")
    assert str(EstimatorKind.XDD(3)) == "XDD(3)"


def test_counterexample_closed_forms():
    mdp, p1, p2 = counterexample_mdp(2, 4, 3, 2)
    assert utility(mdp, p1) == pytest.approx(2.5)
    assert utility(mdp, p2) == pytest.approx(3.0)
    assert analytic_counterexample_covariance(2, 4, 3, 2) == -0.5
    m = exact_moments(mdp, p1, p2, 2)
    # U1 - U2 under shared M is (r0-r1) or (r2-r3) each w.p. 1/2: -2 or 1
    assert m.var_xd == pytest.approx(2.25)
    # independent: var U1 + var U2 = 0.25 + 1
    assert m.var_xi == pytest.approx(1.25)
    assert m.var_xdd == pytest.approx(m.var_xi)
    assert m.mean_difference == pytest.approx(-0.5)


def test_backward_draw_means_match_dp(rng):
    mdp = random_mdp(rng, S=3, A=2, H=4)
    p1, p2 = agreeing_pair(rng, 3, 2, 4, 2)
    target = utility(mdp, p1) - utility(mdp, p2)
    for kind in (EstimatorKind.XI(), EstimatorKind.XD(), EstimatorKind.XDD(2)):
        x = backward_draws(mdp, p1, p2, kind, 40_000, seed_source=7)
        assert abs(x.mean() - target) < 5 * x.std() / np.sqrt(x.size)


def test_backward_chunks_do_not_change_distribution(rng):
    mdp = random_mdp(rng, S=2, A=2, H=3)
    p1, p2 = random_policy(rng, 2, 2, 3), random_policy(rng, 2, 2, 3)
    a = backward_draws(mdp, p1, p2, EstimatorKind.XI(), 1000, seed_source=1, chunk=1000)
    b = backward_draws(mdp, p1, p2, EstimatorKind.XI(), 1000, seed_source=1, chunk=1000)
    assert np.array_equal(a, b)


def test_forward_and_backward_agree_in_variance(rng):
    mdp = random_mdp(rng, S=3, A=2, H=3)
    p1, p2 = agreeing_pair(rng, 3, 2, 3, 1)
    exact = exact_moments(mdp, p1, p2, 1)
    idx = np.arange(1, 30_001)
    for kind, var in ((EstimatorKind.XI(), exact.var_xi), (EstimatorKind.XD(), exact.var_xd),
                      (EstimatorKind.XDD(1), exact.var_xdd)):
        x = forward_draws(mdp, p1, p2, kind, idx, "fwd")
        assert x.mean() == pytest.approx(exact.mean_difference, abs=5 * x.std() / np.sqrt(x.size) + 1e-12)
        assert x.var() == pytest.approx(var, rel=0.06, abs=1e-9)


def test_exact_moments_match_brute_force(rng):
    for _ in range(5):
        mdp = random_mdp(rng, S=2, A=2, H=3, sparse=True)
        p1, p2 = agreeing_pair(rng, 2, 2, 3, 1)
        a = exact_moments(mdp, p1, p2, 1)
        b = exact_moments_by_pairs(mdp, p1, p2, 1)
        assert np.allclose([a.mean_difference, a.var_xi, a.var_xd, a.var_xdd],
                           [b.mean_difference, b.var_xi, b.var_xd, b.var_xdd])


def test_exact_depth_dependent_never_worse(rng):
    for _ in range(20):
        mdp = random_mdp(rng, S=3, A=2, H=3)
        d = int(rng.integers(0, 4))
        p1, p2 = agreeing_pair(rng, 3, 2, 3, d)
        m = exact_moments(mdp, p1, p2, d)
        assert m.var_xdd <= m.var_xi + 1e-12


def test_depth_zero_and_full_depth_limits(rng):
    mdp = random_mdp(rng, S=2, A=2, H=3)
    p1, p2 = random_policy(rng, 2, 2, 3), random_policy(rng, 2, 2, 3)
    m_full = exact_moments(mdp, p1, p2, 3)
    assert m_full.var_xdd == pytest.approx(m_full.var_xi)
    q1, q2 = agreeing_pair(rng, 2, 2, 3, 0)
    m0 = exact_moments(mdp, q1, q2, 0)
    assert m0.var_xdd == pytest.approx(m0.var_xd)


def test_paired_draws_columns(rng):
    mdp, p1, p2 = counterexample_mdp(2, 4, 3, 2)
    cols = paired_backward_draws(mdp, p1, p2, 2, 20_000, seed_source=3)
    assert np.allclose(cols["XD"], cols["U1"] - cols["U2"])
    cov, se = covariance(cols["U1"], cols["U2"])
    assert abs(cov + 0.5) < 5 * se


def test_agreement_warning(rng):
    mdp = random_mdp(rng, S=2, A=2, H=3)
    p1 = Policy(np.zeros((2, 3), dtype=int))
    p2 = Policy(np.ones((2, 3), dtype=int))
    with pytest.warns(AgreementWarning):
        backward_draws(mdp, p1, p2, EstimatorKind.XDD(1), 10, seed_source=0)
    with pytest.raises(ConfigurationError):
        backward_draws(mdp, p1, p2, EstimatorKind.XDD(4), 10, seed_source=0)


def test_stats_helpers():
    with pytest.raises(InsufficientDataError):
        collect_stats([1.0])
    s = collect_stats([1.0, 2.0, 3.0, 4.0])
    assert s.mean == 2.5 and s.variance == pytest.approx(5 / 3)
    diff, se = variance_difference([0, 2, 0, 2], [1, 1, 1, 1])
    assert diff == pytest.approx(4 / 3) and se >= 0
    with pytest.raises(InsufficientDataError):
        variance_difference([1, 2], [1, 2, 3])
