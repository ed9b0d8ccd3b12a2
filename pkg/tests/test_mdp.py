import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnplan.errors import ConfigurationError, InvalidDistributionError
from crnplan.mdp import (
    Policy,
    TabularMdp,
    bellman_residual,
    cumulative,
    deterministic_utilities,
    dumps_mdp,
    dumps_policy,
    exact_value,
    loads_mdp,
    loads_policy,
    policies_agree_after,
    sample_successors,
    splice_mdps,
    utility,
)

from conftest import random_mdp, random_policy


def two_state_chain():
    # s0 --a0--> s1 (reward 1), s1 self-loop, reward 2 at t=2
    p = np.zeros((2, 1, 2, 3))
    p[0, 0, 0, 1] = 1.0
    p[1, 0, 0, 1] = 1.0
    p[:, :, 1, 2] = 1.0
    r = np.array([[[1.0, 5.0]], [[0.0, 2.0]]])
    return TabularMdp(p, r, 0)


def test_chain_value_by_hand():
    mdp = two_state_chain()
    pi = Policy.constant(2, 2, 0)
    v = exact_value(mdp, pi)
    assert v(0, 1) == 3.0
    assert v(1, 2) == 2.0
    assert v(0, 3) == 0.0 and v(2, 1) == 0.0
    assert utility(mdp, pi) == 3.0


def value_by_path_enumeration(mdp, pi):
    # independent oracle: sum over all state paths of probability * return
    S, H = mdp.num_states, mdp.horizon
    total = 0.0
    for path in itertools.product(range(S), repeat=H - 1):
        states = (mdp.start_state,) + path
        prob, ret = 1.0, 0.0
        for t, s in enumerate(states):
            a = pi(s, t + 1)
            ret += mdp.rewards[s, a, t]
            if t + 1 < H:
                prob *= mdp.transitions[s, a, t, states[t + 1]]
        total += prob * ret
    return total


def test_exact_value_matches_path_enumeration(rng):
    for _ in range(5):
        mdp = random_mdp(rng, S=3, A=2, H=4)
        pi = random_policy(rng, 3, 2, 4)
        assert utility(mdp, pi) == pytest.approx(value_by_path_enumeration(mdp, pi), abs=1e-12)
        assert bellman_residual(mdp, pi, exact_value(mdp, pi)) < 1e-12


def test_rows_slightly_off_are_renormalised():
    mdp = two_state_chain()
    p = np.array(mdp.transitions)
    p[0, 0, 0, 1] = 1.0 + 5e-10
    fixed = TabularMdp(p, mdp.rewards)
    assert fixed.transitions[0, 0, 0].sum() == pytest.approx(1.0, abs=1e-15)


def test_bad_rows_rejected():
    mdp = two_state_chain()
    p = np.array(mdp.transitions)
    p[0, 0, 0, 1] = 0.9
    with pytest.raises(InvalidDistributionError):
        TabularMdp(p, mdp.rewards)
    p = np.array(mdp.transitions)
    p[0, 0, 0, 1] = -0.5
    p[0, 0, 0, 0] = 1.5
    with pytest.raises(InvalidDistributionError):
        TabularMdp(p, mdp.rewards)


def test_sink_rules_enforced():
    mdp = two_state_chain()
    p = np.array(mdp.transitions)
    p[0, 0, 0] = [0, 0, 1.0]  # sink before H
    with pytest.raises((InvalidDistributionError, ConfigurationError)):
        TabularMdp(p, mdp.rewards)
    p = np.array(mdp.transitions)
    p[0, 0, 1] = [0, 1.0, 0]  # no sink at H
    with pytest.raises((InvalidDistributionError, ConfigurationError)):
        TabularMdp(p, mdp.rewards)


def test_policy_shape_checked():
    mdp = two_state_chain()
    with pytest.raises(ConfigurationError):
        utility(mdp, Policy.constant(2, 3, 0))
    with pytest.raises(ConfigurationError):
        utility(mdp, Policy.constant(2, 2, 1))


def test_cumulative_pins_last_positive_entry():
    c = cumulative(np.array([0.1, 0.2, 0.7, 0.0]))
    assert c[2] == 1.0 and c[3] == 1.0
    c = cumulative(np.array([1 / 3, 1 / 3, 1 / 3]))
    assert c[-1] == 1.0


def test_policy_key_is_stable_and_distinct():
    a = Policy(np.array([[0, 1], [1, 0]]))
    b = Policy(np.array([[0, 1], [1, 0]]))
    c = Policy(np.array([[0, 1], [1, 1]]))
    assert a.key == b.key and a.key != c.key
    assert a == b and a != c


def test_agreement_after_depth():
    a = Policy(np.array([[0, 1, 1], [1, 0, 0]]))
    b = Policy(np.array([[1, 1, 1], [0, 0, 0]]))
    assert policies_agree_after(a, b, 1)
    assert not policies_agree_after(a, b, 0)
    assert policies_agree_after(a, b, 3)


def test_splice_takes_prefix_from_first_argument(rng):
    mdp = random_mdp(rng, S=2, A=2, H=3)
    succ = sample_successors(mdp, rng, 2)
    m1 = TabularMdp.from_successors(succ[0], mdp.rewards)
    m2 = TabularMdp.from_successors(succ[1], mdp.rewards)
    m3 = splice_mdps(m2, m1, 1)
    assert np.array_equal(m3.transitions[:, :, :1], m2.transitions[:, :, :1])
    assert np.array_equal(m3.transitions[:, :, 1:], m1.transitions[:, :, 1:])
    assert splice_mdps(m2, m1, 0) == m1
    assert splice_mdps(m2, m1, 3) == m2


def test_deterministic_utilities_match_exact_value(rng):
    mdp = random_mdp(rng, S=3, A=2, H=4)
    pi = random_policy(rng, 3, 2, 4)
    succ = sample_successors(mdp, rng, 20)
    batch = deterministic_utilities(mdp, pi, succ)
    for b in range(20):
        m = TabularMdp.from_successors(succ[b], mdp.rewards)
        assert batch[b] == pytest.approx(utility(m, pi), abs=1e-12)


def test_sampled_successors_follow_the_distribution(rng):
    mdp = random_mdp(rng, S=3, A=1, H=2)
    succ = sample_successors(mdp, rng, 40_000)
    freq = np.bincount(succ[:, 0, 0, 0], minlength=4) / 40_000
    p = mdp.transitions[0, 0, 0]
    se = np.sqrt(p * (1 - p) / 40_000)
    assert np.all(np.abs(freq - p) <= 5 * se + 1e-12)


def test_text_round_trip(rng):
    mdp = random_mdp(rng, S=3, A=2, H=3, sparse=True)
    assert loads_mdp(dumps_mdp(mdp)) == mdp
    pi = random_policy(rng, 3, 2, 3)
    assert loads_policy(dumps_policy(pi)) == pi


def test_truncated_text_rejected(rng):
    text = dumps_mdp(random_mdp(rng))
    with pytest.raises(ConfigurationError):
        loads_mdp("\n".join(text.splitlines()[:-1]))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_adding_constant_reward_shifts_value_by_horizon_times_constant(seed, c):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, S=2, A=2, H=3)
    pi = random_policy(rng, 2, 2, 3)
    shifted = TabularMdp(mdp.transitions, mdp.rewards + c, mdp.start_state)
    assert utility(shifted, pi) == pytest.approx(utility(mdp, pi) + 3 * c, abs=1e-9)
