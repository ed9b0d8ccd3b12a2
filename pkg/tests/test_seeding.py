import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnplan.mdp import Policy
from crnplan.seeding import (
    GAMMA,
    SEP,
    CounterStream,
    SeedContext,
    SeedScheme,
    derive_seed,
    evaluate,
    evaluate_batch,
    fnv1a64,
    fnv1a64_array,
    next_state,
    splitmix64,
    stream_uniforms,
    uniform,
)

from conftest import random_mdp, random_policy


def splitmix64_reference(seed):
    # straight transcription of the published generator, state += gamma first
    mask = (1 << 64) - 1
    z = (seed + 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)


def test_fnv_reference_vectors():
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_splitmix_reference_vectors():
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(GAMMA) == 0x6E789E6AA1B965F4
    for seed in (1, 12345, 2**63, 2**64 - 1):
        assert splitmix64(seed) == splitmix64_reference(seed)


def test_key_layout():
    ctx = SeedContext("3", "1", 2, 7, "piabc", "salt")
    assert ctx.key() == SEP.join(["salt", "3", "1", "2", "7", "piabc"])
    assert SeedContext("3", "1", 2, 7, None, "salt").key() == SEP.join(["salt", "3", "1", "2", "7"])


def test_uniform_in_unit_interval():
    u = [uniform(s) for s in range(1000)]
    assert min(u) >= 0.0 and max(u) < 1.0


def test_counter_stream_draw_k_depends_only_on_seed_and_k():
    a = CounterStream(99)
    draws = [a.next_u64() for _ in range(5)]
    assert draws[0] == splitmix64(99)
    k = 3
    b = CounterStream((99 + k * GAMMA) & ((1 << 64) - 1))
    assert b.next_u64() == draws[k]
    assert np.allclose(stream_uniforms(np.array([99], dtype=np.uint64), 5)[0],
                       [((x >> 11) * 2.0**-53) for x in draws])


def test_next_state_is_inverse_cdf():
    dist = np.array([0.25, 0.0, 0.75])
    for seed in range(200):
        u = uniform(seed)
        assert next_state(dist, seed) == (0 if u < 0.25 else 2)


def test_fnv_array_matches_scalar():
    vals = np.array([0, 7, 10, 99, 12345])
    got = fnv1a64_array("pre", vals)
    assert [int(x) for x in got] == [fnv1a64(f"pre{v}".encode()) for v in vals]


def test_scheme_policy_key_inclusion():
    assert all(SeedScheme.independent().includes_policy_key(t) for t in range(1, 30))
    assert not any(SeedScheme.dependent().includes_policy_key(t) for t in range(1, 30))
    dd = SeedScheme.depth_dependent(3)
    assert [dd.includes_policy_key(t) for t in range(1, 6)] == [True, True, True, False, False]
    with pytest.raises(ValueError):
        SeedScheme("sometimes")
    with pytest.raises(ValueError):
        SeedScheme.depth_dependent(-1)
    with pytest.raises(ValueError):
        SeedScheme.depth_dependent(5).check_horizon(4)


def test_dependent_identical_policies_identical_returns(rng):
    mdp = random_mdp(rng, S=3, A=2, H=5)
    pi = random_policy(rng, 3, 2, 5)
    twin = Policy(np.array(pi.actions))
    for i in range(20):
        assert (evaluate(mdp, pi, SeedScheme.dependent(), i).total_return
                == evaluate(mdp, twin, SeedScheme.dependent(), i).total_return)


def test_independent_scheme_separates_policies(rng):
    mdp = random_mdp(rng, S=3, A=2, H=5)
    p1, p2 = random_policy(rng, 3, 2, 5), random_policy(rng, 3, 2, 5)
    e1 = evaluate(mdp, p1, SeedScheme.independent(), 1)
    e2 = evaluate(mdp, p2, SeedScheme.independent(), 1)
    assert e1.steps[0].seed != e2.steps[0].seed


def test_depth_dependent_shares_seeds_after_depth(rng):
    mdp = random_mdp(rng, S=3, A=2, H=6)
    base = rng.integers(0, 2, size=(3, 6))
    a, b = base.copy(), base.copy()
    a[:, :2], b[:, :2] = 0, 1
    p1, p2 = Policy(a), Policy(b)
    scheme = SeedScheme.depth_dependent(2)
    for i in range(30):
        e1 = evaluate(mdp, p1, scheme, i)
        e2 = evaluate(mdp, p2, scheme, i)
        for t in range(2, 6):
            s1, s2 = e1.steps[t], e2.steps[t]
            if (s1.state, s1.action) == (s2.state, s2.action):
                assert s1.seed == s2.seed


def test_batch_matches_scalar_bit_for_bit(rng):
    mdp = random_mdp(rng, S=4, A=3, H=6, sparse=True)
    policies = [random_policy(rng, 4, 3, 6) for _ in range(4)]
    idx = np.array([1, 2, 9, 10, 11, 250])
    for scheme in (SeedScheme.independent(), SeedScheme.dependent(), SeedScheme.depth_dependent(2)):
        got = evaluate_batch(mdp, policies, scheme, idx, "salt")
        for j, p in enumerate(policies):
            for k, i in enumerate(idx):
                assert got[j, k] == evaluate(mdp, p, scheme, int(i), "salt").total_return


def test_forward_process_is_unbiased(rng):
    from crnplan.mdp import utility

    mdp = random_mdp(rng, S=3, A=2, H=4)
    pi = random_policy(rng, 3, 2, 4)
    r = evaluate_batch(mdp, [pi], SeedScheme.independent(), np.arange(20_000), "unbiased")[0]
    assert abs(r.mean() - utility(mdp, pi)) < 5 * r.std() / np.sqrt(r.size)


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=8), st.integers(0, 10**6), st.integers(1, 50))
def test_seed_is_pure_function_of_context(salt, index, t):
    ctx = SeedContext("2", "1", t, index, "pk", salt)
    assert derive_seed(ctx) == derive_seed(SeedContext("2", "1", t, index, "pk", salt))
    assert derive_seed(ctx) == fnv1a64(ctx.key().encode())
