import numpy as np
import pytest

from crnplan.mdp import policies_agree_after
from crnplan.synthetic import SyntheticSpec, generate_agreeing_policies, generate_mdp


def test_generated_mdp_shape_and_rows():
    spec = SyntheticSpec(7, 4, 20, 0)
    mdp = generate_mdp(spec)
    assert (mdp.num_states, mdp.num_actions, mdp.horizon) == (7, 4, 20)
    assert np.allclose(mdp.transitions.sum(axis=-1), 1.0)
    assert mdp.rewards.min() >= 0 and mdp.rewards.max() < 1


def test_generator_is_deterministic_and_seeded():
    a = generate_mdp(SyntheticSpec(3, 2, 4, 5))
    b = generate_mdp(SyntheticSpec(3, 2, 4, 5))
    c = generate_mdp(SyntheticSpec(3, 2, 4, 6))
    assert np.array_equal(a.transitions, b.transitions)
    assert not np.array_equal(a.rewards, c.rewards)


def test_policies_agree_and_prefixes_distinct():
    spec = SyntheticSpec(7, 4, 20, 0)
    pols = generate_agreeing_policies(spec, 100, 2)
    assert len(pols) == 100
    assert all(policies_agree_after(pols[0], p, 2) for p in pols)
    prefixes = {p.actions[:, :2].tobytes() for p in pols}
    assert len(prefixes) == 100


def test_too_few_prefixes_warns():
    with pytest.warns(UserWarning):
        pols = generate_agreeing_policies(SyntheticSpec(1, 2, 3, 0), 5, 1)
    assert len(pols) == 5


def test_bad_specs():
    with pytest.raises(ValueError):
        SyntheticSpec(0, 2, 3)
    with pytest.raises(ValueError):
        generate_agreeing_policies(SyntheticSpec(2, 2, 3), 3, 4)
