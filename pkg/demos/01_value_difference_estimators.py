"""
Estimating a value difference with shared random numbers
========================================================

Two policies are compared by simulating both and subtracting the returns.
Whether the two simulations share their random numbers changes the variance
of that difference, and not always for the better.
"""

# %%
# A two-step MDP where sharing hurts.  From the start state both actions lead
# to s2 or s3 with probability 1/2; the second action decides the payoff.
import numpy as np

from crnplan.estimators import (
    EstimatorKind,
    counterexample_mdp,
    exact_moments,
    paired_backward_draws,
)
from crnplan.mdp import utility

mdp, pi1, pi2 = counterexample_mdp(2, 4, 3, 2)
print("true values:", utility(mdp, pi1), utility(mdp, pi2))

# %%
# Exact variances by enumerating every sampled deterministic MDP.  Full
# sharing (XD) is worse than independent runs (XI) here because the two
# returns are negatively correlated.  Sharing only after step 2 (XDD) adds
# nothing on a two-step problem, so it matches XI.
m = exact_moments(mdp, pi1, pi2, d=2)
print(f"var XI = {m.var_xi:.3f}   var XD = {m.var_xd:.3f}   var XDD(2) = {m.var_xdd:.3f}")

# %%
# The same numbers from a million sampled pairs of deterministic MDPs.
cols = paired_backward_draws(mdp, pi1, pi2, 2, 1_000_000, seed_source=0)
for k in ("XI", "XD", "XDD"):
    print(f"{k:4s} mean {cols[k].mean():+.4f}  var {cols[k].var():.4f}")
print("cov(U1, U2) =", np.cov(cols["U1"], cols["U2"])[0, 1].round(4))

# %%
# When the two policies agree after a depth d, sharing the random numbers
# only from there on is never worse than independent runs.  A random example:
from crnplan.mdp import Policy
from crnplan.synthetic import SyntheticSpec, generate_mdp

spec = SyntheticSpec(3, 2, 3, generator_seed=4)
small = generate_mdp(spec)
rng = np.random.default_rng(1)
a = rng.integers(0, 2, size=(3, 3))
b = a.copy()
b[:, 0] = 1 - a[:, 0]
m = exact_moments(small, Policy(a), Policy(b), d=1)
print(f"agree after 1: var XI = {m.var_xi:.4f}  var XDD(1) = {m.var_xdd:.4f}  var XD = {m.var_xd:.4f}")
