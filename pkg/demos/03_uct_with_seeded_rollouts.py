"""
UCT with seeded simulations
===========================

Depth-limited UCT on a random 7-state MDP.  Up to depth 2 actions follow
UCB1; below that a uniform random rollout finishes the episode.  The seed of
every simulated transition may include the root action, and the scheme
decides where.
"""

# %%
from crnplan.planner import PlanningConfig, TabularEnv, run_episode_with_planner, uct_search
from crnplan.seeding import SeedScheme
from crnplan.synthetic import SyntheticSpec, generate_mdp

env = TabularEnv(generate_mdp(SyntheticSpec(7, 4, 20, generator_seed=0)))

# %%
# One search from the start state.  Root children report how often each
# action was tried and its mean simulated return.
config = PlanningConfig(depth_limit=2, num_simulations=40, scheme=SeedScheme.dependent())
root = uct_search(env, env.initial_state(), config, run_salt="demo")
for a, child in sorted(root.children.items()):
    print(f"action {a}: {child.visit_count:3d} visits, mean {child.mean_value:.3f}")

# %%
# Whole episodes, replanning at every step.  The executed transitions use
# their own noise, so every scheme faces the same environment for a given
# salt.
for scheme in (SeedScheme.independent(), SeedScheme.dependent(), SeedScheme.depth_dependent(2)):
    returns = [run_episode_with_planner(env, PlanningConfig(2, 8, scheme=scheme), f"run{r}").total_return
               for r in range(10)]
    print(f"{str(scheme):20s} mean return over 10 episodes: {sum(returns) / 10:.3f}")
