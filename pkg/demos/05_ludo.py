"""
Ludo against a random opponent
==============================

A two-player game where the opponent, who always moves first, picks among
its legal moves at random and is folded into the environment.  The agent
plans with UCT whenever it has two or more legal moves.
"""

# %%
from crnplan.ludo import LogEntry, ludo_uct_match, play_game, random_agent, random_match, replay_log
from crnplan.planner import PlanningConfig
from crnplan.seeding import SeedScheme

# %%
# A logged random game, replayed line by line against the rules.
log = []
result = play_game(random_agent("demo"), "demo", log=log)
for entry in log[:6]:
    print(entry.format())
print("...", len(log), "lines; agent reward", result.reward)
replay_log([LogEntry.parse(e.format()) for e in log])

# %%
# Random play is close to even.
m = random_match(400, "demo")
print(f"random agent wins {m.win_percentage:.1f}% +- {100 * m.std_error:.1f}")

# %%
# A few UCT games per scheme.  Game g uses the same real dice under every
# scheme, so differences come from planning alone.
for scheme in (SeedScheme.independent(), SeedScheme.dependent()):
    m = ludo_uct_match(20, 4, scheme, PlanningConfig(2, 4), run_salt="demo")
    print(f"{str(scheme):12s} UCT(4) wins {m.win_percentage:.0f}% of 20 games")
