# %% [markdown]
# # Group payoffs
#
# A group of N agents holds conditional investors (CI), trustworthy trustees (T)
# and untrustworthy trustees (U). Investors split `tv` among the trustees each
# round; the game keeps going after round one only if at least M of the
# trustees are trustworthy.

# %%
import numpy as np

from trustdyn import GameParams, GroupComposition, PopulationState, Strategy, average_payoff, group_payoff
from trustdyn.abm import play_group_games

p = GameParams()  # Z=100, N=4, M=2, tv=1, R_T=6, R_U=8, sigma=0.1, w=0.8
print(p.as_dict())

# %% [markdown]
# With one T and one U the threshold M=2 is missed, so only the first round
# is played. Add a second T and the expected 1/(1-w) = 5 rounds kick in.

# %%
for comp in [GroupComposition(2, 1, 1), GroupComposition(2, 2, 0)]:
    print(comp, {s.name: round(group_payoff(comp, s, p), 3) for s in Strategy if comp.count(s)})

# %% [markdown]
# Monte Carlo check: play the same group a million times with geometric
# game lengths and compare the sample means.

# %%
rng = np.random.default_rng(1)
comp = GroupComposition(2, 1, 1)
p = p.with_(M=1)
plays = play_group_games(comp, p, rng, 10**6)
print("sampled ", plays.mean(axis=0).round(3))
print("expected", np.round([group_payoff(comp, s, p) for s in Strategy], 3))

# %% [markdown]
# Inside a population of Z agents, groups are random, so each strategy's
# fitness is the hypergeometric average over possible co-players.

# %%
state = PopulationState(i_CI=40, i_T=40)
for s in Strategy:
    print(s.name, round(average_payoff(s, state, p), 4))
