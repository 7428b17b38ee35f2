# %% [markdown]
# # Long-run strategy abundances
#
# Mutation plus pairwise imitation defines a Markov chain on (i_CI, i_T).
# Its stationary distribution gives how often each strategy is played.

# %%
import time

from trustdyn import GameParams, build_chain, stationary

for M in range(5):
    t0 = time.perf_counter()
    chain = build_chain(GameParams(M=M))
    res = stationary(chain)
    rho = ", ".join(f"{x:.3f}" for x in res.rho)
    fbar = ", ".join(f"{x:.2f}" for x in res.fbar)
    print(f"M={M}  rho=({rho})  fbar=({fbar})  {time.perf_counter() - t0:.2f}s")

# %% [markdown]
# An intermediate threshold lets CI and T coexist and pushes U out; with
# M=0 (no screening) or M=N (too strict) U takes over.
#
# The default solver is a sparse LU solve. Power iteration is also
# available and agrees on small chains.

# %%
import numpy as np

from trustdyn import dense_stationary

small = build_chain(GameParams(Z=20, mu=0.05))
a = stationary(small, method="power").distribution
b = dense_stationary(small)
print("power iterations:", stationary(small, method="power").iterations)
print("max |power - dense| =", np.abs(a - b).max())
