# %% [markdown]
# # Agent-based cross-check
#
# Simulating the revision process agent by agent should reproduce the
# chain's stationary abundances, given enough events.

# %%
import time

from trustdyn import GameParams, SimConfig, abm_run, build_chain, stationary

p = GameParams(Z=20, M=2, mu=1 / 20)
exact = stationary(build_chain(p)).rho

t0 = time.perf_counter()
sim = abm_run(SimConfig(p, steps=2_000_000, burn_in=100_000, seed=3))
print(f"abm   {[round(x, 4) for x in sim.rho]}  ({time.perf_counter() - t0:.1f}s)")
print(f"chain {[round(x, 4) for x in exact]}")

# %% [markdown]
# `payoff_mode="sampled"` replaces analytic fitness by actually playing
# random groups. It is much slower and noisier, so keep runs short.

# %%
noisy = abm_run(SimConfig(p, steps=20_000, seed=3, payoff_mode="sampled", groups_per_evaluation=5,
                          record_every=5000))
for t, n_ci, n_t, n_u in noisy.series:
    print(t, n_ci, n_t, n_u)
