# %% [markdown]
# # Gradient of selection
#
# Expected one-step change of (x_CI, x_T) at every state, the arrows of the
# simplex phase portrait.

# %%
import numpy as np

from trustdyn import GameParams, gradient_field

field = gradient_field(GameParams(Z=30, M=2))
speed = np.hypot(field.drift_CI, field.drift_T)
k = speed.argmax()
print(f"{len(field.states)} states, fastest drift at {tuple(field.states[k])}: {field.drift[k]}")

# %% [markdown]
# Plotting is left to the reader; with matplotlib:
#
# ```python
# x, y = field.states.T / 30
# plt.quiver(x, y, field.drift_CI, field.drift_T)
# ```

# %%
# a coarse text view: sign of the CI drift on a few states with no U
for i_ci in range(0, 31, 5):
    i = np.flatnonzero((field.states[:, 0] == i_ci) & (field.states[:, 1] == 30 - i_ci))[0]
    print(i_ci, "+" if field.drift_CI[i] > 0 else "-", f"{field.drift_CI[i]:+.4f}")
