# %% [markdown]
# # Parameter sweeps
#
# A sweep is a base parameter set plus axes; every point gets a summary row
# and, optionally, the full stationary distribution and gradient field.

# %%
import tempfile
from pathlib import Path

from trustdyn import SweepSpec, preset, run_sweep

out = Path(tempfile.mkdtemp())
spec = SweepSpec(base={"Z": 50}, axes=[("sigma", [0.1, 1.0, 3.0])], outputs=("summary",), out_dir=out / "sigma")
run_sweep(spec)
print((out / "sigma" / "summary.csv").read_text())

# %% [markdown]
# Axes can tie parameters together, e.g. group size and threshold.

# %%
spec = SweepSpec(base={"Z": 50}, axes=[(("N", "M"), [(4, 2), (6, 3), (8, 4)])], outputs=("summary",),
                 out_dir=out / "groups")
run_sweep(spec)
print((out / "groups" / "summary.csv").read_text())

# %% [markdown]
# Named presets reproduce the standard figure sweeps at Z=100.

# %%
spec = preset("fig2", out_dir=out / "fig2")
run_sweep(spec)
print(sorted(p.name for p in (out / "fig2").iterdir()))
