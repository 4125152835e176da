# %% [markdown]
# Swift-Hohenberg on (0, pi)^2
#
# du = ((gamma^2 - (1 + Lap)^2) u - u|u|) dt + noise.  The linear part
# is fourth order, so the explicit schemes need n of order m^4; the schedule
# is driven by the exact Galerkin constant instead of the m^2 closed form.

# %%
import numpy as np

from tamedspde import LevelConfig, integrate, make_schedule, swift_hohenberg
from tamedspde.noise import NoiseSource
from tamedspde.spectral import to_physical
from tamedspde.experiments import default_initial

sh = swift_hohenberg()
sched = make_schedule((2, 4), 0.5, "exact_c4", model=sh)
print(sched.describe())

# %%
lv = sched.levels[-1]
basis = sh.basis(lv.m)
src = NoiseSource(seed=3, samples=[0], n_max=lv.n, k_max=lv.k)
rec = integrate(sh, LevelConfig(lv.m, lv.n, lv.k), src, default_initial(sh, basis),
                galerkin=sched.c_m(lv))
u = to_physical(rec.endpoint)[0]
print("grid", u.shape, "min", u.min().round(4), "max", u.max().round(4))

# %%
# coarse text rendering of u(T)
chars = " .:-=+*#%@"
scaled = (u - u.min()) / (np.ptp(u) or 1.0)
for row in scaled[:: max(1, len(scaled) // 12)]:
    print("".join(chars[int(v * (len(chars) - 1))] for v in row))
