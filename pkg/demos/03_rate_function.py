# %% [markdown]
# The rate function by Monte-Carlo dual ascent
#
# On a single grid point with a (clipped) linear activation the rate has a
# closed form, which the estimator should reproduce.

# %%
import numpy as np

from nngp_ldp import (NetworkConfig, OperatorRep, RateOptions, SeedSpec, chain_rate, clipped_linear, make_grid,
                      nngp_chain, rate_eval, scalar_rate_closed_form)

point = make_grid((0.5, 1.5), 1)
k1 = OperatorRep(point, [[1.0]])
opts = RateOptions(mc_samples=100_000, seed=SeedSpec(0))
for k2 in (0.5, 1.0, 2.0, 3.0):
    est = rate_eval(OperatorRep(point, [[k2]]), k1, 1.0, clipped_linear(), opts)
    print(f"k2={k2}: estimate {est.value:.4f} +- {est.mc_stderr:.4f}, exact {scalar_rate_closed_form(k2, 1, 1):.4f}")

# %%
# Along the infinite-width path the rate vanishes layer by layer.
cfg = NetworkConfig(L=2, N0=1, ratios=1, precisions=1, activation="tanh")
grid = make_grid((0.0, 1.0), 4)
cr = chain_rate(nngp_chain(cfg, grid), cfg, opts)
print("limit path rates:", np.round(cr.values, 5))

# %%
# A perturbed final kernel costs a positive amount.
Ks = nngp_chain(cfg, grid)
bumped = [Ks[0], Ks[1] * 1.3]
print("bumped path total:", round(chain_rate(bumped, cfg, opts).total, 4))
