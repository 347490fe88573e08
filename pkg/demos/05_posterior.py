# %% [markdown]
# Reweighting prior chains by a Gaussian likelihood
#
# Each prior chain gets weight exp(-Psi/2). In the standard scaling the weights
# settle as width grows; in the mean-field scaling the data term is multiplied
# by N and the weights degenerate unless the kernel moves.

# %%
import numpy as np

from nngp_ldp import (Grid, NetworkConfig, OperatorRep, RateOptions, SearchOptions, SeedSpec, TrainingSet,
                      clipped_linear, estimate_I0, make_grid, mf_rate, posterior_resample, simulate_chains)

X = np.array([[1.0, 0.0], [0.6, 0.8]])
grid = Grid(X, np.ones(2))
cfg = NetworkConfig(L=2, N0=2, ratios=1, precisions=1, activation="relu")
train = TrainingSet(X, np.array([[1.0], [-0.5]]), beta=1.0)

# %%
for N in (64, 256, 1024):
    prior = [OperatorRep(grid, s) for s in simulate_chains(cfg, N, grid, 200, SeedSpec(3).child(N))[:, -1]]
    std = posterior_resample(prior, train)
    mf = posterior_resample(prior, train, mean_field=True, N=N)
    print(f"N={N:5d}  spread {std.spread:.3f} (ess {std.ess:6.1f})   mean-field ess {mf.ess:6.1f}")

# %% [markdown]
# The mean-field rate subtracts the best achievable cost I0, found here by a
# cross-entropy search over perturbations of the limit path.

# %%
cfg1 = NetworkConfig(L=1, N0=1, ratios=1, precisions=1, activation=clipped_linear())
point = make_grid((0.5, 1.5), 1)
t1 = TrainingSet(np.array([[1.0]]), np.array([[2.0]]), 1.0)
opts = RateOptions(mc_samples=50_000, seed=SeedSpec(0))
est = estimate_I0(cfg1, point, t1, SearchOptions(), opts, SeedSpec(0))
print(f"I0 <= {est.I0_upper:.4f}; kernel at the minimizer {est.argmin[-1].sym[0, 0]:.3f}")
print("mf rate at the minimizer", round(mf_rate(est.argmin, t1, cfg1, est.I0_upper, opts).value, 4))
