# %% [markdown]
# Infinite-width kernels and how finite networks approach them

# %%
import numpy as np

from nngp_ldp import (NetworkConfig, SeedSpec, init_kernel, lln_distance_curve, make_grid, nngp_chain, nngp_step,
                      relu, relu_arccos_kernel)

grid = make_grid((0.0, 1.0), 16)
K1 = init_kernel(grid, 1.0, 0.1)

# %%
# Quadrature against the arc-cosine closed form for relu.
q = nngp_step(K1, 1.0, 0.0, relu()).kernel
c = relu_arccos_kernel(K1, 1.0, 0.0).kernel
print("relu quadrature vs closed form:", np.abs(q - c).max())

# %%
# The NNGP chain for a two-layer relu network, and the trace-norm distance of
# simulated chains to it as width grows.
cfg = NetworkConfig(L=2, N0=1, ratios=1, precisions=1, activation="relu")
limit = nngp_chain(cfg, grid)
print("limit traces:", [round(float(np.trace(K.sym)), 5) for K in limit])
curve = lln_distance_curve(cfg, grid, [16, 64, 256, 1024], reps=10, seed=SeedSpec(1))
for row in curve.rows():
    if row["layer"] == 3:
        print(f"N={row['N']:5d}  median distance {row['median']:.4f}  iqr {row['iqr']:.4f}")
