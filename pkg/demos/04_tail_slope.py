# %% [markdown]
# Empirical tail decay against the rate
#
# For a one-layer identity network on one input, k2 = chi2_N / N, and
# -log P(k2 >= 2) grows like N * (1 - log 2) / 2.

# %%
from nngp_ldp import NetworkConfig, SeedSpec, TailEvent, identity, make_grid, scalar_rate_closed_form, tail_slope

cfg = NetworkConfig(L=1, N0=1, ratios=1, precisions=1, activation=identity())
Ns = list(range(20, 201, 10))
fit = tail_slope(TailEvent(2.0), cfg, make_grid((0.5, 1.5), 1), Ns, 50_000, SeedSpec(0))
for row in fit.rows():
    if row["used"]:
        print(f"N={row['N']:3d}  hits {row['hits']:6d}  -log p {row['neg_log_prob']:.3f}")
print(f"slope {fit.slope:.4f} +- {fit.stderr:.4f}; rate {scalar_rate_closed_form(2.0, 1.0, 1.0):.4f}")
