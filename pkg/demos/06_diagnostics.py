# %% [markdown]
# Two sanity checks on the Gaussian picture
#
# Wide-network outputs should look Gaussian with the limit covariance, and
# Gaussian weight matrices should respect the operator-norm tail bound.

# %%
import numpy as np

from nngp_ldp import NetworkConfig, SeedSpec, clt_diagnostic, singvalue_tail_check

X = np.array([[1.0, 0.0], [0.6, 0.8]])
cfg = NetworkConfig(L=2, N0=2, ratios=1, precisions=1, activation="relu")
for N in (2, 1024):
    rep = clt_diagnostic(cfg, X, N, 1, 2000, SeedSpec(0), bootstrap=100)
    print(f"N={N:5d}  energy p {rep.energy_pvalue:.3f}  excess kurtosis {np.round(rep.kurtosis, 3)}  "
          f"{'pass' if rep.passed else 'fail'}")

# %%
for r in singvalue_tail_check(64, 64, 1.0, [0.0, 0.1, 0.3], 2000, 1.0, SeedSpec(0)):
    print(f"t={r.t}: empirical {r.empirical:.4f} [{r.ci_low:.4f}, {r.ci_high:.4f}]  bound {r.bound:.4g}")
