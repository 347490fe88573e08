# %% [markdown]
# Kernels on a grid become symmetric matrices
#
# A kernel sampled at quadrature nodes is stored as diag(sqrt w) k diag(sqrt w).
# Its eigenvalues approximate the integral operator's, so the norms reduce to
# plain matrix algebra.

# %%
import numpy as np

from nngp_ldp import (hs_norm, make_grid, op_norm, operator_from_function, powers_stormer_gap, sqrt_op, trace,
                      trace_norm)

grid = make_grid((0.0, 1.0), 32)
K = operator_from_function(grid, lambda x, y: np.exp(-np.abs(x - y).sum(-1)))
K2 = operator_from_function(grid, lambda x, y: np.exp(-2 * np.abs(x - y).sum(-1)))

# %%
# The exponential kernel on [0, 1] has trace 1; the norms are ordered.
print(f"trace {trace(K):.6f}")
print(f"op {op_norm(K):.4f} <= hs {hs_norm(K):.4f} <= trace norm {trace_norm(K):.4f}")

# %%
# The square root is the unique non-negative one, and the square-root distance
# is controlled by the trace-norm distance.
R = sqrt_op(K)
print("sqrt reconstruction error", np.abs(R.sym @ R.sym - K.sym).max())
lhs, rhs = powers_stormer_gap(K, K2)
print(f"||sqrt K - sqrt K2||_2^2 = {lhs:.4f} <= ||K - K2||_1 = {rhs:.4f}")
