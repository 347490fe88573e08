"""Deterministic infinite-width (NNGP) recursion and its closed-form oracles."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .activations import ActivationSpec
from .chain import NetworkConfig, init_kernel, simulate_chain
from .errors import InvalidArgument, NotPSD
from .operators import DEFAULT_TOL, Grid, OperatorRep, Tolerances, _psd_threshold, psd_project, trace_norm
from .quadrature import hermite_rule, piecewise_linear_mean, split_normal_rule
from .rng import as_seed


@dataclass(frozen=True)
class NngpOptions:
    hermite_nodes: int = 40
    correlation_clamp: float = 1.0 - 1e-12
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self):
        if self.hermite_nodes < 2:
            raise InvalidArgument("hermite_nodes must be >= 2")
        if not 0 < self.correlation_clamp <= 1:
            raise InvalidArgument("correlation_clamp must lie in (0, 1]")


def _inner_mean(act, mu, s, q):
    """E[sigma(mu + s V)] elementwise."""
    if act.piecewise_linear:
        return piecewise_linear_mean(mu, s, act.breakpoints, act.slopes, act.intercepts)
    v, w = hermite_rule(q)
    return act(mu[..., None] + s[..., None] * v) @ w


def gaussian_product_moments(k: np.ndarray, act: ActivationSpec, opts: NngpOptions = NngpOptions()) -> np.ndarray:
    """``E[sigma(Z_i) sigma(Z_j)]`` for ``Z ~ N(0, k)``, entry by entry.

    Each pair is reduced to ``Z_i = sqrt(a) U``, ``Z_j = (c / sqrt(a)) U + s V``
    (a 2x2 Cholesky factor of the clamped pair covariance). The outer
    expectation over ``U`` uses a normal rule split at the activation's
    kinks; the inner one over ``V`` is exact for piecewise-linear
    activations and Gauss-Hermite otherwise. Diagonal entries are 1-D.
    """
    k = np.asarray(k, dtype=float)
    n = k.shape[0]
    q = opts.hermite_nodes
    diag = np.clip(np.diag(k).copy(), 0.0, None)
    zero = diag <= 1e-300
    sigma0 = float(act(0.0))
    out = np.empty((n, n))
    for i in range(n):
        a = diag[i]
        js = np.arange(i, n)
        b = diag[js]
        if zero[i]:
            # Z_i == 0 almost surely
            v, w = hermite_rule(q)
            out[i, js] = sigma0 * (act(np.sqrt(b)[:, None] * v) @ w)
            continue
        ra = np.sqrt(a)
        u, w = split_normal_rule([t / ra for t in act.breakpoints], q)
        rho = np.zeros(len(js))
        ok = b > 1e-300
        rho[ok] = k[i, js[ok]] / np.sqrt(a * b[ok])
        rho = np.clip(rho, -opts.correlation_clamp, opts.correlation_clamp)
        rho[0] = 1.0  # diagonal is exact: Z_j == Z_i
        sb = np.sqrt(b)
        mu = np.outer(u, rho * sb)  # (Q, m)
        s = np.broadcast_to(sb * np.sqrt(np.clip(1.0 - rho**2, 0.0, None)), mu.shape)
        g = _inner_mean(act, mu, np.ascontiguousarray(s), q)
        out[i, js] = (w * act(ra * u)) @ g
    iu = np.triu_indices(n, 1)
    out[iu[1], iu[0]] = out[iu]
    return out


def _to_kernel(K: OperatorRep) -> np.ndarray:
    vals = K.eigenvalues
    if vals.size and vals[-1] < -_psd_threshold(vals, K.tol):
        raise NotPSD("NNGP step needs a non-negative operator")
    return K.kernel


def _from_kernel(grid: Grid, k: np.ndarray, tol: Tolerances) -> OperatorRep:
    sw = grid.sqrt_w
    return psd_project(sw[:, None] * k * sw[None, :], grid, tol)


def nngp_step(K: OperatorRep, lam: float, b: float, act: ActivationSpec,
              opts: NngpOptions = NngpOptions()) -> OperatorRep:
    """Kernel ``b + E[sigma(Z(x)) sigma(Z(x'))] / lam`` with ``Z ~ GP(0, K)``."""
    if lam <= 0:
        raise InvalidArgument("lambda must be positive")
    k = _to_kernel(K)
    return _from_kernel(K.grid, b + gaussian_product_moments(k, act, opts) / lam, opts.tol)


def arccos_relu(k: np.ndarray) -> np.ndarray:
    """``E[relu(Z_i) relu(Z_j)]`` in closed form (arc-cosine kernel of degree 1)."""
    k = np.asarray(k, dtype=float)
    d = np.sqrt(np.clip(np.diag(k), 0.0, None))
    norm = np.outer(d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.clip(np.where(norm > 0, k / norm, 0.0), -1.0, 1.0)
    theta = np.arccos(cos)
    return np.where(norm > 0, norm / (2 * np.pi) * (np.sin(theta) + (np.pi - theta) * cos), 0.0)


def arcsin_erf(k: np.ndarray) -> np.ndarray:
    """``E[erf(Z_i) erf(Z_j)]`` in closed form."""
    k = np.asarray(k, dtype=float)
    d = 1.0 + 2.0 * np.clip(np.diag(k), 0.0, None)
    return 2.0 / np.pi * np.arcsin(np.clip(2.0 * k / np.sqrt(np.outer(d, d)), -1.0, 1.0))


def relu_arccos_kernel(K: OperatorRep, lam: float, b: float = 0.0) -> OperatorRep:
    """Closed-form NNGP step for relu; an independent check of ``nngp_step``."""
    return _from_kernel(K.grid, b + arccos_relu(K.kernel) / lam, K.tol)


def erf_arcsin_kernel(K: OperatorRep, lam: float, b: float = 0.0) -> OperatorRep:
    return _from_kernel(K.grid, b + arcsin_erf(K.kernel) / lam, K.tol)


def nngp_kernels(cfg: NetworkConfig, X, opts: NngpOptions = NngpOptions()) -> list[np.ndarray]:
    """Limit kernels ``K^2..K^{L+1}`` at arbitrary input points (rows of ``X``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    k = cfg.biases[0] + X @ X.T / (cfg.precisions[0] * cfg.N0)
    out = []
    for layer in range(1, cfg.L + 1):
        k = cfg.biases[layer] + gaussian_product_moments(k, cfg.activation, opts) / cfg.precisions[layer]
        out.append(k)
    return out


def nngp_chain(cfg: NetworkConfig, grid: Grid, opts: NngpOptions = NngpOptions()) -> list[OperatorRep]:
    K = init_kernel(grid, cfg.precisions[0], cfg.biases[0], cfg.N0, opts.tol)
    out = []
    for layer in range(1, cfg.L + 1):
        K = nngp_step(K, cfg.precisions[layer], cfg.biases[layer], cfg.activation, opts)
        out.append(K)
    return out


@dataclass(frozen=True)
class DistanceCurve:
    """Trace-norm distances ``||K^l_N - K^l_inf||_1``; ``distances[iN, rep, layer-2]``."""

    Ns: np.ndarray
    distances: np.ndarray

    @property
    def layers(self) -> np.ndarray:
        return np.arange(2, self.distances.shape[2] + 2)

    @property
    def median(self) -> np.ndarray:
        return np.median(self.distances, axis=1)

    @property
    def iqr(self) -> np.ndarray:
        q75, q25 = np.percentile(self.distances, [75, 25], axis=1)
        return q75 - q25

    def rows(self) -> list[dict]:
        med, iqr = self.median, self.iqr
        return [
            {"N": int(N), "layer": int(layer), "median": float(med[a, b]), "iqr": float(iqr[a, b])}
            for a, N in enumerate(self.Ns)
            for b, layer in enumerate(self.layers)
        ]


def lln_distance_curve(cfg: NetworkConfig, grid: Grid, Ns, reps: int, seed=None,
                       opts: NngpOptions = NngpOptions(), workers: int = 1) -> DistanceCurve:
    """Median distance of simulated chains to the NNGP limit for each width scale."""
    if reps < 1:
        raise InvalidArgument("reps must be >= 1")
    seed = as_seed(seed)
    limit = nngp_chain(cfg, grid, opts)
    Ns = np.sort(np.asarray(Ns, dtype=int))

    def one(task):
        N, r = task
        ch = simulate_chain(cfg, int(N), grid, seed.child("lln", int(N), r))
        return [trace_norm(KN - Kinf) for KN, Kinf in zip(ch.operators, limit)]

    tasks = [(N, r) for N in Ns for r in range(reps)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(one, tasks))
    else:
        res = [one(t) for t in tasks]
    return DistanceCurve(Ns, np.asarray(res).reshape(len(Ns), reps, cfg.L))
