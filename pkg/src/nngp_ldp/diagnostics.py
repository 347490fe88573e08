"""Empirical checks: Gaussianity of wide-network outputs and Gaussian-matrix operator-norm tails."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from scipy.spatial.distance import pdist

from .chain import NetworkConfig, simulate_chains, simulate_network_outputs
from .errors import InvalidArgument
from .nngp import NngpOptions, nngp_kernels
from .operators import Grid
from .rng import as_seed


def _whitener(C: np.ndarray, rel: float = 1e-10) -> np.ndarray:
    """Rows map a vector onto whitened coordinates of ``C``'s range."""
    vals, vecs = np.linalg.eigh(0.5 * (C + C.T))
    keep = vals > rel * max(vals.max(), 0.0)
    return (vecs[:, keep] / np.sqrt(vals[keep])).T


def _mean_dist_to_normal(a: np.ndarray) -> np.ndarray:
    """``E|a - Z|`` for ``Z ~ N(0, I_d)``, row-wise."""
    d = a.shape[1]
    c = np.sqrt(2.0) * np.exp(special.gammaln((d + 1) / 2) - special.gammaln(d / 2))
    return c * special.hyp1f1(-0.5, d / 2, -0.5 * np.sum(a * a, axis=1))


def energy_statistic(a: np.ndarray) -> float:
    """One-sample energy statistic of whitened rows ``a`` against ``N(0, I)``."""
    n, d = a.shape
    ez = 2.0 * np.exp(special.gammaln((d + 1) / 2) - special.gammaln(d / 2))
    pair = 2.0 * pdist(a).sum() / (n * n)
    return float(n * (2.0 * _mean_dist_to_normal(a).mean() - ez - pair))


def energy_test(a: np.ndarray, bootstrap: int = 200, seed=None) -> tuple[float, float]:
    """Statistic and parametric-bootstrap p-value."""
    stat = energy_statistic(a)
    rng = as_seed(seed).rng("energy_bootstrap")
    null = np.array([energy_statistic(rng.standard_normal(a.shape)) for _ in range(bootstrap)])
    return stat, float((1 + np.sum(null >= stat)) / (bootstrap + 1))


@dataclass(frozen=True, eq=False)
class NormalityReport:
    skewness: np.ndarray
    kurtosis: np.ndarray  # excess
    coord_pvalues: np.ndarray
    energy: float
    energy_pvalue: float
    level: float
    samples: int

    @property
    def coords_pass(self) -> np.ndarray:
        # Bonferroni across coordinates
        return self.coord_pvalues >= self.level / len(self.coord_pvalues)

    @property
    def passed(self) -> bool:
        return bool(self.energy_pvalue >= self.level and np.all(self.coords_pass))

    def rows(self) -> list[dict]:
        return [
            {"coordinate": i, "skewness": float(s), "excess_kurtosis": float(k), "pvalue": float(p),
             "pass": bool(ok)}
            for i, (s, k, p, ok) in enumerate(zip(self.skewness, self.kurtosis, self.coord_pvalues, self.coords_pass))
        ]

    def to_dict(self) -> dict:
        return {"energy": self.energy, "energy_pvalue": self.energy_pvalue, "level": self.level,
                "samples": self.samples, "passed": self.passed}


def output_samples(cfg: NetworkConfig, inputs, N: int, M: int, reps: int, seed=None,
                   method: str = "chain") -> np.ndarray:
    """``reps`` independent networks, ``M`` output coordinates each; shape ``(reps, M * P)``.

    ``method="chain"`` runs the covariance chain on the input points and
    draws outputs conditionally Gaussian given the last kernel;
    ``method="weights"`` runs the raw weight recursion.
    """
    seed = as_seed(seed)
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    P = X.shape[0]
    if not 1 <= M <= cfg.D:
        raise InvalidArgument("need 1 <= M <= D output coordinates")
    if method == "weights":
        return np.stack([simulate_network_outputs(cfg, N, X, M, seed.child("net", r)).reshape(-1)
                         for r in range(reps)])
    if method != "chain":
        raise InvalidArgument("method must be 'chain' or 'weights'")
    grid = Grid(X, np.ones(P))
    K = simulate_chains(cfg, N, grid, reps, seed.child("chains"))[:, -1]
    vals, vecs = np.linalg.eigh(K)
    F = vecs * np.sqrt(np.clip(vals, 0.0, None))[:, None, :]
    xi = seed.rng("outputs").standard_normal((reps, M, P))
    return (xi @ np.swapaxes(F, 1, 2)).reshape(reps, M * P)


def clt_diagnostic(cfg: NetworkConfig, inputs, N: int, M: int, reps: int, seed=None, level: float = 0.01,
                   method: str = "chain", bootstrap: int = 200,
                   nngp_opts: NngpOptions = NngpOptions()) -> NormalityReport:
    """Compare finite-width outputs with ``N(0, I_M kron C)``, ``C`` the limit kernel at the inputs."""
    if M < 1 or reps < 2:
        raise InvalidArgument("need M >= 1 and reps >= 2")
    seed = as_seed(seed)
    Z = output_samples(cfg, inputs, N, M, reps, seed, method)
    C = nngp_kernels(cfg, inputs, nngp_opts)[-1]
    a = Z @ np.kron(np.eye(M), _whitener(C)).T
    skew = stats.skew(a, axis=0)
    kurt = stats.kurtosis(a, axis=0)
    pvals = np.array([stats.normaltest(col).pvalue for col in a.T]) if reps >= 20 else np.ones(a.shape[1])
    e, p = energy_test(a, bootstrap, seed.child("energy"))
    return NormalityReport(skew, kurt, pvals, e, p, level, reps)


@dataclass(frozen=True)
class TailRow:
    t: float
    threshold: float
    exceed: int
    reps: int
    empirical: float
    ci_low: float
    ci_high: float
    bound: float
    violated: bool


def singvalue_tail_check(n1: int, n2: int, lam: float, t_values, reps: int, C: float, seed=None,
                         confidence: float = 0.95, block: int = 1000) -> list[TailRow]:
    """Empirical ``P(||W|| > C (sqrt(n2/n1) + 1 + t))`` for ``W_ij ~ N(0, lam/n1)``.

    A ``t`` is flagged when the lower end of the Wilson interval lies above
    ``2 exp(-n1 t^2)``.
    """
    if n1 < 1 or n2 < 1 or lam <= 0 or C <= 0 or reps < 1:
        raise InvalidArgument("n1, n2, reps >= 1 and lam, C > 0 are required")
    seed = as_seed(seed)
    norms = np.empty(reps)
    for b, start in enumerate(range(0, reps, block)):
        size = min(block, reps - start)
        W = seed.rng("matrices", b).standard_normal((size, n1, n2)) * np.sqrt(lam / n1)
        norms[start:start + size] = np.linalg.norm(W, ord=2, axis=(1, 2))
    rows = []
    for t in t_values:
        thr = C * (np.sqrt(n2 / n1) + 1.0 + t)
        k = int(np.sum(norms > thr))
        ci = stats.binomtest(k, reps).proportion_ci(confidence, method="wilson")
        bound = 2.0 * np.exp(-n1 * t * t)
        rows.append(TailRow(float(t), float(thr), k, reps, k / reps, float(ci.low), float(ci.high),
                            float(bound), bool(ci.low > bound)))
    return rows
