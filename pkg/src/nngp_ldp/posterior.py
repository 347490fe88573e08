"""Gaussian-likelihood tilting of the covariance chain.

With training inputs ``x_1..x_P``, responses ``y_mu`` in ``R^D`` and
likelihood precision ``beta``, the last-layer kernel enters only through

    Sigma(K) = [K(x_mu, x_nu)] (kron) I_D,
    Psi(K)   = beta y^T (I + beta Sigma)^{-1} y + log det(I + beta Sigma),

and the posterior law of the chain is the prior law reweighted by
``exp(-Psi / 2)``. Responses are stacked input-major (``y_1, y_2, ...``),
which is column stacking of the ``D x P`` response matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg
from scipy.interpolate import RegularGridInterpolator

from .chain import ChainState, NetworkConfig
from .errors import InvalidArgument, OffGridInput
from .nngp import NngpOptions, nngp_chain
from .operators import Grid, KernelGrid, OperatorRep, psd_project
from .rate import RateOptions, chain_rate, check_growth
from .rng import SeedSpec, as_seed


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """``inputs`` has shape ``(P, N0)``, ``y`` has shape ``(P, D)``."""

    inputs: np.ndarray
    y: np.ndarray
    beta: float

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if X.shape[0] < 1:
            raise InvalidArgument("training set needs at least one input")
        if y.shape[0] != X.shape[0]:
            raise InvalidArgument("inputs and responses must have the same number of rows")
        if not self.beta > 0:
            raise InvalidArgument("beta must be positive")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def P(self) -> int:
        return self.inputs.shape[0]

    @property
    def D(self) -> int:
        return self.y.shape[1]

    @property
    def y_vec(self) -> np.ndarray:
        return self.y.reshape(-1)

    @classmethod
    def from_csv(cls, path, beta: float) -> "TrainingSet":
        """Read columns named ``x*`` (inputs) and ``y*`` (responses)."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            cols = reader.fieldnames or []
            xs = [c for c in cols if c.strip().lower().startswith("x")]
            ys = [c for c in cols if c.strip().lower().startswith("y")]
            if not xs or not ys:
                raise InvalidArgument("training CSV needs x* and y* columns")
            rows = list(reader)
        X = [[float(r[c]) for c in xs] for r in rows]
        Y = [[float(r[c]) for c in ys] for r in rows]
        return cls(np.array(X), np.array(Y), beta)


def _kernel_at_inputs(kernel, train: TrainingSet, interpolate: bool) -> np.ndarray:
    if isinstance(kernel, ChainState):
        kernel = kernel.last
    if isinstance(kernel, OperatorRep):
        kernel = kernel.kernel_grid()
    if isinstance(kernel, KernelGrid):
        grid = kernel.grid
        if train.inputs.shape[1] != grid.dim_input:
            raise InvalidArgument("training inputs and grid have different dimensions")
        idx = grid.locate(train.inputs)
        if np.all(idx >= 0):
            return kernel.values[np.ix_(idx, idx)]
        if not interpolate:
            raise OffGridInput("training inputs are not grid nodes; enable interpolation to proceed")
        return _interpolate(kernel, train.inputs)
    if callable(kernel):
        return np.asarray(kernel(train.inputs), dtype=float)
    raise InvalidArgument("kernel must be a KernelGrid, OperatorRep, ChainState or callable")


def _interpolate(kernel: KernelGrid, X: np.ndarray) -> np.ndarray:
    grid = kernel.grid
    if grid.dim_input != 1 or grid.axes is None:
        raise OffGridInput("kernel interpolation is only available on one-dimensional grids")
    axis = np.asarray(grid.axes[0])
    f = RegularGridInterpolator((axis, axis), kernel.values, bounds_error=True)
    x = X[:, 0]
    pts = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    k = f(pts)
    return 0.5 * (k + k.T)


def sigma_matrix(kernel, train: TrainingSet, D: int | None = None, interpolate: bool = False) -> np.ndarray:
    """``Sigma = K_P (kron) I_D`` with ``K_P`` the kernel at the training inputs.

    ``kernel`` may be a ``KernelGrid``, an ``OperatorRep``, a ``ChainState``
    (its last layer) or a callable mapping a ``(P, N0)`` array to the
    ``P x P`` kernel matrix. Training inputs must be grid nodes unless
    ``interpolate`` is set (bilinear, 1-D grids only).
    """
    D = train.D if D is None else int(D)
    if D < 1:
        raise InvalidArgument("D must be >= 1")
    kP = _kernel_at_inputs(kernel, train, interpolate)
    return np.kron(kP, np.eye(D))


class PsiValue(NamedTuple):
    value: float
    quad: float  # y^T (I + beta Sigma)^{-1} y, without the beta factor
    logdet: float
    beta: float


def psi(Sigma: np.ndarray, y: np.ndarray, beta: float) -> PsiValue:
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != Sigma.shape[0]:
        raise InvalidArgument("y and Sigma sizes differ")
    if beta <= 0:
        raise InvalidArgument("beta must be positive")
    A = np.eye(len(y)) + beta * 0.5 * (Sigma + Sigma.T)
    c, low = linalg.cho_factor(A, lower=True)
    quad = float(y @ linalg.cho_solve((c, low), y))
    logdet = float(2.0 * np.sum(np.log(np.diag(c))))
    return PsiValue(beta * quad + logdet, quad, logdet, float(beta))


def psi_mf(Sigma: np.ndarray, y: np.ndarray, beta: float, N: int) -> PsiValue:
    """Mean-field version: the quadratic term is multiplied by ``N``."""
    if N < 1:
        raise InvalidArgument("N must be >= 1")
    p = psi(Sigma, y, beta)
    return PsiValue(N * beta * p.quad + p.logdet, p.quad, p.logdet, p.beta)


def posterior_log_weight(chain, train: TrainingSet, mean_field: bool = False, N: int | None = None,
                         interpolate: bool = False) -> float:
    """Unnormalized log posterior weight ``-Psi/2`` of one chain (or last-layer kernel)."""
    S = sigma_matrix(chain, train, interpolate=interpolate)
    if mean_field:
        if N is None:
            N = chain.N if isinstance(chain, ChainState) else None
        if N is None:
            raise InvalidArgument("mean-field weights need N")
        return -0.5 * psi_mf(S, train.y_vec, train.beta, N).value
    return -0.5 * psi(S, train.y_vec, train.beta).value


@dataclass(frozen=True, eq=False)
class PosteriorEnsemble:
    samples: tuple
    log_weights: np.ndarray
    weights: np.ndarray
    ess: float
    indices: np.ndarray | None = None  # multinomial resample, if requested

    @property
    def spread(self) -> float:
        return float(np.ptp(self.log_weights))

    def to_dict(self) -> dict:
        return {
            "count": len(self.samples),
            "ess": self.ess,
            "log_weight_spread": self.spread,
            "resampled": self.indices is not None,
        }


def normalize_log_weights(logw) -> tuple[np.ndarray, float]:
    logw = np.asarray(logw, dtype=float)
    if not np.any(np.isfinite(logw)):
        raise RuntimeError("all posterior weights vanish")
    w = np.exp(logw - logw[np.isfinite(logw)].max())
    w /= w.sum()
    return w, float(1.0 / np.sum(w * w))


def posterior_resample(prior, train: TrainingSet, mean_field: bool = False, N: int | None = None,
                       seed=None, resample: bool = False) -> PosteriorEnsemble:
    """Self-normalized importance weights ``exp(-Psi/2)`` over prior chains.

    With ``resample`` a multinomial draw of ``len(prior)`` indices is added,
    giving an unweighted posterior ensemble.
    """
    prior = list(prior)
    if not prior:
        raise InvalidArgument("need at least one prior sample")
    logw = np.array([posterior_log_weight(c, train, mean_field, N) for c in prior])
    w, ess = normalize_log_weights(logw)
    idx = None
    if resample:
        idx = as_seed(seed).rng("resample").choice(len(prior), size=len(prior), p=w)
    return PosteriorEnsemble(tuple(prior), logw, w, ess, idx)


@dataclass(frozen=True, eq=False)
class MFRate:
    value: float
    prior_rate: float
    quad_term: float
    I0: float
    stderr: float


def mf_rate(Ks, train: TrainingSet, cfg: NetworkConfig, I0: float, opts: RateOptions = RateOptions(),
            interpolate: bool = False) -> MFRate:
    """Mean-field rate: prior path rate ``+ beta y^T (I + beta Sigma)^{-1} y - I0``."""
    Ks = list(Ks)
    cr = chain_rate(Ks, cfg, opts)
    p = psi(sigma_matrix(Ks[-1], train, interpolate=interpolate), train.y_vec, train.beta)
    q = p.beta * p.quad
    return MFRate(cr.total + q - I0, cr.total, q, float(I0), cr.stderr)


@dataclass(frozen=True)
class SearchOptions:
    """Cross-entropy search over a low-dimensional family of chain paths.

    Each candidate rescales the limit path layer by layer (``exp(a_l)``)
    and adds non-negative rank-one bumps ``exp(t_{l,mu}) v v^T`` where
    ``v`` is the limit kernel's column at training input ``mu``.
    """

    population: int = 24
    elite: int = 6
    iterations: int = 12
    init_std: float = 1.0
    init_bump: float = -4.0
    search_samples: int = 20_000
    refine_top: int = 3
    tol: float = 1e-3
    bumps: bool = True


@dataclass(frozen=True, eq=False)
class I0Estimate:
    I0_upper: float
    argmin: tuple
    params: np.ndarray
    trace: tuple  # best objective after each iteration
    exhausted: bool

    def to_dict(self) -> dict:
        return {"I0_upper": self.I0_upper, "params": self.params.tolist(),
                "trace": list(self.trace), "exhausted": self.exhausted}


def _candidate_family(limit: list[OperatorRep], train: TrainingSet, bumps: bool) -> tuple[int, Callable]:
    grid = limit[0].grid
    idx = grid.locate(train.inputs)
    if np.any(idx < 0):
        raise OffGridInput("the I0 search needs training inputs on grid nodes")
    idx = np.unique(idx)
    L = len(limit)
    nb = len(idx) if bumps else 0
    sw = grid.sqrt_w
    cols = []
    for K in limit:
        k = K.kernel
        d = np.sqrt(np.clip(np.diag(k)[idx], 1e-300, None))
        cols.append((k[:, idx] / d) * sw[:, None])  # sym coordinates, one column per input

    def build(theta):
        theta = np.asarray(theta, dtype=float)
        ops = []
        for layer, K in enumerate(limit):
            S = np.exp(theta[layer]) * K.sym
            if nb:
                c = np.exp(theta[L + layer * nb: L + (layer + 1) * nb])
                V = cols[layer]
                S = S + (V * c) @ V.T
            ops.append(psd_project(S, grid, K.tol))
        return ops

    return L + L * nb, build


def estimate_I0(cfg: NetworkConfig, grid: Grid, train: TrainingSet, search: SearchOptions = SearchOptions(),
                opts: RateOptions = RateOptions(), seed=None, nngp_opts: NngpOptions = NngpOptions()) -> I0Estimate:
    """Upper bound on ``inf_path [ I(path) + beta y^T (I + beta Sigma(K^{L+1}))^{-1} y ]``.

    Candidates are scored with a reduced Monte-Carlo budget and common
    random numbers; the best few are re-scored at the full budget. The
    plain limit path is always a candidate.
    """
    check_growth(cfg.activation)
    seed = as_seed(seed)
    limit = nngp_chain(cfg, grid, nngp_opts)
    dim, build = _candidate_family(limit, train, search.bumps)
    L = cfg.L
    cheap = replace(opts, mc_samples=min(search.search_samples, opts.mc_samples), seed=seed.child("search"))

    def score(theta, o):
        ops = build(theta)
        return mf_rate(ops, train, cfg, 0.0, o).value

    mean = np.zeros(dim)
    mean[L:] = search.init_bump
    std = np.full(dim, search.init_std)
    rng = seed.rng("cross_entropy")
    seen = [(score(mean, cheap), mean.copy())]
    trace = [seen[0][0]]
    converged = False
    for _ in range(search.iterations):
        thetas = mean + std * rng.standard_normal((search.population, dim))
        vals = np.array([score(t, cheap) for t in thetas])
        order = np.argsort(vals)[: search.elite]
        seen.extend((float(vals[i]), thetas[i]) for i in order)
        new_mean = thetas[order].mean(axis=0)
        std = thetas[order].std(axis=0) + 1e-12
        step = np.max(np.abs(new_mean - mean))
        mean = new_mean
        seen.append((score(mean, cheap), mean.copy()))
        trace.append(min(v for v, _ in seen))
        if step < search.tol and np.max(std) < 10 * search.tol:
            converged = True
            break
    seen.sort(key=lambda vt: vt[0])
    full = replace(opts, seed=seed.child("refine"))
    best_val, best_theta = np.inf, None
    for _, theta in seen[: search.refine_top]:
        v = score(theta, full)
        if v < best_val:
            best_val, best_theta = v, theta
    return I0Estimate(float(best_val), tuple(build(best_theta)), np.asarray(best_theta),
                      tuple(trace), not converged)
