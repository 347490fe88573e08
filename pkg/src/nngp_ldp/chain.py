"""The covariance Markov chain of a fully connected Gaussian network.

Layer kernels evolve as

    K^{l+1} = b_{l+1} + 1/(lambda_l N_l) * sum_{i <= N_l} C_{h_i},
    h_i iid ~ N(0, K^l),

started from the deterministic input kernel
``K^1(x, x') = b_1 + <x, x'> / (lambda_0 N_0)``. Precisions are indexed
``lambda_0..lambda_L``, widths ``N_1..N_L`` and biases ``b_1..b_{L+1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationSpec, get_activation
from .errors import InvalidArgument, NotPSD
from .fields import activated_sym, sample_sym
from .operators import DEFAULT_TOL, Grid, KernelGrid, OperatorRep, Tolerances, constant_operator
from .rng import SeedSpec, as_seed


@dataclass(frozen=True, eq=False)
class NetworkConfig:
    """Depth ``L``, input dimension ``N0``, width ratios ``m_1..m_L``,
    precisions ``lambda_0..lambda_L``, biases ``b_1..b_{L+1}``, activation
    and output dimension ``D``."""

    L: int
    N0: int
    ratios: tuple
    precisions: tuple
    activation: ActivationSpec
    biases: tuple | None = None
    D: int = 1

    def __post_init__(self):
        if self.L < 1 or self.N0 < 1 or self.D < 1:
            raise InvalidArgument("L, N0 and D must be >= 1")
        ratios = tuple(float(m) for m in np.broadcast_to(self.ratios, (self.L,)))
        precisions = tuple(float(p) for p in np.broadcast_to(self.precisions, (self.L + 1,)))
        biases = tuple(float(b) for b in np.broadcast_to(0.0 if self.biases is None else self.biases, (self.L + 1,)))
        if min(ratios) <= 0:
            raise InvalidArgument("width ratios m_l must be positive")
        if min(precisions) <= 0:
            raise InvalidArgument("precisions lambda_l must be positive")
        if min(biases) < 0:
            raise InvalidArgument("bias variances must be non-negative")
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "precisions", precisions)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "activation", get_activation(self.activation))

    def widths(self, N: int) -> list[int]:
        if N < 1:
            raise InvalidArgument("N must be >= 1")
        return [max(1, int(np.floor(m * N))) for m in self.ratios]

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "N0": self.N0,
            "ratios": list(self.ratios),
            "precisions": list(self.precisions),
            "biases": list(self.biases),
            "activation": self.activation.to_dict(),
            "D": self.D,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            L=int(d["L"]),
            N0=int(d["N0"]),
            ratios=d.get("ratios", 1.0),
            precisions=d["precisions"],
            activation=get_activation(d["activation"]),
            biases=d.get("biases"),
            D=int(d.get("D", 1)),
        )


@dataclass(frozen=True, eq=False)
class ChainState:
    """One simulated path ``(K^2, ..., K^{L+1})`` plus its deterministic start ``K^1``."""

    operators: tuple
    init: OperatorRep
    config: NetworkConfig
    seed: SeedSpec
    N: int
    widths: tuple = field(default=())

    @property
    def last(self) -> OperatorRep:
        return self.operators[-1]

    @property
    def kernels(self) -> list[KernelGrid]:
        return [op.kernel_grid() for op in self.operators]

    @property
    def grid(self) -> Grid:
        return self.init.grid


def init_kernel(grid: Grid, lam0: float, b1: float = 0.0, N0: int | None = None,
                tol: Tolerances = DEFAULT_TOL) -> OperatorRep:
    """Input-layer kernel ``b1 + <x, x'> / (lam0 N0)`` on the grid nodes."""
    if lam0 <= 0:
        raise InvalidArgument("lambda_0 must be positive")
    if b1 < 0:
        raise InvalidArgument("bias variance must be non-negative")
    N0 = grid.dim_input if N0 is None else N0
    X = grid.nodes
    k = b1 + X @ X.T / (lam0 * N0)
    sw = grid.sqrt_w
    return OperatorRep(grid, sw[:, None] * k * sw[None, :], tol)


def chain_step(K: OperatorRep, width: int, lam: float, b: float, act: ActivationSpec, seed=None) -> OperatorRep:
    """One transition of the chain: average ``width`` rank-one ``C_h`` with ``h ~ N(0, K)``."""
    if width < 1:
        raise InvalidArgument("width must be >= 1")
    if lam <= 0:
        raise InvalidArgument("lambda must be positive")
    grid = K.grid
    hs = sample_sym(K, int(width), as_seed(seed))
    s = activated_sym(hs / grid.sqrt_w, act, grid)
    sym = s.T @ s / (lam * width)
    if b:
        sym = sym + constant_operator(grid, b).sym
    return OperatorRep(grid, sym, K.tol)


def simulate_chain(cfg: NetworkConfig, N: int, grid: Grid, seed=None) -> ChainState:
    seed = as_seed(seed)
    widths = cfg.widths(N)
    K1 = init_kernel(grid, cfg.precisions[0], cfg.biases[0], cfg.N0)
    K = K1
    ops = []
    for layer in range(1, cfg.L + 1):
        K = chain_step(K, widths[layer - 1], cfg.precisions[layer], cfg.biases[layer], cfg.activation,
                       seed.child("layer", layer))
        ops.append(K)
    return ChainState(tuple(ops), K1, cfg, seed, int(N), tuple(widths))


def simulate_chains(cfg: NetworkConfig, N: int, grid: Grid, reps: int, seed=None,
                    block: int = 1024) -> np.ndarray:
    """Many independent chains at once; returns sym matrices of shape ``(reps, L, n, n)``.

    Replicates are simulated in blocks of ``block`` with one stream per
    block, so results depend on ``(seed, block)`` but not on how blocks are
    scheduled.
    """
    seed = as_seed(seed)
    widths = cfg.widths(N)
    n = grid.n
    sw = grid.sqrt_w
    K1 = init_kernel(grid, cfg.precisions[0], cfg.biases[0], cfg.N0)
    bias_sym = np.outer(sw, sw)
    out = np.empty((reps, cfg.L, n, n))
    for b, start in enumerate(range(0, reps, block)):
        B = min(block, reps - start)
        rng = seed.rng("chains", b)
        K = np.broadcast_to(K1.sym, (B, n, n))
        for layer in range(1, cfg.L + 1):
            vals, vecs = np.linalg.eigh(K)
            thr = K1.tol.psd_tol * np.maximum(1.0, np.abs(vals).max(axis=1))
            if np.any(vals[:, 0] < -thr):
                raise NotPSD("chain left the non-negative cone")
            F = vecs * np.sqrt(np.clip(vals, 0.0, None))[:, None, :]
            width = widths[layer - 1]
            xi = rng.standard_normal((B, width, n))
            hs = xi @ np.swapaxes(F, 1, 2)
            s = cfg.activation(hs / sw) * sw
            K = np.swapaxes(s, 1, 2) @ s / (cfg.precisions[layer] * width)
            if cfg.biases[layer]:
                K = K + cfg.biases[layer] * bias_sym
            out[start:start + B, layer - 1] = K
    return out


def simulate_network_outputs(cfg: NetworkConfig, N: int, inputs, M: int, seed=None) -> np.ndarray:
    """Raw weight recursion: ``M`` output coordinates at the given inputs.

    Returns an ``(M, P)`` array of ``h^{(L+1)}_i(x_mu)``. Conditionally on
    layer ``L`` the rows are iid Gaussian with covariance ``K^{L+1}``.
    """
    seed = as_seed(seed)
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    if X.shape[1] != cfg.N0:
        raise InvalidArgument(f"inputs must have {cfg.N0} coordinates")
    if not 1 <= M <= cfg.D:
        raise InvalidArgument("need 1 <= M <= D output copies")
    widths = cfg.widths(N)
    rng = seed.rng("weights")
    lam, b = cfg.precisions, cfg.biases
    fan_in = cfg.N0
    pre = X.T  # (fan_in, P)
    for layer, width in enumerate(widths + [M]):
        W = rng.standard_normal((width, fan_in)) / np.sqrt(lam[layer])
        B = rng.standard_normal((width, 1)) * np.sqrt(b[layer])
        h = W @ pre / np.sqrt(fan_in) + B
        pre = cfg.activation(h)
        fan_in = width
    return h
