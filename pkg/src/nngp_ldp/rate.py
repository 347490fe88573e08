"""Large-deviation rate of one chain transition, by concave dual ascent.

For non-negative operators ``K1, K2`` and precision ``lam``

    I(K2 | K1) = sup_D  tr(D K2) - log E exp(tr(D C_h) / lam),   h ~ N(0, K1),

the supremum running over symmetric ``D`` on the grid. With ``C_h = s s^T``
(``s = sqrt(w) * sigma(h)``) the log-MGF is estimated by Monte Carlo and the
sample-average objective, a concave log-sum-exp in ``D``, is maximized by
damped Newton steps with backtracking and an effective-sample-size guard.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg, stats

from .activations import ActivationSpec
from .chain import NetworkConfig, init_kernel, simulate_chains
from .errors import InsufficientHits, InvalidArgument, NotPSD, UnstableMGF, UnsupportedGrowth
from .fields import activated_sym, sample_sym
from .operators import Grid, OperatorRep, _psd_threshold, constant_operator
from .rng import SeedSpec, as_seed


@dataclass(frozen=True, eq=False)
class DualVariable:
    grid: Grid
    sym: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sym, dtype=float)
        object.__setattr__(self, "sym", 0.5 * (s + s.T))


@dataclass(frozen=True)
class RateOptions:
    mc_samples: int = 200_000
    max_iter: int = 500
    gtol: float = 1e-4
    ess_floor: float | None = None  # default 0.01 * mc_samples
    seed: SeedSpec = field(default_factory=SeedSpec)
    rank: int | None = None  # optional spectral truncation of the dual variable
    newton_max_dim: int = 2100
    chunk: int = 16384

    def __post_init__(self):
        if self.mc_samples < 2 or self.max_iter < 1 or self.gtol <= 0:
            raise InvalidArgument("mc_samples >= 2, max_iter >= 1 and gtol > 0 are required")
        object.__setattr__(self, "seed", as_seed(self.seed))

    @property
    def floor(self) -> float:
        return 0.01 * self.mc_samples if self.ess_floor is None else self.ess_floor


@dataclass(frozen=True, eq=False)
class RateEstimate:
    value: float
    dual: DualVariable
    mc_stderr: float
    iterations: int
    converged: bool
    ess_min: float
    grad_norm: float = np.nan
    objective_trace: tuple = ()

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "mc_stderr": self.mc_stderr,
            "iterations": self.iterations,
            "converged": self.converged,
            "ess_min": self.ess_min,
            "grad_norm": self.grad_norm,
            "objective_trace": list(self.objective_trace),
        }


class MGFEstimate(NamedTuple):
    value: float
    stderr: float
    ess: float


def check_growth(act: ActivationSpec):
    if act.growth_exponent >= 2:
        raise UnsupportedGrowth(
            f"activation {act.kind!r} has growth exponent r={act.growth_exponent}; rate functions need r < 2"
        )


def _require_nonneg(K: OperatorRep, name: str):
    vals = K.eigenvalues
    if vals.size and vals[-1] < -_psd_threshold(vals, K.tol):
        raise NotPSD(f"{name} is not non-negative (rate is +inf off the cone)")


def tilt_samples(K1: OperatorRep, act: ActivationSpec, M: int, seed: SeedSpec) -> np.ndarray:
    """Rows ``s_m = sqrt(w) * sigma(h_m)``, ``h_m ~ N(0, K1)``."""
    hs = sample_sym(K1, M, seed)
    return activated_sym(hs / K1.grid.sqrt_w, act, K1.grid)


def _lse_stats(x: np.ndarray):
    """log-mean-exp, its delta-method stderr, the ESS and the normalized weights."""
    M = len(x)
    top = x.max()
    u = np.exp(x - top)
    su, su2 = u.sum(), np.dot(u, u)
    value = top + np.log(su / M)
    ess = su * su / su2
    mean = su / M
    var = max(su2 / M - mean * mean, 0.0) * M / (M - 1)
    return value, np.sqrt(var / M) / mean, ess, u / su


def _quad(S, D):
    return np.einsum("mi,mi->m", S @ D, S)


def log_mgf(D: DualVariable, K1: OperatorRep, lam: float, act: ActivationSpec, M: int, seed=None,
            ess_floor: float | None = None, bias: float = 0.0) -> MGFEstimate:
    """Monte-Carlo ``log E exp(tr(D (b + C_h / lam)))`` under ``h ~ N(0, K1)``."""
    check_growth(act)
    if lam <= 0:
        raise InvalidArgument("lambda must be positive")
    _require_nonneg(K1, "K1")
    S = tilt_samples(K1, act, M, as_seed(seed))
    value, se, ess, _ = _lse_stats(_quad(S, D.sym) / lam)
    floor = 0.01 * M if ess_floor is None else ess_floor
    if ess < floor:
        raise UnstableMGF(f"effective sample size {ess:.1f} below floor {floor:.1f}")
    if bias:
        value += float(np.sum(D.sym * constant_operator(K1.grid, bias).sym))
    return MGFEstimate(float(value), float(se), float(ess))


class _Objective:
    """Sample-average dual objective on a fixed set of tilted samples."""

    def __init__(self, S, target, lam, chunk):
        self.S, self.target, self.lam, self.chunk = S, target, lam, chunk
        n = target.shape[0]
        self.iu = np.triu_indices(n)
        self.fac = np.where(self.iu[0] == self.iu[1], 1.0, 2.0)

    def __call__(self, D):
        lse, se, ess, w = _lse_stats(_quad(self.S, D) / self.lam)
        F = float(np.sum(D * self.target) - lse)
        return F, ess, w, se

    def gradient(self, w):
        return self.target - self.S.T @ (w[:, None] * self.S) / self.lam

    def to_vec(self, G):
        return G[self.iu] * self.fac

    def to_mat(self, v):
        n = self.target.shape[0]
        D = np.zeros((n, n))
        D[self.iu] = v
        return D + np.triu(D, 1).T

    def neg_hessian(self, w):
        """Tilted covariance of ``vech(s s^T)`` features divided by lam^2."""
        S, (i, j) = self.S, self.iu
        p = len(i)
        H = np.zeros((p, p))
        mu = np.zeros(p)
        for start in range(0, len(S), self.chunk):
            sl = slice(start, start + self.chunk)
            phi = S[sl, i] * S[sl, j] * self.fac
            wp = w[sl, None] * phi
            H += phi.T @ wp
            mu += wp.sum(axis=0)
        return (H - np.outer(mu, mu)) / self.lam**2


class DualObjective:
    """``F(D) = tr(D (K2 - b)) - log mean exp(tr(D C_h) / lam)`` on one fixed sample set.

    Reusing the samples for every ``D`` gives common random numbers, so
    finite differences of ``value`` are smooth in ``D``.
    """

    def __init__(self, K2: OperatorRep, K1: OperatorRep, lam: float, act: ActivationSpec, M: int, seed=None,
                 bias: float = 0.0, chunk: int = 16384):
        check_growth(act)
        if lam <= 0:
            raise InvalidArgument("lambda must be positive")
        _require_nonneg(K1, "K1")
        target = K2.sym - (constant_operator(K1.grid, bias).sym if bias else 0.0)
        self._obj = _Objective(tilt_samples(K1, act, M, as_seed(seed)), target, lam, chunk)

    def value(self, D) -> float:
        return self._obj(_sym(D))[0]

    def gradient(self, D) -> np.ndarray:
        """Matrix ``G`` with ``dF = tr(G dD)`` for symmetric perturbations ``dD``."""
        return self._obj.gradient(self._obj(_sym(D))[2])


def _sym(D):
    D = D.sym if isinstance(D, DualVariable) else np.asarray(D, dtype=float)
    return 0.5 * (D + D.T)


def _ascent(obj: _Objective, opts: RateOptions, floor: float):
    n = obj.target.shape[0]
    D = np.zeros((n, n))
    F, ess, w, _ = obj(D)
    trace = [F]
    ess_min = ess
    newton = len(obj.iu[0]) <= opts.newton_max_dim
    step = 1.0
    iters = 0
    G = obj.gradient(w)
    gnorm = float(np.linalg.norm(G))
    while iters < opts.max_iter and gnorm > opts.gtol:
        g = obj.to_vec(G)
        if newton:
            H = obj.neg_hessian(w)
            ridge = 1e-12 * max(float(np.trace(H)) / len(g), 1e-300)
            try:
                d = linalg.solve(H + ridge * np.eye(len(g)), g, assume_a="pos")
            except (linalg.LinAlgError, ValueError):
                d = linalg.lstsq(H, g)[0]
            Delta = obj.to_mat(d)
            slope = float(np.dot(g, d))
            t = 1.0
        else:
            Delta = G
            slope = float(np.sum(G * G))
            t = min(2.0 * step, 1e6)
        while t > 1e-14:
            Dn = D + t * Delta
            Fn, essn, wn, _ = obj(Dn)
            # backtrack on Armijo failure or when the tilting degenerates
            if essn >= floor and np.isfinite(Fn) and Fn >= F + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        step = t
        D, F, w = Dn, Fn, wn
        ess_min = min(ess_min, essn)
        trace.append(F)
        G = obj.gradient(w)
        gnorm = float(np.linalg.norm(G))
        iters += 1
    return D, trace, ess_min, gnorm <= opts.gtol, iters, gnorm


def rate_eval(K2: OperatorRep, K1: OperatorRep, lam: float, act: ActivationSpec,
              opts: RateOptions = RateOptions(), bias: float = 0.0) -> RateEstimate:
    """Estimate ``I_lam(K2 | K1)`` (with optional bias translation ``b``).

    Non-convergence (e.g. ``K2`` outside the reachable cone, where the rate is
    infinite) is reported through ``converged=False`` rather than raised.
    The returned value is re-estimated at the optimal dual with fresh
    samples; since ``D = 0`` scores exactly zero, a negative fresh estimate
    falls back to ``D = 0``.
    """
    check_growth(act)
    if lam <= 0:
        raise InvalidArgument("lambda must be positive")
    if not K1.grid.same_as(K2.grid):
        raise InvalidArgument("K1 and K2 live on different grids")
    _require_nonneg(K1, "K1")
    _require_nonneg(K2, "K2")
    grid = K1.grid
    target = K2.sym - (constant_operator(grid, bias).sym if bias else 0.0)
    M = opts.mc_samples
    S = tilt_samples(K1, act, M, opts.seed.child("ascent"))
    U = None
    if opts.rank is not None and opts.rank < grid.n:
        _, vecs = np.linalg.eigh(K1.sym + K2.sym)
        U = vecs[:, ::-1][:, : opts.rank]
        S, target = S @ U, U.T @ target @ U
    obj = _Objective(S, target, lam, opts.chunk)
    D, trace, ess_min, converged, iters, gnorm = _ascent(obj, opts, opts.floor)

    fresh = tilt_samples(K1, act, M, opts.seed.child("final"))
    if U is not None:
        fresh = fresh @ U
    F, ess, _, se = _Objective(fresh, target, lam, opts.chunk)(D)
    ess_min = min(ess_min, ess)
    if F < 0:
        F, se, D = 0.0, 0.0, np.zeros_like(D)
    Dfull = U @ D @ U.T if U is not None else D
    return RateEstimate(float(F), DualVariable(grid, Dfull), float(se), iters, bool(converged),
                        float(ess_min), gnorm, tuple(trace))


def scalar_rate_closed_form(k2, k1, lam):
    """Rate for the identity activation on a one-point grid: ``(x - 1 - log x) / 2``, ``x = lam k2 / k1``.

    Broadcasts over array arguments.
    """
    k2, k1, lam = np.asarray(k2, dtype=float), np.asarray(k1, dtype=float), np.asarray(lam, dtype=float)
    if np.any(k1 <= 0) or np.any(k2 <= 0) or np.any(lam <= 0):
        raise InvalidArgument("k1, k2 and lambda must be positive")
    x = lam * k2 / k1
    out = 0.5 * (x - 1.0 - np.log(x))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ChainRate:
    total: float
    per_layer: tuple
    stderr: float

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.per_layer]


def chain_rate(Ks, cfg: NetworkConfig, opts: RateOptions = RateOptions(), K1: OperatorRep | None = None) -> ChainRate:
    """``sum_l m_l I_{lambda_l}(K_{l+1} | K_l)`` along a path started at the input kernel."""
    Ks = list(Ks)
    if len(Ks) != cfg.L:
        raise InvalidArgument(f"expected {cfg.L} operators, got {len(Ks)}")
    check_growth(cfg.activation)
    prev = K1 if K1 is not None else init_kernel(Ks[0].grid, cfg.precisions[0], cfg.biases[0], cfg.N0)
    per_layer = []
    for layer, K in enumerate(Ks, start=1):
        o = replace(opts, seed=opts.seed.child("layer", layer))
        per_layer.append(rate_eval(K, prev, cfg.precisions[layer], cfg.activation, o, bias=cfg.biases[layer]))
        prev = K
    m = np.asarray(cfg.ratios)
    total = float(np.dot(m, [r.value for r in per_layer]))
    se = float(np.sqrt(np.sum((m * [r.mc_stderr for r in per_layer]) ** 2)))
    return ChainRate(total, tuple(per_layer), se)


_FUNCTIONALS: dict[str, Callable] = {
    "trace": lambda A: np.trace(A, axis1=-2, axis2=-1),
    "trace_norm": lambda A: np.abs(np.linalg.eigvalsh(A)).sum(axis=-1),
    "hs_norm": lambda A: np.sqrt(np.square(np.linalg.eigvalsh(A)).sum(axis=-1)),
    "op_norm": lambda A: np.abs(np.linalg.eigvalsh(A)).max(axis=-1),
}


@dataclass(frozen=True)
class TailEvent:
    """``{functional(K^layer) >= threshold}`` (or ``<=``) on a simulated chain.

    ``functional`` is one of ``trace``, ``trace_norm``, ``hs_norm``,
    ``op_norm`` or ``entry``; the last reads the kernel value at grid nodes
    ``entry = (i, j)``. ``layer`` counts from 1 (the deterministic input
    kernel) to ``L + 1``.
    """

    threshold: float
    functional: str = "trace"
    layer: int = 2
    direction: str = ">="
    entry: tuple = (0, 0)

    def __post_init__(self):
        if self.functional not in _FUNCTIONALS and self.functional != "entry":
            raise InvalidArgument(f"unknown functional {self.functional!r}")
        if self.direction not in (">=", "<="):
            raise InvalidArgument("direction must be '>=' or '<='")

    def values(self, syms: np.ndarray, grid: Grid) -> np.ndarray:
        if self.functional == "entry":
            i, j = self.entry
            return syms[..., i, j] / (grid.sqrt_w[i] * grid.sqrt_w[j])
        return _FUNCTIONALS[self.functional](syms)

    def __call__(self, syms: np.ndarray, grid: Grid) -> np.ndarray:
        v = self.values(syms, grid)
        return v >= self.threshold if self.direction == ">=" else v <= self.threshold


@dataclass(frozen=True)
class TailSlope:
    slope: float
    stderr: float
    intercept: float
    table: tuple  # rows: N, reps, hits, prob, neg_log_prob, used

    def rows(self) -> list[dict]:
        return [dict(r) for r in self.table]


def tail_slope(event: TailEvent, cfg: NetworkConfig, grid: Grid, Ns, reps: int, seed=None,
               min_hits: int = 5, block: int = 1024) -> TailSlope:
    """Least-squares slope of ``-log P(event)`` against ``N``.

    ``reps`` chains are simulated per ``N``; an ``N`` with fewer than
    ``min_hits`` occurrences is dropped and at least three must remain.
    """
    seed = as_seed(seed)
    Ns = sorted(int(N) for N in Ns)
    rows = []
    for N in Ns:
        if not 1 <= event.layer <= cfg.L + 1:
            raise InvalidArgument("event layer must lie in 1..L+1")
        if event.layer == 1:
            K1 = init_kernel(grid, cfg.precisions[0], cfg.biases[0], cfg.N0)
            hits = reps * int(event(K1.sym, grid))
        else:
            hits = 0
            for b, start in enumerate(range(0, reps, 64 * block)):
                size = min(64 * block, reps - start)
                syms = simulate_chains(cfg, N, grid, size, seed.child("tail", N, b), block=block)
                hits += int(event(syms[:, event.layer - 2], grid).sum())
        prob = hits / reps
        used = hits >= min_hits
        rows.append({"N": N, "reps": reps, "hits": hits, "prob": prob,
                     "neg_log_prob": -np.log(prob) if hits else np.inf, "used": used})
    usable = [r for r in rows if r["used"]]
    if len(usable) < 3:
        raise InsufficientHits(f"only {len(usable)} values of N reached {min_hits} hits")
    x = np.array([r["N"] for r in usable], dtype=float)
    y = np.array([r["neg_log_prob"] for r in usable])
    if np.all(y == 0):
        return TailSlope(0.0, 0.0, 0.0, tuple(rows))
    fit = stats.linregress(x, y)
    return TailSlope(float(fit.slope), float(fit.stderr), float(fit.intercept), tuple(rows))
