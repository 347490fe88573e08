"""Grid discretization of the input set and symmetric trace-class operators on it.

A kernel ``k`` sampled on quadrature nodes ``x_i`` with weights ``w_i`` is
represented by the similarity-symmetrized matrix

    S = diag(sqrt(w)) @ k @ diag(sqrt(w)),

whose eigenvalues approximate those of the integral operator on L^2 of the
input set. Traces, Hilbert-Schmidt and operator norms, square roots and
projections are then plain symmetric-matrix computations on ``S``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidKernel, NotPSD


@dataclass(frozen=True)
class Tolerances:
    psd_tol: float = 1e-10
    sym_tol: float = 1e-12
    eig_clip: float = 0.0

    def __post_init__(self):
        if min(self.psd_tol, self.sym_tol, self.eig_clip) < 0:
            raise InvalidArgument("tolerances must be non-negative")


DEFAULT_TOL = Tolerances()


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Quadrature nodes and weights for a compact input set.

    ``nodes`` has shape ``(n, dim_input)``. ``axes`` holds the per-axis 1-D
    nodes when the grid is a tensor product (used for kernel interpolation).
    """

    nodes: np.ndarray
    weights: np.ndarray
    axes: tuple | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.ndim != 2 or len(nodes) != len(weights) or len(weights) < 1:
            raise InvalidArgument("nodes and weights must have matching length >= 1")
        if not np.all(weights > 0):
            raise InvalidArgument("quadrature weights must be strictly positive")
        if len(np.unique(nodes, axis=0)) != len(nodes):
            raise InvalidArgument("grid nodes must be pairwise distinct")
        object.__setattr__(self, "nodes", _frozen(nodes))
        object.__setattr__(self, "weights", _frozen(weights))
        if self.axes is not None:
            object.__setattr__(self, "axes", tuple(_frozen(a) for a in self.axes))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def dim_input(self) -> int:
        return self.nodes.shape[1]

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    @cached_property
    def sqrt_w(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def same_as(self, other: "Grid") -> bool:
        return self is other or (
            self.nodes.shape == other.nodes.shape
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def locate(self, points, atol=1e-12) -> np.ndarray:
        """Indices of ``points`` among the grid nodes; -1 where absent."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim_input:
            pts = pts.reshape(-1, self.dim_input)
        d = np.abs(pts[:, None, :] - self.nodes[None, :, :]).max(axis=2)
        idx = d.argmin(axis=1)
        return np.where(d[np.arange(len(pts)), idx] <= atol, idx, -1)


def _rule_1d(lo, hi, n, rule):
    if rule == "gauss_legendre":
        x, w = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (hi - lo)
        return lo + half * (x + 1.0), half * w
    if rule == "trapezoid":
        if n < 2:
            raise InvalidArgument("trapezoid rule needs n >= 2")
        x = np.linspace(lo, hi, n)
        w = np.full(n, (hi - lo) / (n - 1))
        w[[0, -1]] *= 0.5
        return x, w
    raise InvalidArgument(f"unknown quadrature rule {rule!r}")


def make_grid(domain, n, rule: str = "gauss_legendre") -> Grid:
    """Tensor-product quadrature grid on an interval or a box.

    Parameters
    ----------
    domain : (lo, hi) or sequence of (lo, hi)
        One pair per input dimension.
    n : int or sequence of int
        Nodes per axis.
    rule : {"gauss_legendre", "trapezoid"}
    """
    box = np.atleast_2d(np.asarray(domain, dtype=float))
    if box.shape[1] != 2:
        raise InvalidArgument("domain must be (lo, hi) pairs")
    ns = np.broadcast_to(np.asarray(n), (len(box),))
    if np.any(ns < 1) or not np.all(np.equal(np.mod(ns, 1), 0)):
        raise InvalidArgument("n must be a positive integer")
    if np.any(box[:, 1] <= box[:, 0]):
        raise InvalidArgument("degenerate box: every axis needs hi > lo")
    axes, axw = zip(*(_rule_1d(lo, hi, int(k), rule) for (lo, hi), k in zip(box, ns)))
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*axw, indexing="ij")
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    return Grid(nodes, weights, axes=axes)


@dataclass(frozen=True, eq=False)
class KernelGrid:
    """Kernel values ``values[i, j] = k(x_i, x_j)`` on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n, self.grid.n):
            raise InvalidKernel(f"kernel shape {v.shape} does not match grid size {self.grid.n}")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "KernelGrid":
        """Evaluate ``fn(x, y)`` (broadcasting over node arrays) on the grid."""
        x = grid.nodes[:, None, :]
        y = grid.nodes[None, :, :]
        return cls(grid, np.broadcast_to(fn(x, y), (grid.n, grid.n)))


@dataclass(frozen=True, eq=False)
class OperatorRep:
    """Symmetrized matrix representation of a kernel operator on ``grid``."""

    grid: Grid
    sym: np.ndarray
    tol: Tolerances = field(default=DEFAULT_TOL)

    def __post_init__(self):
        s = np.asarray(self.sym, dtype=float)
        if s.shape != (self.grid.n, self.grid.n):
            raise InvalidArgument(f"matrix shape {s.shape} does not match grid size {self.grid.n}")
        object.__setattr__(self, "sym", _frozen(0.5 * (s + s.T)))

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues in descending order and matching orthonormal eigenvectors."""
        vals, vecs = np.linalg.eigh(self.sym)
        return vals[::-1], vecs[:, ::-1]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig[0]

    @cached_property
    def nonneg(self) -> bool:
        return bool(self.eigenvalues[-1] >= -_psd_threshold(self.eigenvalues, self.tol))

    @property
    def kernel(self) -> np.ndarray:
        """Kernel values on the grid nodes."""
        sw = self.grid.sqrt_w
        return self.sym / np.outer(sw, sw)

    def kernel_grid(self) -> KernelGrid:
        return KernelGrid(self.grid, self.kernel)

    def _check(self, other):
        if not self.grid.same_as(other.grid):
            raise InvalidArgument("operators live on different grids")

    def __add__(self, other):
        self._check(other)
        return OperatorRep(self.grid, self.sym + other.sym, self.tol)

    def __sub__(self, other):
        self._check(other)
        return OperatorRep(self.grid, self.sym - other.sym, self.tol)

    def __mul__(self, c):
        return OperatorRep(self.grid, float(c) * self.sym, self.tol)

    __rmul__ = __mul__

    def __matmul__(self, other):
        self._check(other)
        return OperatorRep(self.grid, self.sym @ other.sym, self.tol)


def _psd_threshold(vals, tol):
    # psd_tol is absolute for O(1) operators and scales with the spectrum above that
    return tol.psd_tol * max(1.0, float(np.abs(vals).max(initial=0.0)))


def kernel_to_operator(k: KernelGrid, tol: Tolerances = DEFAULT_TOL) -> OperatorRep:
    """Map a kernel on the grid to its symmetrized operator representation.

    Raises ``InvalidKernel`` when the values are not symmetric to within
    ``tol.sym_tol`` (relative to the largest entry).
    """
    v = k.values
    scale = max(1.0, float(np.abs(v).max(initial=0.0)))
    if np.abs(v - v.T).max(initial=0.0) > tol.sym_tol * scale:
        raise InvalidKernel("kernel values are not symmetric")
    sw = k.grid.sqrt_w
    return OperatorRep(k.grid, sw[:, None] * v * sw[None, :], tol)


def operator_from_function(grid: Grid, fn: Callable, tol: Tolerances = DEFAULT_TOL) -> OperatorRep:
    return kernel_to_operator(KernelGrid.from_function(grid, fn), tol)


def zero_operator(grid: Grid, tol: Tolerances = DEFAULT_TOL) -> OperatorRep:
    return OperatorRep(grid, np.zeros((grid.n, grid.n)), tol)


def constant_operator(grid: Grid, c: float, tol: Tolerances = DEFAULT_TOL) -> OperatorRep:
    """Operator of the constant kernel ``k = c`` (the bias translation)."""
    sw = grid.sqrt_w
    return OperatorRep(grid, c * np.outer(sw, sw), tol)


def trace(K: OperatorRep) -> float:
    return float(np.trace(K.sym))


def trace_norm(K: OperatorRep) -> float:
    return float(np.abs(K.eigenvalues).sum())


def hs_norm(K: OperatorRep) -> float:
    # from the cached spectrum so that op_norm <= hs_norm <= trace_norm holds bit-exactly;
    # scaled by the largest eigenvalue to avoid underflow in the squares
    a = np.abs(K.eigenvalues)
    m = float(a.max(initial=0.0))
    if m == 0.0:
        return 0.0
    return m * float(np.sqrt(np.square(a / m).sum()))


def op_norm(K: OperatorRep) -> float:
    return float(np.abs(K.eigenvalues).max(initial=0.0))


def _clipped_spectrum(K: OperatorRep, tol: Tolerances):
    vals, vecs = K.eig
    if vals.size and vals[-1] < -_psd_threshold(vals, tol):
        raise NotPSD(f"smallest eigenvalue {vals[-1]:.3e} is below -psd_tol")
    # eigenvalues at the rounding-noise level would contribute sqrt(eps) after the square root
    noise = len(vals) * np.finfo(float).eps * float(np.abs(vals).max(initial=0.0))
    vals = np.where(np.abs(vals) <= noise, 0.0, vals)
    return np.where(vals < 0, tol.eig_clip, vals), vecs


def sqrt_op(K: OperatorRep, tol: Tolerances | None = None) -> OperatorRep:
    """Unique non-negative square root of a non-negative operator."""
    tol = tol or K.tol
    vals, vecs = _clipped_spectrum(K, tol)
    return OperatorRep(K.grid, (vecs * np.sqrt(vals)) @ vecs.T, tol)


def psd_project(M, grid: Grid | None = None, tol: Tolerances = DEFAULT_TOL) -> OperatorRep:
    """Nearest (in Hilbert-Schmidt norm) non-negative operator.

    ``M`` is either an ``OperatorRep`` or a symmetric matrix on ``grid``.
    Negative eigenvalues are replaced by ``tol.eig_clip``; inputs that are
    already non-negative come back unchanged.
    """
    if isinstance(M, OperatorRep):
        grid, sym = M.grid, M.sym
    else:
        if grid is None:
            raise InvalidArgument("psd_project on a raw matrix needs a grid")
        sym = np.asarray(M, dtype=float)
    op = OperatorRep(grid, sym, tol)
    vals, vecs = op.eig
    if vals.size == 0 or vals[-1] >= 0:
        return op
    vals = np.where(vals < 0, tol.eig_clip, vals)
    return OperatorRep(grid, (vecs * vals) @ vecs.T, tol)


class PSGap(NamedTuple):
    lhs: float
    rhs: float


def powers_stormer_gap(K: OperatorRep, K2: OperatorRep) -> PSGap:
    """Both sides of ``||sqrt K - sqrt K2||_2^2 <= ||K - K2||_1``."""
    d = sqrt_op(K) - sqrt_op(K2)
    return PSGap(hs_norm(d) ** 2, trace_norm(K - K2))


def powers_stormer_variant(K: OperatorRep, K2: OperatorRep) -> PSGap:
    """Both sides of the trace-gap variant of the Powers-Stormer bound.

    ``||sqrt K - sqrt K2||_2 <= |tr K - tr K2|^(1/2)
    + sqrt(2) ||K - K2||_2^(1/4) min(tr sqrt K, tr sqrt K2)^(1/2)``
    """
    rk, rk2 = sqrt_op(K), sqrt_op(K2)
    lhs = hs_norm(rk - rk2)
    rhs = abs(trace(K) - trace(K2)) ** 0.5 + np.sqrt(2.0) * hs_norm(K - K2) ** 0.25 * min(
        trace(rk), trace(rk2)
    ) ** 0.5
    return PSGap(lhs, float(rhs))


class EquivMetrics(NamedTuple):
    d_sqrt_hs: float
    d_tr: float
    d_hs: float
    d_trace_gap: float


def equiv_metrics(Kn: OperatorRep, K: OperatorRep) -> EquivMetrics:
    """Four distances that vanish together for non-negative operators."""
    diff = Kn - K
    return EquivMetrics(
        hs_norm(sqrt_op(Kn) - sqrt_op(K)),
        trace_norm(diff),
        hs_norm(diff),
        abs(trace(Kn) - trace(K)),
    )


def stack_sym(ops: Sequence[OperatorRep]) -> np.ndarray:
    return np.stack([op.sym for op in ops])
