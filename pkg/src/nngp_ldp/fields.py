"""Gaussian random elements on the grid and their rank-one activation operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import ActivationSpec
from .errors import InvalidArgument, NotPSD
from .operators import Grid, OperatorRep, _psd_threshold
from .rng import SeedSpec, as_seed

BLOCK = 1 << 16


@dataclass(frozen=True, eq=False)
class FieldSample:
    """``values[k, i]`` is the k-th field evaluated at grid node ``i``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[1] != self.grid.n:
            raise InvalidArgument("field sample column count must equal the grid size")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]


def field_factor(K: OperatorRep) -> np.ndarray:
    """Matrix ``F`` with ``F @ F.T == K.sym`` (negative round-off eigenvalues dropped)."""
    vals, vecs = K.eig
    if vals.size and vals[-1] < -_psd_threshold(vals, K.tol):
        raise NotPSD(f"cannot sample from an operator with eigenvalue {vals[-1]:.3e}")
    # drop directions at rounding-noise level so degenerate covariances sample exactly on their range
    keep = vals > len(vals) * np.finfo(float).eps * max(float(vals[0]) if vals.size else 0.0, 0.0)
    return vecs[:, keep] * np.sqrt(vals[keep])


def sample_sym(K: OperatorRep, m: int, seed: SeedSpec) -> np.ndarray:
    """Fields in sqrt(w)-coordinates, ``h_sym = F xi``; shape ``(m, n)``.

    Draws are made in blocks of ``BLOCK`` rows, each from its own stream, so
    the first rows do not depend on ``m``.
    """
    F = field_factor(K)
    out = np.empty((m, K.grid.n))
    for b, start in enumerate(range(0, m, BLOCK)):
        stop = min(start + BLOCK, m)
        xi = seed.rng("block", b).standard_normal((stop - start, F.shape[1]))
        out[start:stop] = xi @ F.T
    return out


def sample_field(K: OperatorRep, m: int, seed=None) -> FieldSample:
    """Draw ``m`` independent fields from the centred Gaussian with covariance ``K``."""
    if m < 1:
        raise InvalidArgument("m must be >= 1")
    hs = sample_sym(K, m, as_seed(seed))
    return FieldSample(K.grid, hs / K.grid.sqrt_w)


def empirical_covariance(s: FieldSample) -> OperatorRep:
    hs = s.values * s.grid.sqrt_w
    return OperatorRep(s.grid, hs.T @ hs / s.m)


def activated_sym(h: np.ndarray, act: ActivationSpec, grid: Grid) -> np.ndarray:
    """``sqrt(w) * sigma(h)`` row-wise, the factor of ``C_h = s s^T``."""
    return act(h) * grid.sqrt_w


def cf_operator(h, act: ActivationSpec, grid: Grid) -> OperatorRep:
    """Rank-one operator with kernel ``sigma(h(x)) sigma(h(y))``."""
    h = np.asarray(h, dtype=float).ravel()
    if h.shape != (grid.n,):
        raise InvalidArgument("field must be defined on the grid nodes")
    s = activated_sym(h, act, grid)
    return OperatorRep(grid, np.outer(s, s))
