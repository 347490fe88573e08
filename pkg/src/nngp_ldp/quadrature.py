"""Gauss rules for Gaussian expectations of kinked functions.

Plain Gauss-Hermite converges only like O(1/q) when the integrand has a
kink (relu, clipped linear). Splitting the real line at the kinks and using
a Gauss rule for the normal density restricted to each piece restores
spectral convergence. Piece rules are built by the discretized Stieltjes
procedure on a fine Gauss-Legendre discretization of the truncated density.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special

# beyond |u| = TAIL the standard normal mass (~1e-33) is negligible for polynomially bounded integrands
TAIL = 12.0
_DISCRETE = 400


@lru_cache(maxsize=None)
def hermite_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights with ``sum w f(u) ~= E[f(U)]``, ``U ~ N(0, 1)``."""
    x, w = np.polynomial.hermite.hermgauss(q)
    return np.sqrt(2.0) * x, w / np.sqrt(np.pi)


def _stieltjes(x, w, q):
    """Recurrence coefficients of the discrete measure ``sum w delta_x``."""
    alpha = np.empty(q)
    beta = np.empty(q)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    norm_prev = 1.0
    for k in range(q):
        norm = np.dot(w, p * p)
        alpha[k] = np.dot(w, x * p * p) / norm
        beta[k] = norm if k == 0 else norm / norm_prev
        p, p_prev = (x - alpha[k]) * p - (beta[k] if k else 0.0) * p_prev, p
        # rescale to keep the recursion in range; ratios are unaffected
        scale = np.sqrt(norm)
        p, p_prev = p / scale, p_prev / scale
        norm_prev = norm / (scale * scale)
    return alpha, beta


@lru_cache(maxsize=4096)
def truncated_normal_rule(lo: float, hi: float, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for ``E[f(U) 1{lo <= U <= hi}]``, ``U ~ N(0, 1)``.

    Infinite ends are truncated at ``+-TAIL``. Weights sum to the piece mass.
    """
    a, b = max(lo, -TAIL), min(hi, TAIL)
    if b <= a:
        return np.empty(0), np.empty(0)
    t, tw = np.polynomial.legendre.leggauss(_DISCRETE)
    x = a + 0.5 * (b - a) * (t + 1.0)
    w = 0.5 * (b - a) * tw * np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    q = min(q, _DISCRETE // 4)
    alpha, beta = _stieltjes(x, w, q)
    J = np.diag(alpha) + np.diag(np.sqrt(beta[1:]), 1) + np.diag(np.sqrt(beta[1:]), -1)
    nodes, vecs = np.linalg.eigh(J)
    return nodes, beta[0] * vecs[0] ** 2


def split_normal_rule(breaks, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for the standard normal, split at the given breakpoints.

    Falls back to plain Gauss-Hermite when no breakpoint lies inside the
    numerically relevant range.
    """
    inside = sorted({float(t) for t in breaks if -TAIL < t < TAIL})
    if not inside:
        return hermite_rule(q)
    edges = [-np.inf] + inside + [np.inf]
    parts = [truncated_normal_rule(lo, hi, q) for lo, hi in zip(edges[:-1], edges[1:])]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _interval_mass(l, h):
    # Phi(h) - Phi(l) without cancellation in the upper tail
    return np.where(l > 0, special.ndtr(-l) - special.ndtr(-h), special.ndtr(h) - special.ndtr(l))


def piecewise_linear_mean(mu, s, breakpoints, slopes, intercepts):
    """Exact ``E[sigma(mu + s V)]``, ``V ~ N(0, 1)``, for piecewise-linear ``sigma``.

    ``mu`` and ``s`` broadcast; ``s`` must be non-negative. Where ``s == 0``
    the value is ``sigma(mu)``.
    """
    mu, s = np.broadcast_arrays(np.asarray(mu, dtype=float), np.asarray(s, dtype=float))
    slopes = np.asarray(slopes)
    intercepts = np.asarray(intercepts)
    bp = np.asarray(breakpoints, dtype=float)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    edges = np.concatenate([[-np.inf], bp, [np.inf]])
    out = np.zeros(mu.shape)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for j in range(len(slopes)):
            lo = (edges[j] - mu) / safe
            hi = (edges[j + 1] - mu) / safe
            mass = _interval_mass(lo, hi)
            # int_lo^hi v phi(v) dv = phi(lo) - phi(hi)
            first = np.exp(-0.5 * lo * lo) - np.exp(-0.5 * hi * hi)
            first = first / np.sqrt(2.0 * np.pi)
            out += slopes[j] * (mu * mass + safe * first) + intercepts[j] * mass
    if not np.all(pos):
        j = np.searchsorted(bp, mu, side="right")
        out = np.where(pos, out, slopes[j] * mu + intercepts[j])
    return out
