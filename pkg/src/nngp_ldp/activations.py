"""Activation functions with their declared growth and Lipschitz constants.

Growth is declared as ``sigma(x)^2 <= A (1 + |x|^r)``. Linear-growth
activations (identity, relu) sit at the boundary ``r = 2``; the
rate-function routines refuse them. Piecewise-linear activations carry their
breakpoints so that Gaussian expectations can be split exactly at the kinks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import InvalidArgument


@dataclass(frozen=True, eq=False)
class ActivationSpec:
    kind: str
    growth_exponent: float
    growth_const: float
    lipschitz: float | None = None
    # piecewise-linear description: len(slopes) == len(breakpoints) + 1
    breakpoints: tuple = ()
    slopes: tuple = ()
    intercepts: tuple = ()
    fn: Callable | None = field(default=None, repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.growth_exponent <= 2:
            raise InvalidArgument("growth exponent r must lie in (0, 2]")
        if self.growth_const <= 0:
            raise InvalidArgument("growth constant A must be positive")
        if self.fn is None and len(self.slopes) != len(self.breakpoints) + 1:
            raise InvalidArgument("piecewise-linear activation needs len(slopes) == len(breakpoints) + 1")

    @property
    def piecewise_linear(self) -> bool:
        return self.fn is None

    @property
    def boundary(self) -> bool:
        """True for linear growth (r = 2), outside the large-deviation hypotheses."""
        return self.growth_exponent >= 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.fn is not None:
            return self.fn(x)
        j = np.searchsorted(np.asarray(self.breakpoints), x, side="right")
        return np.asarray(self.slopes)[j] * x + np.asarray(self.intercepts)[j]

    def growth_bound(self, x):
        return self.growth_const * (1.0 + np.abs(x) ** self.growth_exponent)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def identity() -> ActivationSpec:
    return ActivationSpec("identity", 2.0, 1.0, 1.0, slopes=(1.0,), intercepts=(0.0,))


def relu() -> ActivationSpec:
    return ActivationSpec("relu", 2.0, 1.0, 1.0, breakpoints=(0.0,), slopes=(0.0, 1.0), intercepts=(0.0, 0.0))


def tanh() -> ActivationSpec:
    return ActivationSpec("tanh", 1.0, 1.0, 1.0, fn=np.tanh)


def erf() -> ActivationSpec:
    return ActivationSpec("erf", 1.0, 1.0, 2.0 / np.sqrt(np.pi), fn=special.erf)


def clipped_linear(c: float = 20.0) -> ActivationSpec:
    """Identity on ``[-c, c]``, constant outside.

    Bounded, hence admissible for the rate function with any r < 2, while
    agreeing with the identity everywhere a standard Gaussian lands with
    probability above ``2 * Phi(-c)``.
    """
    if c <= 0:
        raise InvalidArgument("clip level must be positive")
    c = float(c)
    return ActivationSpec(
        "clipped_linear", 1.0, c * c, 1.0,
        breakpoints=(-c, c), slopes=(0.0, 1.0, 0.0), intercepts=(-c, 0.0, c),
        params={"c": c},
    )


def from_table(x, y, r: float, A: float, lipschitz: float | None = None) -> ActivationSpec:
    """Monotone piecewise-linear activation through ``(x[k], y[k])``, flat outside.

    The declared ``(A, r)`` are sanity-checked on the table nodes only.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
        raise InvalidArgument("table needs matching 1-D x and y with at least two points")
    if np.any(np.diff(x) <= 0):
        raise InvalidArgument("table x must be strictly increasing")
    dy = np.diff(y)
    if not (np.all(dy >= 0) or np.all(dy <= 0)):
        raise InvalidArgument("table activation must be monotone")
    if np.any(y**2 > A * (1 + np.abs(x) ** r) * (1 + 1e-12)):
        raise InvalidArgument("declared growth bound (A, r) violated on the table")
    inner = dy / np.diff(x)
    if lipschitz is not None and np.any(np.abs(inner) > lipschitz * (1 + 1e-12)):
        raise InvalidArgument("declared Lipschitz constant violated on the table")
    slopes = np.concatenate([[0.0], inner, [0.0]])
    intercepts = np.concatenate([[y[0]], y[:-1] - inner * x[:-1], [y[-1]]])
    return ActivationSpec(
        "custom", float(r), float(A), lipschitz,
        breakpoints=tuple(x), slopes=tuple(slopes), intercepts=tuple(intercepts),
        params={"x": x.tolist(), "y": y.tolist(), "r": float(r), "A": float(A), "lipschitz": lipschitz},
    )


_BUILTIN = {"identity": identity, "relu": relu, "tanh": tanh, "erf": erf, "clipped_linear": clipped_linear}


def get_activation(spec) -> ActivationSpec:
    """Build an activation from a name or a ``{"kind": ..., **params}`` dict."""
    if isinstance(spec, ActivationSpec):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "custom":
        return from_table(spec["x"], spec["y"], spec["r"], spec["A"], spec.get("lipschitz"))
    if kind not in _BUILTIN:
        raise InvalidArgument(f"unknown activation {kind!r}")
    return _BUILTIN[kind](**spec)
