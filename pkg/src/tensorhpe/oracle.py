"""Derivative oracles, nonsmooth terms and the problem container.

A problem is ``F(x) = f(x) + h(x)`` with ``f`` smooth and convex, queried
through an oracle returning derivatives up to order three, and ``h`` convex
with an exact proximal map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .multilinear import SymTensor3, as_vector, operator_norm_upper

__all__ = [
    "OracleError",
    "DerivativeBundle",
    "NonsmoothTerm",
    "Zero",
    "L1",
    "BoxIndicator",
    "Problem",
    "query",
    "LipschitzReport",
    "validate_lipschitz",
]


class OracleError(ValueError):
    """Raised when a problem cannot answer a derivative query."""


@dataclass(frozen=True)
class DerivativeBundle:
    """Value and derivatives of ``f`` at one point, up to ``order``."""

    value: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray] = None
    third: Optional[SymTensor3] = None
    order: int = 1

    def __post_init__(self):
        if not 1 <= self.order <= 3:
            raise OracleError(f"order must be 1, 2 or 3, got {self.order}")
        if self.order >= 2 and self.hessian is None:
            raise OracleError("order >= 2 bundle is missing the Hessian")
        if self.order >= 3 and self.third is None:
            raise OracleError("order 3 bundle is missing the third derivative")
        if not np.isfinite(self.value) or not np.all(np.isfinite(self.gradient)):
            raise OracleError("non-finite oracle response")
        if self.hessian is not None and not np.all(np.isfinite(self.hessian)):
            raise OracleError("non-finite Hessian")

    def truncate(self, order):
        """Return the same bundle restricted to derivatives up to `order`."""
        if order > self.order:
            raise OracleError(f"bundle has order {self.order}, requested {order}")
        return DerivativeBundle(
            self.value, self.gradient,
            self.hessian if order >= 2 else None,
            self.third if order >= 3 else None,
            order,
        )


# ---------------------------------------------------------------------------
# nonsmooth terms


class NonsmoothTerm:
    """Convex, prox-friendly term ``h``."""

    is_zero = False

    def __call__(self, x):
        raise NotImplementedError

    def prox(self, x, t):
        """Return ``argmin_y h(y) + ||y - x||^2 / (2 t)``."""
        raise NotImplementedError

    def subgradient_distance(self, y, g):
        """Distance from `g` to the subdifferential of ``h`` at `y`."""
        raise NotImplementedError

    def min_norm_subgradient(self, y, base):
        """Return ``s`` in the subdifferential at `y` minimizing ``||base + s||``."""
        raise NotImplementedError


class Zero(NonsmoothTerm):
    is_zero = True

    def __call__(self, x):
        return 0.0

    def prox(self, x, t):
        return np.array(x, dtype=np.float64)

    def subgradient_distance(self, y, g):
        return float(np.linalg.norm(g))

    def min_norm_subgradient(self, y, base):
        return np.zeros_like(base)

    def __repr__(self):
        return "Zero()"


class L1(NonsmoothTerm):
    """``h(x) = weight * ||x||_1``."""

    def __init__(self, weight):
        if weight < 0:
            raise ValueError("L1 weight must be nonnegative")
        self.weight = float(weight)

    def __call__(self, x):
        return self.weight * float(np.abs(x).sum())

    def prox(self, x, t):
        x = np.asarray(x, dtype=np.float64)
        return np.sign(x) * np.maximum(np.abs(x) - t * self.weight, 0.0)

    def subgradient_distance(self, y, g):
        w = self.weight
        d = np.where(y != 0, g - w * np.sign(y), np.maximum(np.abs(g) - w, 0.0))
        return float(np.linalg.norm(d))

    def min_norm_subgradient(self, y, base):
        w = self.weight
        return np.where(y != 0, w * np.sign(y), np.clip(-base, -w, w))

    def __repr__(self):
        return f"L1({self.weight!r})"


class BoxIndicator(NonsmoothTerm):
    """Indicator of the box ``lower <= x <= upper``."""

    def __init__(self, lower, upper):
        self.lower = np.array(lower, dtype=np.float64)
        self.upper = np.array(upper, dtype=np.float64)
        if np.any(self.lower > self.upper):
            raise ValueError("empty box")

    def __call__(self, x):
        x = np.asarray(x)
        inside = np.all(x >= self.lower) and np.all(x <= self.upper)
        return 0.0 if inside else np.inf

    def prox(self, x, t):
        return np.clip(np.asarray(x, dtype=np.float64), self.lower, self.upper)

    def _normal_cone_parts(self, y, g):
        at_lo = y <= self.lower
        at_hi = y >= self.upper
        # normal cone: g_i <= 0 at the lower face, >= 0 at the upper face
        d = np.where(at_lo & at_hi, 0.0,
                     np.where(at_lo, np.maximum(g, 0.0),
                              np.where(at_hi, np.minimum(g, 0.0), g)))
        return d

    def subgradient_distance(self, y, g):
        return float(np.linalg.norm(self._normal_cone_parts(y, g)))

    def min_norm_subgradient(self, y, base):
        at_lo = y <= self.lower
        at_hi = y >= self.upper
        s = np.zeros_like(base)
        s = np.where(at_lo, np.minimum(-base, 0.0), s)
        s = np.where(at_hi, np.maximum(-base, 0.0), s)
        return np.where(at_lo & at_hi, -base, s)

    def __repr__(self):
        return f"BoxIndicator({self.lower.tolist()}, {self.upper.tolist()})"


# ---------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class Problem:
    """Composite problem ``min f(x) + h(x)``.

    Attributes
    ----------
    name : str
        Identifier, including the generating seed for random instances.
    n : int
        Dimension.
    oracle : callable
        ``oracle(x, order) -> DerivativeBundle`` with exact derivatives.
    lipschitz : dict
        ``{d: L_d}``, Lipschitz constant of the ``d``-th derivative, measured
        in the Frobenius norm (so also valid for the operator norm) on the box
        ``[-10, 10]^n``.
    h : NonsmoothTerm
    x0 : ndarray
        Default starting point.
    known_optimum : tuple or None
        ``(x_star, F_star)``.
    max_order : int
    """

    name: str
    n: int
    oracle: Callable[[np.ndarray, int], DerivativeBundle]
    lipschitz: dict
    h: NonsmoothTerm = field(default_factory=Zero)
    x0: Optional[np.ndarray] = None
    known_optimum: Optional[tuple] = None
    max_order: int = 3
    params: dict = field(default_factory=dict)

    def query(self, x, order):
        return query(self, x, order)

    def f(self, x):
        return self.oracle(np.asarray(x, dtype=np.float64), 1).value

    def F(self, x):
        return self.f(x) + self.h(x)

    def gradient(self, x):
        return self.oracle(np.asarray(x, dtype=np.float64), 1).gradient

    def L(self, d):
        try:
            return float(self.lipschitz[d])
        except KeyError:
            raise OracleError(f"problem {self.name!r} has no L_{d}") from None

    @property
    def F_star(self):
        return None if self.known_optimum is None else float(self.known_optimum[1])

    @property
    def x_star(self):
        return None if self.known_optimum is None else self.known_optimum[0]


def query(p, x, order):
    """Return the derivative bundle of ``p.f`` at `x` up to `order`."""
    if not 1 <= order <= p.max_order:
        raise OracleError(f"problem {p.name!r} supports orders 1..{p.max_order}, "
                          f"requested {order}")
    x = as_vector(x, p.n)
    return p.oracle(x, order)


@dataclass
class LipschitzReport:
    order: int
    L: float
    max_ratio: float
    trials: int

    @property
    def ok(self):
        # relative slack absorbs rounding in the difference quotient
        return self.max_ratio <= self.L * (1.0 + 1e-9)


def _derivative(bundle, d):
    if d == 1:
        return bundle.gradient
    if d == 2:
        return bundle.hessian
    return bundle.third


def _frob(a):
    if isinstance(a, SymTensor3):
        return operator_norm_upper(a)
    return float(np.linalg.norm(np.ravel(a)))


def validate_lipschitz(p, trials, d=None, rng=None, radius=10.0):
    """Sample pairs in ``[-radius, radius]^n`` and report the worst ratio
    ``||D^d f(x) - D^d f(y)||_F / ||x - y||`` against the documented ``L_d``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = p.max_order if d is None else d
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    for _ in range(trials):
        x = rng.uniform(-radius, radius, p.n)
        y = rng.uniform(-radius, radius, p.n)
        if rng.random() < 0.5:
            # short segments probe the local constant
            y = x + rng.normal(size=p.n) * 10.0 ** rng.uniform(-3, 0)
            y = np.clip(y, -radius, radius)
        dist = np.linalg.norm(x - y)
        if dist == 0:
            continue
        bx, by = p.oracle(x, d), p.oracle(y, d)
        diff = _derivative(bx, d) - _derivative(by, d) if d < 3 else bx.third + (-1.0) * by.third
        worst = max(worst, _frob(diff) / dist)
    return LipschitzReport(d, p.L(d), worst, trials)
