"""Regularized Taylor models of order ``d <= 3``.

``f_x(y) = f(x) + sum_k D^k f(x)[y - x]^k / k! + M / (d+1)! ||y - x||^(d+1)``
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .multilinear import contract3_to_matrix, contract3_vector, contract3_full
from .oracle import DerivativeBundle

__all__ = ["TaylorModel", "build_model", "model_value", "model_gradient",
           "model_hessian", "gap_bound_check"]


@dataclass(frozen=True)
class TaylorModel:
    """Taylor model anchored at `anchor` with regularization weight `M`."""

    anchor: np.ndarray
    bundle: DerivativeBundle
    M: float
    d: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"model order must be 1, 2 or 3, got {self.d}")
        if self.bundle.order < self.d:
            raise ValueError(f"bundle of order {self.bundle.order} cannot back "
                             f"an order-{self.d} model")
        if self.M < 0:
            raise ValueError("M must be nonnegative")

    @property
    def n(self):
        return self.anchor.shape[0]

    def value(self, y):
        return model_value(self, y)

    def gradient(self, y):
        return model_gradient(self, y)

    def hessian(self, y):
        return model_hessian(self, y)


def build_model(problem, x, d, M):
    """Query `problem` once at `x` and wrap the bundle in an order-`d` model."""
    x = np.asarray(x, dtype=np.float64)
    return TaylorModel(x, problem.query(x, d), float(M), d)


def _step(m, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != m.anchor.shape:
        raise ValueError(f"dimension mismatch: model has n={m.n}, point has shape {y.shape}")
    return y - m.anchor


def model_value(m, y):
    z = _step(m, y)
    b = m.bundle
    val = b.value + b.gradient @ z
    if m.d >= 2:
        val += 0.5 * z @ b.hessian @ z
    if m.d >= 3:
        val += contract3_full(b.third, z, z, z) / 6.0
    r = np.linalg.norm(z)
    return float(val + m.M / factorial(m.d + 1) * r ** (m.d + 1))


def model_gradient(m, y):
    z = _step(m, y)
    b = m.bundle
    g = b.gradient.copy()
    if m.d >= 2:
        g += b.hessian @ z
    if m.d >= 3:
        g += 0.5 * contract3_vector(b.third, z)
    r = np.linalg.norm(z)
    return g + (m.M / factorial(m.d)) * r ** (m.d - 1) * z


def model_hessian(m, y):
    z = _step(m, y)
    b = m.bundle
    n = m.n
    H = np.zeros((n, n)) if m.d < 2 else np.array(b.hessian, dtype=np.float64)
    if m.d >= 3:
        H = H + contract3_to_matrix(b.third, z)
    r = np.linalg.norm(z)
    c = m.M / factorial(m.d)
    # Hessian of c * r^(d-1) z
    if m.d == 1:
        return H + c * np.eye(n)
    reg = r ** (m.d - 1) * np.eye(n)
    if r > 0:
        reg += (m.d - 1) * r ** (m.d - 3) * np.outer(z, z)
    return H + c * reg


def gap_bound_check(problem, m, y):
    """Return ``(||grad f(y) - grad f_x(y)||, (L_d + M) / d! ||y - x||^d)``."""
    y = np.asarray(y, dtype=np.float64)
    lhs = float(np.linalg.norm(problem.gradient(y) - model_gradient(m, y)))
    rhs = (problem.L(m.d) + m.M) / factorial(m.d) * float(np.linalg.norm(y - m.anchor)) ** m.d
    return lhs, rhs
