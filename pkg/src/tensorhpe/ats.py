"""Approximate solvers for the regularized tensor proximal subproblem

    min_y  f_x(y) + h(y) + ||y - x||^2 / (2 lam)

Every solver returns ``(y, u, eps)`` with ``u`` in ``grad f_x(y) + d_eps h(y)``
and reports how well the inexactness test

    ||lam u + y - x||^2 + 2 lam eps <= sigma_hat^2 ||y - x||^2

is met. Inner loops stop on that test, not on an iteration count.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .taylor import model_gradient, model_value

__all__ = [
    "AtsConfig",
    "AtsError",
    "ApproxSolution",
    "certify",
    "certificate_ratio",
    "solve",
    "solve_d1",
    "solve_d2",
    "solve_d3",
    "solve_tau",
    "solve_generic",
    "exact_prox_point",
    "psi_residual",
    "bregman_reference",
]


@dataclass(frozen=True)
class AtsConfig:
    """Inner solver settings.

    ``kappa`` fixes the d = 3 regularization ``M = 3 kappa^2 L_3``. With
    ``enforce_certificate=False`` the solvers return uncertified iterates
    instead of raising (used by the baselines and for fault injection).
    """

    sigma_hat: float = 0.1
    max_inner: int = 10_000
    kappa: float = 1.2
    tau_tol: float = 1e-13
    enforce_certificate: bool = True

    def __post_init__(self):
        if not 0 <= self.sigma_hat < 1:
            raise ValueError("sigma_hat must lie in [0, 1)")
        if self.kappa <= 1:
            raise ValueError("kappa must be > 1")
        if self.max_inner < 0:
            raise ValueError("max_inner must be >= 0")


@dataclass
class ApproxSolution:
    y: np.ndarray
    u: np.ndarray
    eps: float
    residual_ratio: float
    inner_iterations: int
    certified: bool = True
    history: list = field(default_factory=list)


class AtsError(RuntimeError):
    """The inner solver stopped without meeting the inexactness test."""

    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


def certificate_ratio(y, u, eps, lam, x):
    """``sqrt(||lam u + y - x||^2 + 2 lam eps) / ||y - x||`` (0/0 is 0)."""
    y, u, x = (np.asarray(a, dtype=np.float64) for a in (y, u, x))
    lhs = float(np.sum((lam * u + y - x) ** 2)) + 2.0 * lam * eps
    step = float(np.linalg.norm(y - x))
    if step == 0.0:
        return 0.0 if lhs == 0.0 else np.inf
    return float(np.sqrt(lhs)) / step


def certify(y, u, eps, lam, x, sigma_hat):
    """Exact check of ``||lam u + y - x||^2 + 2 lam eps <= sigma_hat^2 ||y - x||^2``."""
    if eps < 0 or lam <= 0:
        raise ValueError("need eps >= 0 and lam > 0")
    y, u, x = (np.asarray(a, dtype=np.float64) for a in (y, u, x))
    lhs = float(np.sum((lam * u + y - x) ** 2)) + 2.0 * lam * eps
    return lhs <= sigma_hat ** 2 * float(np.sum((y - x) ** 2))


def _check_anchor(m, x):
    if x is not None and not np.array_equal(np.asarray(x, dtype=np.float64), m.anchor):
        raise ValueError("x must be the model anchor")
    return m.anchor


def _finish(m, lam, y, u, eps, iters, cfg, history=None, solver=""):
    x = m.anchor
    ratio = certificate_ratio(y, u, eps, lam, x)
    ok = certify(y, u, eps, lam, x, cfg.sigma_hat)
    sol = ApproxSolution(y, u, eps, ratio, iters, ok, history or [])
    if not ok and cfg.enforce_certificate:
        raise AtsError(f"{solver}: inexactness test failed (ratio {ratio:.3e} > "
                       f"{cfg.sigma_hat})", sol)
    return sol


# ---------------------------------------------------------------------------
# d = 1


def solve_d1(m, h, lam, x=None, cfg=AtsConfig()):
    """Exact minimizer for the first-order model.

    The smooth part ``g^T z + (M + 1/lam) ||z||^2 / 2`` is isotropic, so the
    solution is a single prox step with ``t = 1 / (M + 1/lam)`` and
    ``lam u + y - x = 0`` up to rounding.
    """
    if m.d != 1:
        raise ValueError("solve_d1 needs an order-1 model")
    x = _check_anchor(m, x)
    g = m.bundle.gradient
    t = 1.0 / (m.M + 1.0 / lam)
    w = x - t * g
    y = h.prox(w, t)
    u = model_gradient(m, y) + (w - y) / t
    return _finish(m, lam, y, u, 0.0, 0, cfg, solver="solve_d1")


# ---------------------------------------------------------------------------
# d = 2


def _secular_solve(g, evals, evecs, M, lam):
    """Solve ``z = -(H + (M r / 2 + 1/lam) I)^-1 g`` with ``||z|| = r``."""
    b = evecs.T @ g
    shift = evals + 1.0 / lam

    def znorm(r):
        return float(np.sqrt(np.sum((b / (shift + 0.5 * M * r)) ** 2)))

    if M == 0.0:
        return -evecs @ (b / shift)
    r_lo = 0.0
    if shift.min() <= 0:
        r_lo = -2.0 * shift.min() / M * (1 + 1e-12) + 1e-300
    gnorm = float(np.linalg.norm(g))
    r_hi = max(r_lo, min(lam * gnorm, np.sqrt(2.0 * gnorm / M)))
    if r_hi <= r_lo:
        r_hi = r_lo + 1.0
    while znorm(r_hi) > r_hi:
        r_hi = r_lo + 2.0 * (r_hi - r_lo)
    phi = lambda r: znorm(r) - r
    if phi(r_lo) <= 0:
        r = r_lo
    else:
        r = brentq(phi, r_lo, r_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                   maxiter=500)
    return -evecs @ (b / (shift + 0.5 * M * r))


def solve_d2(m, h, lam, x=None, cfg=AtsConfig(), residual_tol=None):
    """Cubic-regularized quadratic step.

    For ``h = 0`` the minimizer is found from the radial (secular) equation
    after one eigendecomposition of the Hessian; composite terms fall back to
    :func:`solve_generic`.
    """
    if m.d != 2:
        raise ValueError("solve_d2 needs an order-2 model")
    x = _check_anchor(m, x)
    if not h.is_zero:
        return solve_generic(m, h, lam, x, cfg, residual_tol)
    g = m.bundle.gradient
    if not np.any(g):
        return _finish(m, lam, x.copy(), np.zeros_like(x), 0.0, 0, cfg, solver="solve_d2")
    evals, evecs = np.linalg.eigh(m.bundle.hessian)
    z = _secular_solve(g, evals, evecs, m.M, lam)
    y = x + z
    return _finish(m, lam, y, model_gradient(m, y), 0.0, 1, cfg, solver="solve_d2")


# ---------------------------------------------------------------------------
# d = 3


def solve_tau(A, a, gamma, tol=1e-13, eig=None):
    """Minimize ``gamma tau^2 + a^T (gamma tau I + A)^-1 a / 2`` over ``tau > 0``.

    Returns ``(tau, z)`` with ``z = -(gamma tau I + A)^-1 a``. This `z` is the
    minimizer of ``a^T z + z^T A z / 2 + (gamma / 16) ||z||^4`` and satisfies
    ``||z||^2 = 4 tau``.

    Parameters
    ----------
    A : (n, n) array
        Symmetric positive semidefinite matrix.
    a : (n,) array
    gamma : float
        Positive weight.
    tol : float
        Relative tolerance on `tau`.
    eig : tuple, optional
        Precomputed ``(evals, evecs)`` of `A`, reused across calls.
    """
    a = np.asarray(a, dtype=np.float64)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if eig is None:
        eig = np.linalg.eigh(np.asarray(A, dtype=np.float64))
    evals, evecs = eig
    scale = max(1.0, float(np.max(np.abs(evals))))
    if evals.min() < -1e-10 * scale:
        raise ValueError(f"A is not positive semidefinite (min eigenvalue {evals.min():.3e})")
    evals = np.maximum(evals, 0.0)
    if not np.any(a):
        return 0.0, np.zeros_like(a)
    b2 = (evecs.T @ a) ** 2

    # stationarity psi(tau) = 4 tau - sum b^2 / (gamma tau + w)^2, increasing and concave
    def psi(t):
        return 4.0 * t - float(np.sum(b2 / (gamma * t + evals) ** 2))

    def dpsi(t):
        return 4.0 + 2.0 * gamma * float(np.sum(b2 / (gamma * t + evals) ** 3))

    lo, hi = 0.0, (float(b2.sum()) / (4.0 * gamma ** 2)) ** (1.0 / 3.0)
    t = hi
    for _ in range(500):
        val = psi(t)
        if val == 0.0:
            break
        if val > 0:
            hi = t
        else:
            lo = t
        t_new = t - val / dpsi(t)
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= tol * t_new or hi - lo <= tol * hi:
            t = t_new
            break
        t = t_new
    z = -evecs @ ((evecs.T @ a) / (gamma * t + evals))
    return float(t), z


def _omega(m, lam, z):
    x = m.anchor
    return model_value(m, x + z) - m.bundle.value + float(z @ z) / (2.0 * lam)


def _omega_grad(m, lam, z):
    return model_gradient(m, m.anchor + z) + z / lam


def _bregman(m, lam, cfg, stop_ratio, max_inner, residual_tol=None):
    """Bregman gradient iterations on Omega relative to the scaling function rho.

    ``rho(z) = z^T P z / 2 + (gamma0 / 4) ||z||^4`` with
    ``P = (1 - 1/kappa) H + (kappa - 1) / ((kappa + 1) lam) I`` and
    ``gamma0 = (M - 3 kappa L_3) / 6``, where ``L_3 = M / (3 kappa^2)``.
    Omega is 1-strongly convex and ``(kappa+1)/(kappa-1)``-smooth relative to rho.
    """
    kappa = cfg.kappa
    M = m.M
    L3 = M / (3.0 * kappa ** 2)
    gamma0 = (M - 3.0 * kappa * L3) / 6.0
    L_rel = (kappa + 1.0) / (kappa - 1.0)
    H = m.bundle.hessian
    evals, evecs = np.linalg.eigh(H)
    p_evals = (1.0 - 1.0 / kappa) * evals + (kappa - 1.0) / ((kappa + 1.0) * lam)
    A_evals = L_rel * np.maximum(p_evals, 0.0)
    gamma_tau = 4.0 * L_rel * gamma0   # solve_tau weight for a (L_rel gamma0 / 4) quartic

    def grad_rho(z):
        return evecs @ (p_evals * (evecs.T @ z)) + gamma0 * float(z @ z) * z

    z = np.zeros_like(m.anchor)
    history = [_omega(m, lam, z)]
    it = 0
    g = _omega_grad(m, lam, z)
    while True:
        zn = float(np.linalg.norm(z))
        gn = float(np.linalg.norm(g))
        if gn == 0.0 or (zn > 0 and lam * gn <= stop_ratio * zn):
            break
        if residual_tol is not None and gn <= residual_tol:
            break
        if it >= max_inner:
            break
        a = g - L_rel * grad_rho(z)
        if gamma_tau > 0:
            _, z = solve_tau(None, a, gamma_tau, cfg.tau_tol, eig=(A_evals, evecs))
        else:
            z = -evecs @ ((evecs.T @ a) / A_evals)
        it += 1
        history.append(_omega(m, lam, z))
        g = _omega_grad(m, lam, z)
    return z, it, history


def solve_d3(m, h, lam, x=None, cfg=AtsConfig(), residual_tol=None):
    """Quartic-regularized cubic step for ``h = 0`` by Bregman gradient steps.

    Each step minimizes a quadratic plus a multiple of ``||z||^4`` through
    :func:`solve_tau`, with one eigendecomposition of the Hessian reused for
    all steps. Composite terms fall back to :func:`solve_generic`.
    """
    if m.d != 3:
        raise ValueError("solve_d3 needs an order-3 model")
    x = _check_anchor(m, x)
    if not h.is_zero:
        return solve_generic(m, h, lam, x, cfg, residual_tol)
    if not np.any(m.bundle.gradient):
        return _finish(m, lam, x.copy(), np.zeros_like(x), 0.0, 0, cfg, solver="solve_d3")
    # stop a little inside the tolerance so the recomputed test passes
    z, it, history = _bregman(m, lam, cfg, 0.9 * cfg.sigma_hat, cfg.max_inner, residual_tol)
    y = x + z
    return _finish(m, lam, y, model_gradient(m, y), 0.0, it, cfg, history, "solve_d3")


def bregman_reference(m, lam, cfg=AtsConfig(), stop_ratio=1e-12, max_inner=100_000):
    """High-accuracy minimizer of Omega and its objective trace (diagnostics)."""
    return _bregman(m, lam, cfg, stop_ratio, max_inner)


# ---------------------------------------------------------------------------
# generic composite solver


def solve_generic(m, h, lam, x=None, cfg=AtsConfig(), residual_tol=None):
    """Accelerated proximal gradient on the subproblem, any ``d <= 3``.

    At each trial point ``w`` with step ``t`` the prox step
    ``y = prox_{t h}(w - t grad s(w))`` gives ``g_h = (w - y)/t - grad s(w)``
    in the subdifferential of ``h`` at ``y``; the candidate is
    ``(y, grad f_x(y) + g_h, 0)``. Stops at the first certified candidate or,
    when `residual_tol` is given, once ``||grad s(y) + g_h|| <= residual_tol``.
    """
    x = _check_anchor(m, x)

    def grad_s(y):
        return model_gradient(m, y) + (y - x) / lam

    def s(y):
        return model_value(m, y) + float((y - x) @ (y - x)) / (2.0 * lam)

    g0 = model_gradient(m, x)
    u0 = g0 + h.min_norm_subgradient(x, g0)
    if np.isfinite(h(x)) and not np.any(u0):
        return _finish(m, lam, x.copy(), u0, 0.0, 0, cfg, solver="solve_generic")

    t = lam
    if m.d >= 2:
        t = min(t, 1.0 / max(np.linalg.norm(m.bundle.hessian, 2), 1e-300))
    y_prev = x.copy()
    w = x.copy()
    theta = 1.0
    F_prev = s(x) + h(x)
    best = None
    it = 0
    while it < cfg.max_inner:
        it += 1
        gw = grad_s(w)
        sw = s(w)
        while True:
            y = h.prox(w - t * gw, t)
            d = y - w
            if s(y) <= sw + gw @ d + (d @ d) / (2.0 * t) * (1 + 1e-12) + 1e-15 * abs(sw):
                break
            t *= 0.5
        g_h = (w - y) / t - gw
        u = model_gradient(m, y) + g_h
        resid = grad_s(y) + g_h
        best = (y, u)
        if residual_tol is not None and np.linalg.norm(resid) <= residual_tol:
            break
        if np.any(y != x) and certify(y, u, 0.0, lam, x, cfg.sigma_hat):
            break
        F_y = s(y) + h(y)
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        if F_y > F_prev:
            theta_new, theta = 1.0, 1.0   # adaptive restart
        w = y + ((theta - 1.0) / theta_new) * (y - y_prev)
        y_prev, theta, F_prev = y, theta_new, min(F_y, F_prev)
        t *= 1.25
    y, u = best
    return _finish(m, lam, y, u, 0.0, it, cfg, solver="solve_generic")


# ---------------------------------------------------------------------------
# dispatch and diagnostics


def solve(m, h, lam, cfg=AtsConfig(), residual_tol=None):
    """Pick the solver for the model order and nonsmooth term.

    `residual_tol`, if given, lets the iterative solvers also stop once the
    subproblem optimality residual drops below it (exact solvers ignore it).
    """
    if m.d == 1:
        return solve_d1(m, h, lam, None, cfg)
    if m.d == 2:
        return solve_d2(m, h, lam, None, cfg, residual_tol)
    return solve_d3(m, h, lam, None, cfg, residual_tol)


def exact_prox_point(m, h, lam, cfg=AtsConfig(), accuracy=1e-11):
    """Subproblem minimizer to relative accuracy `accuracy` in the inexactness ratio."""
    precise = replace(cfg, sigma_hat=accuracy, max_inner=max(cfg.max_inner, 200_000))
    if m.d == 3 and h.is_zero:
        if not np.any(m.bundle.gradient):
            return m.anchor.copy()
        z, _, _ = _bregman(m, lam, precise, accuracy, precise.max_inner)
        return m.anchor + z
    return solve(m, h, lam, precise).y


def psi_residual(m, h, lam, x=None, cfg=AtsConfig()):
    """``lam ||y* - x||^(d-1)`` for the exact subproblem minimizer ``y*``."""
    x = _check_anchor(m, x)
    y = exact_prox_point(m, h, lam, cfg)
    return lam * float(np.linalg.norm(y - x)) ** (m.d - 1)
