"""Step-size search for the accelerated method.

Outer iteration ``k`` needs ``lam`` with

    alpha_lo <= lam ||y - x_tilde||^(d-1) <= alpha_hi,
    alpha_lo = d! sigma_l / (L_d + M),  alpha_hi = d! sigma_u / (L_d + M),

where ``x_tilde`` itself depends on ``lam``. Writing ``lam = A beta^2 / (1 - beta)``
makes ``x_tilde = (1 - beta) y_k + beta x_k`` and the search is a plain
bisection on ``beta`` in ``[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import factorial
from typing import Optional

import numpy as np

from .ats import ApproxSolution, AtsError, solve
from .taylor import build_model, model_gradient

__all__ = [
    "lambda_of_beta",
    "beta_of_lambda",
    "x_of_beta",
    "step_window",
    "BisectionState",
    "Probe",
    "LargeStep",
    "NearOptimal",
    "Failed",
    "search",
    "step_count_report",
    "lambda_bar",
    "LAMBDA_MIN",
]

LAMBDA_MIN = 1e-12


def lambda_of_beta(A_k, beta):
    """``A_k beta^2 / (1 - beta)``; ``+inf`` at ``beta = 1``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if beta == 1.0:
        return math.inf
    return A_k * beta * beta / (1.0 - beta)


def beta_of_lambda(A_k, lam):
    """Inverse of :func:`lambda_of_beta`, in the cancellation-free form."""
    if lam < 0 or A_k <= 0:
        raise ValueError("need lam >= 0 and A_k > 0")
    if lam == 0:
        return 0.0
    if math.isinf(lam):
        return 1.0
    return 2.0 * lam / (math.sqrt(lam * lam + 4.0 * lam * A_k) + lam)


def x_of_beta(beta, x_k, y_k):
    """``(1 - beta) y_k + beta x_k``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return (1.0 - beta) * np.asarray(y_k, dtype=np.float64) + beta * np.asarray(x_k, dtype=np.float64)


def step_window(d, L, M, sigma_l, sigma_u):
    """``(alpha_lo, alpha_hi)`` for the product ``lam ||y - x_tilde||^(d-1)``."""
    c = factorial(d) / (L + M)
    return c * sigma_l, c * sigma_u


@dataclass
class BisectionState:
    beta_lo: float
    beta_hi: float
    A_k: float
    alpha_lo: float
    alpha_hi: float
    steps: int = 0


@dataclass
class Probe:
    """One trial step: the step size tried and what came back."""

    beta: float
    lam: float
    x_tilde: np.ndarray
    sol: Optional[ApproxSolution]
    v: Optional[np.ndarray]
    product: float
    error: Optional[str] = None


@dataclass
class _Outcome:
    lam: float
    x_tilde: np.ndarray
    sol: ApproxSolution
    v: np.ndarray
    beta: float
    steps: int
    log: list = field(default_factory=list, repr=False)

    @property
    def ats_inner(self):
        return sum(p.sol.inner_iterations for p in self.log if p.sol is not None)


class LargeStep(_Outcome):
    """Accepted step with the product inside ``[alpha_lo, alpha_hi]``."""


class NearOptimal(_Outcome):
    """``||v|| <= rho_bar`` and ``eps <= eps_bar``: stop the outer loop."""


@dataclass
class Failed:
    steps: int
    last_state: BisectionState
    reason: str
    log: list = field(default_factory=list, repr=False)

    @property
    def ats_inner(self):
        return sum(p.sol.inner_iterations for p in self.log if p.sol is not None)


def _probe(problem, x_tilde, lam, beta, cfg):
    """Build the model at `x_tilde`, solve the subproblem and form ``v``."""
    model = build_model(problem, x_tilde, cfg.d, cfg.M)
    try:
        sol = solve(model, problem.h, lam, cfg.ats)
    except AtsError as exc:
        return Probe(beta, lam, x_tilde, exc.solution, None, math.nan, str(exc))
    v = problem.gradient(sol.y) - model_gradient(model, sol.y) + sol.u
    product = lam * float(np.linalg.norm(sol.y - x_tilde)) ** (cfg.d - 1)
    return Probe(beta, lam, x_tilde, sol, v, product)


def _classify(p, state, cfg):
    if np.linalg.norm(p.v) <= cfg.rho_bar and p.sol.eps <= cfg.eps_bar:
        return NearOptimal
    if state.alpha_lo <= p.product <= state.alpha_hi:
        return LargeStep
    return None


def _accept(kind, p, state, log):
    return kind(p.lam, p.x_tilde, p.sol, p.v, p.beta, state.steps, log)


def search(problem, x_k, y_k, A_k, cfg):
    """Find a step size meeting the window, or detect near-optimality.

    Parameters
    ----------
    problem : Problem
    x_k, y_k : ndarray
        Current pair of iterates.
    A_k : float
        Accumulated weight. For ``A_k = 0`` the search runs directly on ``lam``
        with ``x_tilde = x_k``: start at ``lam = 1``, double or halve to
        bracket the window, then bisect geometrically.
    cfg : SolverConfig

    Returns
    -------
    LargeStep, NearOptimal or Failed
    """
    x_k = np.asarray(x_k, dtype=np.float64)
    y_k = np.asarray(y_k, dtype=np.float64)
    lo, hi = step_window(cfg.d, problem.L(cfg.d), cfg.M, cfg.sigma_l, cfg.sigma_u)
    if A_k <= 0:
        return _search_first(problem, x_k, lo, hi, cfg)

    state = BisectionState(0.0, 1.0, A_k, lo, hi)
    log = []
    while state.steps < cfg.max_bisect:
        beta = 0.5 * (state.beta_lo + state.beta_hi)
        if beta <= state.beta_lo or beta >= state.beta_hi:
            return Failed(state.steps, state, "interval below floating-point resolution", log)
        state.steps += 1
        lam = lambda_of_beta(A_k, beta)
        p = _probe(problem, x_of_beta(beta, x_k, y_k), lam, beta, cfg)
        log.append(p)
        if p.error is not None:
            return Failed(state.steps, state, p.error, log)
        kind = _classify(p, state, cfg)
        if kind is not None:
            return _accept(kind, p, state, log)
        if p.product > hi:
            state.beta_hi = beta
        else:
            state.beta_lo = beta
    return Failed(state.steps, state, f"no step in window after {cfg.max_bisect} steps", log)


def _search_first(problem, x0, lo, hi, cfg):
    """Search on ``lam`` itself when no weight has been accumulated yet."""
    state = BisectionState(0.0, 1.0, 0.0, lo, hi)
    log = []
    lam_lo, lam_hi = None, None     # largest too-small, smallest too-large
    lam = 1.0
    while state.steps < cfg.max_bisect:
        state.steps += 1
        p = _probe(problem, x0, lam, 1.0, cfg)
        log.append(p)
        if p.error is not None:
            return Failed(state.steps, state, p.error, log)
        kind = _classify(p, state, cfg)
        if kind is not None:
            return _accept(kind, p, state, log)
        if p.product > hi:
            lam_hi = lam
        else:
            lam_lo = lam
        if lam_hi is None:
            lam *= 2.0
        elif lam_lo is None:
            if lam <= LAMBDA_MIN:
                break
            lam = max(0.5 * lam, LAMBDA_MIN)
        else:
            lam = math.sqrt(lam_lo * lam_hi)
            if not lam_lo < lam < lam_hi:
                break
    return Failed(state.steps, state, f"no initial step in window after {state.steps} steps", log)


def step_count_report(traces):
    """Bisection-step statistics per run.

    Returns a list of dicts with keys ``problem``, ``method``, ``max_steps``,
    ``mean_steps``, ``log2_inv_rho``, ``log2_inv_eps``.
    """
    rows = []
    for t in traces:
        steps = [r.bisect_steps for r in t.records]
        rho = t.config.get("rho_bar", math.nan)
        eps = t.config.get("eps_bar", math.nan)
        rows.append(dict(
            problem=t.problem,
            method=t.method,
            max_steps=max(steps) if steps else 0,
            mean_steps=float(np.mean(steps)) if steps else 0.0,
            log2_inv_rho=-math.log2(rho) if rho > 0 else math.nan,
            log2_inv_eps=-math.log2(eps) if eps > 0 else math.nan,
        ))
    return rows


def lambda_bar(cfg, L):
    """Step-size threshold above which the window's lower side must hold.

    ``max{ a^(1/d) [(1 + sigma_hat + (L+M)/d! a) / rho_bar]^(1-1/d),
    (sigma^2 a^(2/(d-1)) / (2 eps_bar))^((d-1)/(d+1)) }`` with ``a = alpha_lo``.
    Diagnostic only; None for ``d = 1`` where the exponents are undefined.
    """
    d = cfg.d
    if d == 1:
        return None
    a, _ = step_window(d, L, cfg.M, cfg.sigma_l, cfg.sigma_u)
    first = a ** (1.0 / d) * ((1.0 + cfg.sigma_hat + (L + cfg.M) / factorial(d) * a)
                              / cfg.rho_bar) ** (1.0 - 1.0 / d)
    second = (cfg.sigma ** 2 * a ** (2.0 / (d - 1)) / (2.0 * cfg.eps_bar)) ** ((d - 1) / (d + 1))
    return max(first, second)
