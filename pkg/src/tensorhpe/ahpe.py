"""Accelerated hybrid proximal extragradient method with tensor steps.

Each outer iteration picks ``lam`` by :func:`bisection.search`, takes the
approximate tensor proximal step ``y`` from the extrapolated point
``x_tilde``, and updates

    a = (lam + sqrt(lam^2 + 4 lam A)) / 2,   A <- A + a,   x <- x - a v

with ``v = grad f(y) + u - grad f_x_tilde(y)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import bisection
from .config import ConfigError, SolverConfig, config_errors, default_config, validate_config
from .trace import IterRecord, RunTrace, counting

__all__ = [
    "SolverConfig",
    "ConfigError",
    "config_errors",
    "default_config",
    "validate_config",
    "SolverState",
    "a_next",
    "step",
    "run",
    "STATIONARY_TOL",
]

# below this step length the window test is meaningless in double precision
STATIONARY_TOL = 1e-14


def a_next(A_k, lam):
    """Positive root of ``a^2 - lam a - lam A_k = 0``."""
    if A_k < 0 or lam <= 0:
        raise ValueError("need A_k >= 0 and lam > 0")
    return 0.5 * (lam + math.sqrt(lam * lam + 4.0 * lam * A_k))


@dataclass
class SolverState:
    k: int
    A: float
    x: np.ndarray
    y: np.ndarray


def step(state, p, c, f_eval=None):
    """One outer iteration.

    Returns ``(new_state, record, outcome)``. On a failed search the state is
    unchanged and `record` is None. `f_eval` evaluates ``F`` for the record
    (defaults to ``p.F``) so diagnostic evaluations can bypass call counting.
    """
    out = bisection.search(p, state.x, state.y, state.A, c)
    if isinstance(out, bisection.Failed):
        return state, None, out
    f_eval = p.F if f_eval is None else f_eval
    A, lam = state.A, out.lam
    a = a_next(A, lam)
    x_tilde = (A / (A + a)) * state.y + (a / (A + a)) * state.x
    drift = np.linalg.norm(x_tilde - out.x_tilde)
    if drift > 1e-10 * (1.0 + np.linalg.norm(x_tilde)):
        raise AssertionError(f"extrapolated point inconsistent with the search ({drift:.3e})")
    A_new = A + a
    x_new = state.x - a * out.v
    y_new = out.sol.y
    F_y = f_eval(y_new)
    F_star = p.F_star
    step_norm = float(np.linalg.norm(y_new - out.x_tilde))
    product = lam * step_norm ** (c.d - 1)
    alpha_lo, _ = bisection.step_window(c.d, p.L(c.d), c.M, c.sigma_l, c.sigma_u)
    kind = "near_optimal" if isinstance(out, bisection.NearOptimal) else "large_step"
    rec = IterRecord(
        k=state.k + 1,
        A_k=A_new,
        a_k=a,
        lambda_k=lam,
        beta_k=out.beta,
        bisect_steps=out.steps,
        ats_inner=out.ats_inner,
        norm_v=float(np.linalg.norm(out.v)),
        eps=float(out.sol.eps),
        F_y=F_y,
        F_gap=F_y - F_star if F_star is not None else math.nan,
        step_norm=step_norm,
        residual_ratio=out.sol.residual_ratio,
        kind=kind,
        x_k=x_new,
        y_k=y_new,
        x_tilde=out.x_tilde,
        v=out.v,
        u=out.sol.u,
        product=product,
        in_window=product >= alpha_lo,
    )
    return SolverState(state.k + 1, A_new, x_new, y_new), rec, out


def run(p, x0=None, c=None):
    """Run the method from `x0` until near-optimality or ``c.max_outer`` steps.

    Parameters
    ----------
    p : Problem
    x0 : ndarray, optional
        Defaults to ``p.x0``.
    c : SolverConfig, optional
        Defaults to :func:`default_config` with ``d = 2``.

    Returns
    -------
    RunTrace
        ``termination`` is one of ``Converged``, ``MaxIter``,
        ``BisectFailed`` or ``Stationary``.
    """
    c = default_config(p) if c is None else c
    validate_config(c, p)
    x0 = np.array(p.x0 if x0 is None else x0, dtype=np.float64)
    counted, calls = counting(p)
    trace = RunTrace(p.name, f"ahpe-d{c.d}", asdict(c), x0=x0.copy(),
                     F_star=p.F_star, x_star=p.x_star)
    if p.x_star is not None:
        trace.D = float(np.linalg.norm(x0 - p.x_star))
    state = SolverState(0, 0.0, x0.copy(), x0.copy())
    trace.termination = "MaxIter"
    while state.k < c.max_outer:
        state, rec, out = step(state, counted, c, f_eval=p.F)
        if rec is None:
            trace.termination = "BisectFailed"
            trace.message = out.reason
            break
        trace.records.append(rec)
        if rec.kind == "near_optimal":
            # the residual test can fire away from the optimum when rho_bar is loose
            trace.termination = "Converged"
            trace.message = (f"stopped on the residual test: ||v|| = {rec.norm_v:.3e}, "
                             f"eps = {rec.eps:.3e}")
            break
        if rec.step_norm <= STATIONARY_TOL:
            trace.termination = "Stationary"
            break
    trace.y_final = state.y
    trace.oracle_calls = dict(sorted(calls.items()))
    return trace
