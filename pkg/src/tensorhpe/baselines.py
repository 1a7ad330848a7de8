"""Reference methods recorded in the same trace format as the accelerated method.

* ``gd``: proximal gradient descent with step ``1 / L_1``.
* ``agd``: accelerated proximal gradient (FISTA momentum, no restart).
* ``basic``: repeated regularized Taylor-model steps ``x <- argmin f_x + h``,
  solved by the same subproblem code with a negligible prox term.

Fields that have no meaning for a baseline (``A_k``, ``beta_k``) are NaN.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .ats import AtsConfig, solve
from .config import ConfigError
from .taylor import build_model
from .trace import IterRecord, RunTrace, counting

__all__ = ["BaselineConfig", "run_gd", "run_agd", "run_basic_tensor", "run_baseline",
           "BASIC_LAMBDA"]

# prox weight 1/lam is negligible at this size
BASIC_LAMBDA = 1e12


@dataclass(frozen=True)
class BaselineConfig:
    """Settings shared by the baselines.

    Parameters
    ----------
    method : {"gd", "agd", "basic"}
    max_iter : int
    tol : float
        Stop once the prox-gradient residual norm drops below `tol`.
    gap_tol : float, optional
        Also stop once ``F - F*`` drops below it (needs a known optimum).
    step : float, optional
        Gradient step; defaults to ``1 / L_1``.
    d : int
        Model order for ``basic``.
    M : float, optional
        Model weight for ``basic``; defaults to ``L_d`` (``3 kappa^2 L_3``
        for ``d = 3`` with ``h = 0``).
    inner_tol : float
        Relative subproblem residual for ``basic``.
    """

    method: str = "gd"
    max_iter: int = 10_000
    tol: float = 1e-9
    gap_tol: Optional[float] = None
    step: Optional[float] = None
    d: int = 2
    M: Optional[float] = None
    inner_tol: float = 1e-10
    ats: AtsConfig = field(default_factory=lambda: AtsConfig(enforce_certificate=False))

    def __post_init__(self):
        if self.method not in ("gd", "agd", "basic"):
            raise ValueError(f"unknown baseline {self.method!r}")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")


def _diverged(F, F0):
    return not np.isfinite(F) or F - F0 > 10.0 * max(abs(F0), 1.0)


def _record(k, F, F_star, x_prev, x, resid, lam=math.nan, inner=0, ratio=math.nan):
    return IterRecord(
        k=k, A_k=math.nan, a_k=math.nan, lambda_k=lam, beta_k=math.nan,
        bisect_steps=0, ats_inner=inner, norm_v=float(np.linalg.norm(resid)), eps=0.0,
        F_y=F, F_gap=F - F_star if F_star is not None else math.nan,
        step_norm=float(np.linalg.norm(x - x_prev)), residual_ratio=ratio,
        kind="baseline", y_k=x, v=resid,
    )


def _new_trace(p, x0, cfg, method):
    tr = RunTrace(p.name, method, asdict(cfg), x0=x0.copy(), F_star=p.F_star, x_star=p.x_star)
    if p.x_star is not None:
        tr.D = float(np.linalg.norm(x0 - p.x_star))
    return tr


def _done(rec, cfg):
    if rec.norm_v <= cfg.tol:
        return True
    return cfg.gap_tol is not None and rec.F_gap <= cfg.gap_tol


def _prox_gradient(p, x0, cfg, accelerate):
    x0 = np.array(p.x0 if x0 is None else x0, dtype=np.float64)
    counted, calls = counting(p)
    tr = _new_trace(p, x0, cfg, "agd" if accelerate else "gd")
    t = cfg.step if cfg.step is not None else 1.0 / p.L(1)
    F0 = p.F(x0)
    x = x0.copy()
    w, theta = x0.copy(), 1.0
    tr.termination = "MaxIter"
    for k in range(1, cfg.max_iter + 1):
        g = counted.gradient(w)
        x_new = p.h.prox(w - t * g, t)
        resid = (w - x_new) / t          # gradient mapping at w
        F = p.F(x_new)
        rec = _record(k, F, p.F_star, x, x_new, resid, lam=t)
        tr.records.append(rec)
        if accelerate:
            theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
            w = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
            theta = theta_new
        else:
            w = x_new
        x = x_new
        if _diverged(F, F0):
            tr.termination = "Diverged"
            break
        if _done(rec, cfg):
            tr.termination = "Converged"
            break
    tr.y_final = x
    tr.oracle_calls = dict(sorted(calls.items()))
    return tr


def run_gd(p, x0=None, cfg=None):
    """Proximal gradient descent ``x <- prox_{t h}(x - t grad f(x))``."""
    cfg = BaselineConfig("gd") if cfg is None else cfg
    return _prox_gradient(p, x0, cfg, accelerate=False)


def run_agd(p, x0=None, cfg=None):
    """Accelerated proximal gradient with FISTA momentum."""
    cfg = BaselineConfig("agd") if cfg is None else cfg
    return _prox_gradient(p, x0, cfg, accelerate=True)


def _basic_M(p, cfg):
    if cfg.M is not None:
        return cfg.M
    L = p.L(cfg.d)
    if cfg.d == 3 and p.h.is_zero:
        return 3.0 * cfg.ats.kappa ** 2 * L
    return L


def run_basic_tensor(p, x0=None, cfg=None, d=None):
    """Unaccelerated tensor method ``x <- argmin_y f_x(y) + h(y)``.

    The subproblem goes through :func:`ats.solve` with ``lam = 1e12`` and the
    certificate test disabled; the inner solvers stop on the subproblem
    residual ``inner_tol * ||grad f(x)||`` instead.
    """
    cfg = BaselineConfig("basic") if cfg is None else cfg
    if d is not None:
        cfg = replace(cfg, d=d)
    M = _basic_M(p, cfg)
    if M < p.L(cfg.d):
        raise ConfigError([f"M = {M} is below L_{cfg.d} = {p.L(cfg.d)}"])
    x0 = np.array(p.x0 if x0 is None else x0, dtype=np.float64)
    counted, calls = counting(p)
    tr = _new_trace(p, x0, replace(cfg, M=M), f"basic-d{cfg.d}")
    ats_cfg = replace(cfg.ats, enforce_certificate=False)
    F0 = p.F(x0)
    x = x0.copy()
    tr.termination = "MaxIter"
    for k in range(1, cfg.max_iter + 1):
        model = build_model(counted, x, cfg.d, M)
        scale = max(float(np.linalg.norm(model.bundle.gradient)), 1e-300)
        sol = solve(model, p.h, BASIC_LAMBDA, ats_cfg, residual_tol=cfg.inner_tol * scale)
        x_new = sol.y
        # residual of F at the new point: grad f + nearest subgradient of h
        g = counted.gradient(x_new)
        resid = g + p.h.min_norm_subgradient(x_new, g)
        F = p.F(x_new)
        rec = _record(k, F, p.F_star, x, x_new, resid, lam=BASIC_LAMBDA,
                      inner=sol.inner_iterations, ratio=sol.residual_ratio)
        tr.records.append(rec)
        stalled = np.array_equal(x_new, x)
        x = x_new
        if _diverged(F, F0):
            tr.termination = "Diverged"
            break
        if _done(rec, cfg):
            tr.termination = "Converged"
            break
        if stalled:
            tr.termination = "Stationary"
            break
    tr.y_final = x
    tr.oracle_calls = dict(sorted(calls.items()))
    return tr


def run_baseline(p, x0=None, cfg=None):
    """Dispatch on ``cfg.method``."""
    cfg = BaselineConfig() if cfg is None else cfg
    if cfg.method == "gd":
        return run_gd(p, x0, cfg)
    if cfg.method == "agd":
        return run_agd(p, x0, cfg)
    return run_basic_tensor(p, x0, cfg)
