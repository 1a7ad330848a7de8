"""Checks of the convergence theory against a recorded run.

Every check recomputes its inequality from the vectors and scalars stored in
the trace, and returns a :class:`CheckReport` with one row per iteration.
Rows whose hypotheses fail (for instance the final near-optimal step, which
is not required to meet the step-size window) are kept but not counted as
violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .ats import certify
from .bisection import step_window

__all__ = [
    "CheckReport",
    "check_certificates",
    "check_potential",
    "check_rate_bound",
    "check_subgradient",
    "rate_bound",
    "sum_bound_C",
    "A_lower_bound",
    "k_epsilon",
]


@dataclass
class CheckReport:
    name: str
    rows: list = field(default_factory=list)
    skipped: str = ""

    @property
    def violations(self):
        return [r for r in self.rows if r["hypothesis"] and not r["ok"]]

    @property
    def ok(self):
        return not self.violations

    def summary(self):
        if self.skipped:
            return f"{self.name}: skipped ({self.skipped})"
        n = sum(r["hypothesis"] for r in self.rows)
        return f"{self.name}: {n - len(self.violations)}/{n} rows hold"


def _params(trace, p):
    c = trace.config
    d = c["d"]
    L = p.L(d)
    sigma = c["sigma_hat"] + c["sigma_u"]
    return d, L, c["M"], c["sigma_hat"], c["sigma_l"], c["sigma_u"], sigma


def _leq(lhs, rhs, slack):
    return lhs <= rhs + slack * max(1.0, abs(rhs))


def _prop32(r, sigma):
    """``(||lam v + y - x_tilde||^2 + 2 lam eps, sigma^2 ||y - x_tilde||^2)``."""
    w = r.lambda_k * r.v + r.y_k - r.x_tilde
    lhs = float(w @ w) + 2.0 * r.lambda_k * r.eps
    s = r.y_k - r.x_tilde
    return lhs, sigma ** 2 * float(s @ s)


def check_certificates(trace, p):
    """Per-iteration certificate, window and combined-error tests (exact).

    Columns ``certificate`` (inexact subproblem solution with ``sigma_hat``),
    ``window`` (step-size window, large steps only) and ``combined``
    (``||lam v + y - x_tilde||^2 + 2 lam eps <= sigma^2 ||y - x_tilde||^2``,
    large steps only).
    """
    d, L, M, sigma_hat, sigma_l, sigma_u, sigma = _params(trace, p)
    lo, hi = step_window(d, L, M, sigma_l, sigma_u)
    rep = CheckReport("certificates")
    for r in trace.records:
        cert = certify(r.y_k, r.u, r.eps, r.lambda_k, r.x_tilde, sigma_hat)
        large = r.kind == "large_step"
        product = r.lambda_k * float(np.linalg.norm(r.y_k - r.x_tilde)) ** (d - 1)
        window = lo <= product <= hi
        lhs, rhs = _prop32(r, sigma)
        combined = lhs <= rhs
        ok = cert and (window and combined if large else True)
        rep.rows.append(dict(k=r.k, kind=r.kind, certificate=cert, window=window,
                             combined=combined, product=product, lhs=lhs, rhs=rhs,
                             hypothesis=True, ok=ok))
    return rep


def _hypothesis_flags(trace, sigma, lower=False, alpha_lo=None):
    """Running flag: every record up to ``k`` meets the combined-error bound
    (and the lower window side when `lower`)."""
    flags, good = [], True
    for r in trace.records:
        lhs, rhs = _prop32(r, sigma)
        good = good and lhs <= rhs * (1 + 1e-12)
        if lower:
            good = good and r.product >= alpha_lo
        flags.append(good)
    return flags


def _require_optimum(trace):
    if trace.x_star is None or trace.F_star is None:
        raise ValueError("check needs a known optimum")


def check_potential(trace, p, slack=1e-10):
    """Potential decrease, accumulated step energy and weight growth.

    Rows carry three inequalities per ``k``:

    * ``potential``: ``||x* - x_k||^2 / 2 + A_k (F(y_k) - F*)
      + (1 - sigma^2)/2 sum_j A_j/lam_j ||y_j - x_tilde_{j-1}||^2 <= D^2 / 2``
    * ``energy``: ``sum_j A_j/lam_j ||y_j - x_tilde_{j-1}||^2 <= D^2 / (1 - sigma^2)``
    * ``growth``: ``A_k >= (sum_j sqrt(lam_j))^2 / 4``
    """
    rep = CheckReport("potential")
    if not trace.records:
        return rep
    _require_optimum(trace)
    d, L, M, sigma_hat, sigma_l, sigma_u, sigma = _params(trace, p)
    D2 = trace.D ** 2
    flags = _hypothesis_flags(trace, sigma)
    energy = 0.0
    sqrt_sum = 0.0
    for r, hyp in zip(trace.records, flags):
        s = r.y_k - r.x_tilde
        energy += r.A_k / r.lambda_k * float(s @ s)
        sqrt_sum += math.sqrt(r.lambda_k)
        e = r.x_k - trace.x_star
        pot = 0.5 * float(e @ e) + r.A_k * (r.F_y - trace.F_star) + 0.5 * (1 - sigma ** 2) * energy
        potential = _leq(pot, 0.5 * D2, slack)
        energy_ok = _leq(energy, D2 / (1 - sigma ** 2), slack)
        growth = r.A_k >= 0.25 * sqrt_sum ** 2 * (1 - slack)
        rep.rows.append(dict(k=r.k, potential_lhs=pot, potential_rhs=0.5 * D2,
                             energy=energy, energy_rhs=D2 / (1 - sigma ** 2),
                             A_k=r.A_k, growth_rhs=0.25 * sqrt_sum ** 2,
                             potential=potential, energy_ok=energy_ok, growth=growth,
                             hypothesis=hyp, ok=potential and energy_ok and growth))
    return rep


def rate_bound(k, d, L, M, sigma, sigma_l, D):
    """Upper bound on ``F(y_k) - F*`` after ``k`` iterations."""
    e = (3 * d + 1) / 2.0
    const = ((d + 1) / 2.0) ** e * 2.0 ** d / ((1 - sigma ** 2) ** ((d - 1) / 2.0)
                                               * factorial(d) * sigma_l)
    return const * D ** (d + 1) * (L + M) * k ** (-e)


def sum_bound_C(d, L, M, sigma, sigma_l, D):
    """``D^2 / (1 - sigma^2) * (d! sigma_l / (L + M))^(-2/(d-1))`` (``d >= 2``)."""
    if d < 2:
        raise ValueError("defined for d >= 2 only")
    return D ** 2 / (1 - sigma ** 2) * (factorial(d) * sigma_l / (L + M)) ** (-2.0 / (d - 1))


def A_lower_bound(d, L, M, sigma, sigma_l, D):
    """Uniform lower bound ``d! sigma_l / ((L+M) (2/sqrt(1-sigma^2) + 2)^(d-1) D^(d-1))``."""
    return factorial(d) * sigma_l / ((L + M) * (2.0 / math.sqrt(1 - sigma ** 2) + 2.0) ** (d - 1)
                                     * D ** (d - 1))


def check_rate_bound(trace, p, slack=1e-10):
    """Rate bound on ``F(y_k) - F*``, the recursive weight bound and the
    uniform lower bound on ``A_k``.

    The rate bound is checked with no slack. The recursive bound
    ``A_k >= C^(-2p/q) (sum_j A_j^(1/q))^(2p) / 4`` with
    ``q = (3d+1)/(d-1)``, ``p = (3d+1)/(2d+2)`` is checked with relative
    `slack` and only for ``d >= 2`` (the exponent ``q`` is undefined for
    ``d = 1``). Rows need the window on every step up to ``k``.
    """
    rep = CheckReport("rate")
    if not trace.records:
        return rep
    _require_optimum(trace)
    d, L, M, sigma_hat, sigma_l, sigma_u, sigma = _params(trace, p)
    D = trace.D
    lo, _ = step_window(d, L, M, sigma_l, sigma_u)
    flags = _hypothesis_flags(trace, sigma, lower=True, alpha_lo=lo)
    A_min = A_lower_bound(d, L, M, sigma, sigma_l, D) if D > 0 else 0.0
    if d >= 2:
        q = (3 * d + 1) / (d - 1)
        pp = (3 * d + 1) / (2 * d + 2)
        C = sum_bound_C(d, L, M, sigma, sigma_l, D) if D > 0 else math.inf
    acc = 0.0
    for r, hyp in zip(trace.records, flags):
        bound = rate_bound(r.k, d, L, M, sigma, sigma_l, D)
        rate_ok = r.F_gap <= bound
        row = dict(k=r.k, gap=r.F_gap, bound=bound, rate=rate_ok,
                   A_k=r.A_k, A_min=A_min, A_min_ok=r.A_k >= A_min * (1 - slack))
        if d >= 2:
            acc += r.A_k ** (1.0 / q)
            rec_rhs = 0.25 * C ** (-2.0 * pp / q) * acc ** (2.0 * pp)
            row.update(recursive_rhs=rec_rhs, recursive=r.A_k >= rec_rhs * (1 - slack))
        else:
            row.update(recursive_rhs=math.nan, recursive=True)
        row.update(hypothesis=hyp, ok=rate_ok and row["A_min_ok"] and row["recursive"])
        rep.rows.append(row)
    return rep


def check_subgradient(trace, p, slack=1e-10):
    """``F* >= F(y_k) + <v_k, x* - y_k> - eps_k`` at every record."""
    rep = CheckReport("subgradient")
    if not trace.records:
        return rep
    _require_optimum(trace)
    for r in trace.records:
        rhs = r.F_y + float(r.v @ (trace.x_star - r.y_k)) - r.eps
        rep.rows.append(dict(k=r.k, F_star=trace.F_star, rhs=rhs, hypothesis=True,
                             ok=_leq(rhs, trace.F_star, slack)))
    return rep


def k_epsilon(d, L, M, sigma, sigma_l, D, eps):
    """Leading factor of the outer-iteration count needed for ``F - F* <= eps``.

    ``ceil((d+1)/2 (2^d / ((1-sigma^2)^((d-1)/2) d! sigma_l))^(2/(3d+1))
    ((L+M) D^(d+1) / eps)^(2/(3d+1)))``. The logarithmic factor accounting for
    the bisection is left out; it depends on constants that are not computed.
    """
    e = 2.0 / (3 * d + 1)
    base = 2.0 ** d / ((1 - sigma ** 2) ** ((d - 1) / 2.0) * factorial(d) * sigma_l)
    return int(math.ceil((d + 1) / 2.0 * base ** e * ((L + M) * D ** (d + 1) / eps) ** e))
