"""Per-iteration records shared by the accelerated method and the baselines."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = ["IterRecord", "RunTrace", "TERMINATIONS", "counting"]

TERMINATIONS = ("Converged", "MaxIter", "BisectFailed", "Stationary", "Diverged")


@dataclass
class IterRecord:
    """State after outer iteration ``k`` (``k >= 1``).

    Scalars are what the CSV writer emits. The vectors are kept so the
    theoretical checks can be recomputed from the trace alone. Fields that do
    not apply to a method (``beta_k`` for gradient descent, say) are NaN.
    """

    k: int
    A_k: float
    a_k: float
    lambda_k: float
    beta_k: float
    bisect_steps: int
    ats_inner: int
    norm_v: float
    eps: float
    F_y: float
    F_gap: float
    step_norm: float
    residual_ratio: float
    kind: str = "large_step"
    x_k: Optional[np.ndarray] = None
    y_k: Optional[np.ndarray] = None
    x_tilde: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None
    # lam ||y - x_tilde||^(d-1), the quantity kept inside [alpha_-, alpha_+]
    product: float = float("nan")
    # lower side of the step-size window holds (the rate analysis needs it)
    in_window: bool = True


@dataclass
class RunTrace:
    """Full record of one solver run."""

    problem: str
    method: str
    config: dict
    records: list = field(default_factory=list)
    termination: str = "MaxIter"
    y_final: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None
    F_star: Optional[float] = None
    x_star: Optional[np.ndarray] = None
    D: Optional[float] = None
    oracle_calls: dict = field(default_factory=dict)
    message: str = ""

    @property
    def iterations(self):
        return len(self.records)

    @property
    def gaps(self):
        return np.array([r.F_gap for r in self.records])

    @property
    def ats_inner_total(self):
        return int(sum(r.ats_inner for r in self.records))

    @property
    def bisect_total(self):
        return int(sum(r.bisect_steps for r in self.records))

    def first_below(self, tol):
        """First ``k`` with ``F(y_k) - F* <= tol``, or None."""
        for r in self.records:
            if r.F_gap <= tol:
                return r.k
        return None


def counting(problem):
    """Copy of `problem` whose oracle tallies calls by requested order.

    Returns ``(wrapped_problem, counter)``.
    """
    calls = Counter()
    inner = problem.oracle

    def oracle(x, order):
        calls[order] += 1
        return inner(x, order)

    return replace(problem, oracle=oracle), calls
