"""Solver configuration and its admissibility checks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ats import AtsConfig

__all__ = ["SolverConfig", "ConfigError", "config_errors", "validate_config",
           "default_config"]


class ConfigError(ValueError):
    """Invalid solver configuration; ``errors`` lists every violated constraint."""

    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the accelerated tensor method.

    ``M`` is the Taylor-model regularization weight; ``None`` lets
    :func:`default_config` pick it from the problem.
    """

    d: int = 2
    sigma_hat: float = 0.1
    sigma_l: float = 0.2
    sigma_u: float = 0.8
    M: float | None = None
    rho_bar: float = 1e-6
    eps_bar: float = 1e-9
    max_outer: int = 200
    max_bisect: int = 200
    ats: AtsConfig = field(default_factory=AtsConfig)

    @property
    def sigma(self):
        return self.sigma_hat + self.sigma_u


def default_config(problem, d=2, **overrides):
    """Config with ``M = L_d``, or ``M = 3 kappa^2 L_3`` for ``d = 3`` and ``h = 0``.

    ``sigma_hat`` is mirrored into the inner solver settings.
    """
    cfg = SolverConfig(d=d, **overrides)
    if cfg.ats.sigma_hat != cfg.sigma_hat:
        cfg = replace(cfg, ats=replace(cfg.ats, sigma_hat=cfg.sigma_hat))
    if cfg.M is None:
        L = problem.L(d)
        if d == 3 and problem.h.is_zero:
            M = 3.0 * cfg.ats.kappa ** 2 * L
        else:
            M = L
        cfg = replace(cfg, M=M)
    return cfg


def config_errors(c, p=None):
    """Every violated constraint, as a list of messages (empty when valid)."""
    errs = []
    if c.d not in (1, 2, 3):
        errs.append(f"d must be 1, 2 or 3 (got {c.d})")
        return errs
    if c.sigma_hat < 0:
        errs.append(f"sigma_hat must be >= 0 (got {c.sigma_hat})")
    if not 0 < c.sigma_l < c.sigma_u < 1:
        errs.append(f"need 0 < sigma_l < sigma_u < 1 (got {c.sigma_l}, {c.sigma_u})")
    if not c.sigma_hat + c.sigma_u < 1:
        errs.append(f"sigma = sigma_hat + sigma_u must be < 1 (got {c.sigma_hat + c.sigma_u})")
    k = c.d - 1
    if not c.sigma_l * (1 + c.sigma_hat) ** k < c.sigma_u * (1 - c.sigma_hat) ** k:
        errs.append("need sigma_l (1 + sigma_hat)^(d-1) < sigma_u (1 - sigma_hat)^(d-1)")
    if c.M is None or not c.M > 0:
        errs.append(f"M must be positive (got {c.M})")
    if c.rho_bar <= 0:
        errs.append("rho_bar must be positive")
    if c.eps_bar <= 0:
        errs.append("eps_bar must be positive")
    if c.max_outer < 0:
        errs.append("max_outer must be >= 0")
    if c.max_bisect < 1:
        errs.append("max_bisect must be >= 1")
    if c.ats.sigma_hat != c.sigma_hat:
        errs.append("ats.sigma_hat must equal sigma_hat")
    if p is not None:
        try:
            L = p.L(c.d)
        except ValueError as exc:
            errs.append(str(exc))
        else:
            if c.M is not None and c.M < L:
                errs.append(f"M = {c.M} is below L_{c.d} = {L}")
            if (c.d == 3 and p.h.is_zero and c.M is not None
                    and c.M < 3.0 * c.ats.kappa ** 2 * L * (1 - 1e-12)):
                errs.append("d = 3 with h = 0 needs M >= 3 kappa^2 L_3")
        if c.d > p.max_order:
            errs.append(f"problem supports orders up to {p.max_order}")
    return errs


def validate_config(c, p=None):
    """Raise :class:`ConfigError` naming every violated constraint."""
    errs = config_errors(c, p)
    if errs:
        raise ConfigError(errs)
