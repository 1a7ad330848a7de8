"""Accelerated high-order (tensor) proximal methods for composite convex problems.

The main entry points are :func:`run` (the accelerated method),
:func:`default_config`, the baselines in :mod:`tensorhpe.baselines` and the
built-in problems in :mod:`tensorhpe.problems`.
"""

from .ahpe import ConfigError, SolverConfig, a_next, default_config, run, step, validate_config
from .ats import AtsConfig, AtsError, ApproxSolution, certify, solve
from .baselines import BaselineConfig, run_agd, run_basic_tensor, run_baseline, run_gd
from .oracle import BoxIndicator, DerivativeBundle, L1, Problem, Zero
from .problems import PROBLEM_NAMES, builtin_problems, get_problem
from .taylor import TaylorModel, build_model
from .trace import IterRecord, RunTrace

__version__ = "0.1.0"
