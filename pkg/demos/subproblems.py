"""
Solving one regularized Taylor step
===================================

Build a model at a point, then solve the proximal subproblem with the
order-specific solvers and the generic fallback.
"""

import numpy as np

from tensorhpe import AtsConfig, build_model, get_problem
from tensorhpe.ats import certificate_ratio, psi_residual, solve, solve_generic, solve_tau
from tensorhpe.taylor import gap_bound_check

p = get_problem("logsumexp")
x = np.full(p.n, 0.5)
lam = 0.5

#%%
# second order: eigendecomposition plus a scalar root find
m2 = build_model(p, x, 2, p.L(2))
s2 = solve(m2, p.h, lam)
print("d=2  step", np.linalg.norm(s2.y - x), " ratio", s2.residual_ratio,
      " inner", s2.inner_iterations)

# the same problem through the first-order fallback
g2 = solve_generic(m2, p.h, lam, cfg=AtsConfig(sigma_hat=1e-8, max_inner=100_000))
print("     generic disagrees by", np.linalg.norm(g2.y - s2.y))

#%%
# third order: Bregman gradient steps, each one a scalar problem in tau
kappa = AtsConfig().kappa
m3 = build_model(p, x, 3, 3 * kappa ** 2 * p.L(3))
s3 = solve(m3, p.h, lam)
print("d=3  step", np.linalg.norm(s3.y - x), " ratio", s3.residual_ratio,
      " inner", s3.inner_iterations)
print("     objective along the inner iterations:", np.round(s3.history[:6], 8))

# the scalar kernel on its own
A = np.diag([2.0, 0.5])
tau, z = solve_tau(A, np.array([1.0, -1.0]), 1.0)
print("tau =", tau, " |z|^2 / tau =", z @ z / tau)

#%%
# how well the model tracks the true gradient, and the prox residual that
# the step-size search brackets
for d, m in ((2, m2), (3, m3)):
    lhs, rhs = gap_bound_check(p, m, s2.y)
    print(f"d={d}: gradient gap {lhs:.3e} <= bound {rhs:.3e}")
for lam_ in (0.1, 1.0, 10.0):
    print(f"lam={lam_:5}: psi = {psi_residual(m2, p.h, lam_):.4e}")
print("certificate ratio of the d=2 step:",
      certificate_ratio(s2.y, s2.u, s2.eps, lam, x))
