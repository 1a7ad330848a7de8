"""
Checking the convergence theory on a recorded run
=================================================

Every inequality behind the rate guarantee is recomputed from the trace.
"""

from tensorhpe import default_config, get_problem, run
from tensorhpe.bisection import step_count_report
from tensorhpe.diagnostics import (check_certificates, check_potential, check_rate_bound,
                                   check_subgradient, k_epsilon)

for name in ("quartic", "lasso"):
    p = get_problem(name)
    for d in (2, 3):
        c = default_config(p, d=d)
        tr = run(p, c=c)
        print(f"\n{name} d={d}: {tr.termination} after {tr.iterations} iterations,"
              f" gap {tr.records[-1].F_gap:.2e}")
        for check in (check_certificates, check_potential, check_rate_bound, check_subgradient):
            print("   ", check(tr, p).summary())
        K = k_epsilon(d, p.L(d), c.M, c.sigma, c.sigma_l, tr.D, c.eps_bar)
        print(f"    worst-case outer iterations for eps={c.eps_bar:g}: {K}")

#%%
# rate bound next to the observed gap on the first few iterations
p = get_problem("quartic")
tr = run(p, c=default_config(p, d=2))
rep = check_rate_bound(tr, p)
for row in rep.rows[:8]:
    print(f"k={row['k']:2d}  gap {row['gap']:.3e}  bound {row['bound']:.3e}")

#%%
# the step-size search stays short as the stopping tolerance tightens
traces = [run(p, c=default_config(p, rho_bar=rho)) for rho in (1e-3, 1e-6, 1e-9)]
for row in step_count_report(traces):
    print(f"log2(1/rho) = {row['log2_inv_rho']:5.1f}: max {row['max_steps']} steps,"
          f" mean {row['mean_steps']:.2f}")
