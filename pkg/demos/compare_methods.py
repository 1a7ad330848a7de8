"""
Accelerated tensor steps against first-order baselines
======================================================

Run every method on the logistic-regression instance and print how many
iterations each needs to bring ``F - F*`` below a few tolerances.
"""

import numpy as np

from tensorhpe import BaselineConfig, default_config, get_problem, run, run_baseline
from tensorhpe.bench import fit_rate

p = get_problem("logreg")
print(p.name, "n =", p.n, " F* =", p.F_star)

# accelerated runs with second and third order models
traces = {f"ahpe-d{d}": run(p, c=default_config(p, d=d)) for d in (1, 2, 3)}

# baselines stop on the optimality gap so the comparison is fair
for method in ("gd", "agd"):
    traces[method] = run_baseline(p, cfg=BaselineConfig(method, gap_tol=1e-10))
for d in (2, 3):
    traces[f"basic-d{d}"] = run_baseline(p, cfg=BaselineConfig("basic", d=d, gap_tol=1e-10))

#%%
# iterations to tolerance
tols = (1e-4, 1e-6, 1e-8)
print(f"\n{'method':>10}" + "".join(f"{t:>10.0e}" for t in tols) + f"{'oracle':>10}")
for name, tr in traces.items():
    hits = [tr.first_below(t) for t in tols]
    calls = sum(tr.oracle_calls.values())
    print(f"{name:>10}" + "".join(f"{'-' if h is None else h:>10}" for h in hits) + f"{calls:>10}")

#%%
# empirical log-log slope of the gap; the floor drops records that hit
# machine precision
for name in ("ahpe-d2", "ahpe-d3", "agd"):
    slope, _, r2 = fit_rate(traces[name], (5, 60), floor=1e-13)
    print(f"{name}: slope {slope:6.2f}  (R2 {r2:.2f})")

# the accelerated trace also carries its step sizes
tr = traces["ahpe-d2"]
lam = np.array([r.lambda_k for r in tr.records])
print("\nahpe-d2 step sizes grow by a factor", f"{lam[-1] / lam[0]:.1e}",
      "over", tr.iterations, "iterations")
