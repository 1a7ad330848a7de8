"""Command-line harness: run a method on a built-in problem, write the trace.

Usage::

    python -m tensorhpe run --problem quartic --d 2 --out runs/quartic
    python -m tensorhpe compare --problem logreg --methods ahpe-d2,agd,gd --out runs/cmp

Exit codes: 0 success, 2 usage error or invalid configuration, 3 certificate
violation (with ``--check-certificates``), 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics
from .ahpe import ConfigError, default_config, run
from .baselines import BaselineConfig, run_baseline
from .bisection import step_count_report
from .problems import PROBLEM_NAMES, get_problem

__all__ = ["ExperimentSpec", "CSV_COLUMNS", "trace_rows", "write_csv", "summarize",
           "fit_rate", "run_spec", "compare", "build_parser", "main",
           "EXIT_OK", "EXIT_USAGE", "EXIT_CERTIFICATE", "EXIT_FAILURE"]

EXIT_OK, EXIT_USAGE, EXIT_CERTIFICATE, EXIT_FAILURE = 0, 2, 3, 4

CSV_COLUMNS = ("k", "A_k", "lambda_k", "beta_k", "bisect_steps", "ats_inner", "norm_v",
               "eps", "F_gap", "step_norm", "residual_ratio")

_SOLVER_FLAGS = ("sigma_hat", "sigma_l", "sigma_u", "M", "rho_bar", "eps_bar",
                 "max_outer", "max_bisect")


@dataclass
class ExperimentSpec:
    """One run: problem, method and overrides."""

    problem: str
    method: str = "ahpe"
    d: int = 2
    n: int | None = None
    m: int | None = None
    seed: int = 42
    overrides: dict = field(default_factory=dict)
    ats_overrides: dict = field(default_factory=dict)
    out: str | None = None
    reports: tuple = ()
    check_certificates: bool = False

    @property
    def label(self):
        if self.method in ("ahpe", "basic"):
            return f"{self.method}-d{self.d}"
        return self.method


class SolverFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# serialization


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def trace_rows(trace):
    """CSV rows (header first) with 17 significant digits per float."""
    rows = [list(CSV_COLUMNS)]
    for r in trace.records:
        vals = (r.k, r.A_k, r.lambda_k, r.beta_k, r.bisect_steps, r.ats_inner, r.norm_v,
                r.eps, r.F_gap, r.step_norm, r.residual_ratio)
        rows.append([_fmt(v) for v in vals])
    return rows


def write_csv(rows, path=None):
    """Write rows with RFC 4180 quoting; returns the text when `path` is None."""
    buf = io.StringIO(newline="")
    csv.writer(buf, lineterminator="\r\n").writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _jsonable(v):
    """Floats stay floats, NaN/inf become None, numpy scalars are unwrapped."""
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def problem_hash(p):
    """Short digest identifying a problem instance (name and constants)."""
    key = json.dumps([p.name, sorted((int(k), float(v)) for k, v in p.lipschitz.items())])
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def summarize(trace, p, spec=None):
    """JSON-ready summary of a run."""
    last = trace.records[-1] if trace.records else None
    calls = trace.oracle_calls
    s = dict(
        problem=trace.problem,
        problem_hash=problem_hash(p),
        method=trace.method,
        termination=trace.termination,
        message=trace.message,
        iterations=trace.iterations,
        final_gap=last.F_gap if last else None,
        final_F=last.F_y if last else None,
        oracle_calls=sum(calls.values()),
        oracle_calls_by_order={str(k): v for k, v in calls.items()},
        ats_inner_total=trace.ats_inner_total,
        bisect_total=trace.bisect_total,
        seed=spec.seed if spec else None,
    )
    c = trace.config
    if trace.method.startswith("ahpe") and trace.D is not None and trace.D > 0:
        d = c["d"]
        s["K_eps"] = diagnostics.k_epsilon(d, p.L(d), c["M"], c["sigma_hat"] + c["sigma_u"],
                                           c["sigma_l"], trace.D, c["eps_bar"])
        s["K_eps_target"] = c["eps_bar"]
    return _jsonable(s)


# ---------------------------------------------------------------------------
# rate fitting


def fit_rate(trace, k_range, floor=None):
    """Least-squares fit of ``log(F_gap)`` against ``log k``.

    Parameters
    ----------
    trace : RunTrace or sequence of ``(k, gap)``
    k_range : (int, int)
        Inclusive range of iterations.
    floor : float, optional
        Drop records with gap at or below `floor` (the floating-point floor
        once a run has converged). Without it a nonpositive gap is an error.

    Returns
    -------
    slope, intercept, r2
    """
    pairs = ([(r.k, r.F_gap) for r in trace.records] if hasattr(trace, "records")
             else list(trace))
    lo, hi = k_range
    sel = [(k, g) for k, g in pairs if lo <= k <= hi]
    if floor is not None:
        sel = [(k, g) for k, g in sel if g > floor]
    if len(sel) < 2:
        raise ValueError("need at least two points in range")
    ks, gs = np.array(sel, dtype=np.float64).T
    if np.any(~(gs > 0)):
        raise ValueError("nonpositive gap in fit range")
    X, Y = np.log(ks), np.log(gs)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return float(slope), float(intercept), r2


# ---------------------------------------------------------------------------
# runs


def _make_problem(spec):
    return get_problem(spec.problem, n=spec.n, m=spec.m, seed=spec.seed)


def run_spec(spec, p=None):
    """Run one spec; returns ``(trace, problem)``. Raises ConfigError or SolverFailure."""
    p = _make_problem(spec) if p is None else p
    if spec.method == "ahpe":
        try:
            cfg = default_config(p, d=spec.d, **spec.overrides)
            if spec.ats_overrides:
                cfg = replace(cfg, ats=replace(cfg.ats, **spec.ats_overrides))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError([str(exc)]) from None
        trace = run(p, None, cfg)
        if trace.termination == "BisectFailed":
            raise SolverFailure(f"step-size search failed: {trace.message}", trace)
        return trace, p
    kw = {}
    if "max_outer" in spec.overrides:
        kw["max_iter"] = spec.overrides["max_outer"]
    if "rho_bar" in spec.overrides:
        kw["tol"] = spec.overrides["rho_bar"]
    if "M" in spec.overrides:
        kw["M"] = spec.overrides["M"]
    try:
        cfg = BaselineConfig(spec.method, d=spec.d, **kw)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from None
    trace = run_baseline(p, None, cfg)
    if trace.termination == "Diverged":
        raise SolverFailure("baseline diverged", trace)
    return trace, p


def _reports(spec, trace, p):
    out = {}
    if not spec.method == "ahpe":
        return out
    for name in spec.reports:
        if name == "potential":
            rep = diagnostics.check_potential(trace, p)
        elif name == "rate":
            rep = diagnostics.check_rate_bound(trace, p)
        else:
            out["bisect"] = step_count_report([trace])[0]
            continue
        out[name] = dict(ok=rep.ok, summary=rep.summary(),
                         violations=[r["k"] for r in rep.violations])
    return out


def compare(traces, tol=1e-8):
    """Align ``F - F*`` columns of several runs on the same problem.

    Returns ``(rows, summary)``; `rows` start with a header
    ``k, <method>, ...`` and `summary` maps each method to the first
    iteration with gap at most `tol`.
    """
    if len(traces) < 2:
        raise ValueError("compare needs at least two runs")
    names = {t.problem for t in traces}
    if len(names) != 1:
        raise ValueError(f"runs are on different problems: {sorted(names)}")
    K = max(t.iterations for t in traces)
    rows = [["k"] + [t.method for t in traces]]
    for k in range(1, K + 1):
        row = [str(k)]
        for t in traces:
            row.append(_fmt(t.records[k - 1].F_gap) if k <= t.iterations else "")
        rows.append(row)
    summary = {t.method: t.first_below(tol) for t in traces}
    return rows, summary


# ---------------------------------------------------------------------------
# command line


def _common(sp):
    sp.add_argument("--problem", required=True, help=f"one of {', '.join(PROBLEM_NAMES)}")
    sp.add_argument("--n", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--sigma-hat", type=float)
    sp.add_argument("--sigma-l", type=float)
    sp.add_argument("--sigma-u", type=float)
    sp.add_argument("--M", type=float)
    sp.add_argument("--rho-bar", type=float)
    sp.add_argument("--eps-bar", type=float)
    sp.add_argument("--max-outer", type=int)
    sp.add_argument("--max-bisect", type=int)
    sp.add_argument("--ats-max-inner", type=int, help="inner iteration cap for the subproblem solver")
    sp.add_argument("--no-enforce-certificate", action="store_true",
                    help="accept uncertified subproblem solutions instead of failing")
    sp.add_argument("--out", help="output prefix; writes <out>.csv and <out>.json")


def build_parser():
    ap = argparse.ArgumentParser(prog="tensorhpe", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one method and write its trace")
    _common(r)
    r.add_argument("--d", type=int, default=2)
    r.add_argument("--method", default="ahpe", choices=("ahpe", "gd", "agd", "basic"))
    r.add_argument("--check-certificates", action="store_true")
    r.add_argument("--report", action="append", default=[],
                   choices=("potential", "rate", "bisect"))
    c = sub.add_parser("compare", help="run several methods on one problem")
    _common(c)
    c.add_argument("--methods", required=True,
                   help="comma-separated, e.g. ahpe-d2,ahpe-d3,agd,gd,basic-d2")
    c.add_argument("--tol", type=float, default=1e-8)
    return ap


def _spec_from_args(args, method, d):
    overrides = {f: getattr(args, f) for f in _SOLVER_FLAGS if getattr(args, f) is not None}
    ats = {}
    if args.ats_max_inner is not None:
        ats["max_inner"] = args.ats_max_inner
    if args.no_enforce_certificate:
        ats["enforce_certificate"] = False
    return ExperimentSpec(args.problem, method, d, args.n, args.m, args.seed, overrides, ats,
                          args.out, tuple(getattr(args, "report", ())),
                          getattr(args, "check_certificates", False))


def _parse_method(token):
    token = token.strip()
    for base in ("ahpe", "basic"):
        if token.startswith(base + "-d") and token[len(base) + 2:].isdigit():
            return base, int(token[len(base) + 2:])
    if token in ("gd", "agd"):
        return token, 1
    raise ValueError(f"unknown method {token!r}")


def _write_outputs(out, csv_rows, summary):
    if out is None:
        return
    write_csv(csv_rows, f"{out}.csv")
    with open(f"{out}.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args):
    spec = _spec_from_args(args, args.method, args.d)
    try:
        trace, p = run_spec(spec)
    except KeyError as exc:
        _err(exc.args[0])
        return EXIT_USAGE
    except ConfigError as exc:
        _err("invalid configuration: " + "; ".join(exc.errors))
        return EXIT_USAGE
    except SolverFailure as exc:
        trace = exc.args[1]
        _write_outputs(spec.out, trace_rows(trace), summarize(trace, _make_problem(spec), spec))
        _err(exc.args[0])
        return EXIT_FAILURE
    summary = summarize(trace, p, spec)
    summary["reports"] = _jsonable(_reports(spec, trace, p))
    code = EXIT_OK
    if spec.check_certificates and spec.method == "ahpe":
        rep = diagnostics.check_certificates(trace, p)
        summary["certificates"] = dict(ok=rep.ok, violations=[r["k"] for r in rep.violations])
        if not rep.ok:
            bad = summary["certificates"]["violations"]
            more = f" (+{len(bad) - 10} more)" if len(bad) > 10 else ""
            _err(f"certificate violated at iterations {bad[:10]}{more}")
            code = EXIT_CERTIFICATE
    _write_outputs(spec.out, trace_rows(trace), summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return code


def cmd_compare(args):
    try:
        methods = [_parse_method(t) for t in args.methods.split(",") if t.strip()]
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    if len(methods) < 2:
        _err("compare needs at least two methods")
        return EXIT_USAGE
    traces = []
    p = None
    try:
        for method, d in methods:
            spec = _spec_from_args(args, method, d)
            trace, p = run_spec(spec, p)
            traces.append(trace)
    except KeyError as exc:
        _err(exc.args[0])
        return EXIT_USAGE
    except ConfigError as exc:
        _err("invalid configuration: " + "; ".join(exc.errors))
        return EXIT_USAGE
    except SolverFailure as exc:
        _err(exc.args[0])
        return EXIT_FAILURE
    rows, first = compare(traces, args.tol)
    summary = _jsonable(dict(problem=p.name, problem_hash=problem_hash(p), tol=args.tol,
                             iterations_to_tol=first,
                             runs=[summarize(t, p) for t in traces]))
    _write_outputs(args.out, rows, summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.cmd == "run":
        return cmd_run(args)
    return cmd_compare(args)
