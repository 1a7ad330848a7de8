import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tensorhpe.ahpe import (ConfigError, SolverConfig, a_next, config_errors, default_config,
                            run, validate_config)
from tensorhpe.problems import get_problem


def test_default_config_picks_M():
    p = get_problem("logreg")
    assert default_config(p).M == p.L(2)
    c3 = default_config(p, d=3)
    assert c3.M == pytest.approx(3 * c3.ats.kappa ** 2 * p.L(3))
    lasso = get_problem("lasso")
    assert default_config(lasso, d=3).M == lasso.L(3)
    assert default_config(p, sigma_hat=0.05).ats.sigma_hat == 0.05


def test_config_errors_lists_every_violation():
    p = get_problem("logreg")
    c = default_config(p, sigma_hat=0.5, sigma_u=0.6)
    errs = config_errors(c, p)
    assert any("sigma = sigma_hat + sigma_u" in e for e in errs)
    assert any("sigma_l (1 + sigma_hat)" in e for e in errs)
    with pytest.raises(ConfigError) as info:
        validate_config(c, p)
    assert len(info.value.errors) == len(errs)


def test_config_errors_examples():
    p = get_problem("logreg")
    assert config_errors(default_config(p), p) == []
    assert config_errors(SolverConfig(d=5, M=1.0))
    assert config_errors(replace(default_config(p), M=0.5 * p.L(2)), p)
    c3 = default_config(p, d=3)
    assert config_errors(replace(c3, M=p.L(3)), p)
    assert config_errors(SolverConfig(M=None))


def test_a_next_examples():
    assert a_next(0.0, 1.0) == 1.0
    assert a_next(1.0, 2.0) == pytest.approx(1 + math.sqrt(3))
    with pytest.raises(ValueError):
        a_next(1.0, 0.0)


@given(st.floats(0, 1e6), st.floats(1e-6, 1e6))
def test_a_next_solves_weight_equation(A, lam):
    a = a_next(A, lam)
    assert a > 0
    assert a * a == pytest.approx(lam * (A + a), rel=1e-10)


def test_start_at_optimum_stops_immediately():
    p = get_problem("quartic", n=3)
    tr = run(p, p.x_star.copy())
    assert tr.termination == "Converged" and tr.iterations == 1


@pytest.mark.parametrize("d", [2, 3])
def test_quartic_converges(d):
    p = get_problem("quartic", n=5)
    tr = run(p, c=default_config(p, d=d))
    assert tr.termination == "Converged"
    assert tr.records[-1].F_gap <= 1e-8


def test_lasso_recovers_support():
    p = get_problem("lasso")
    tr = run(p, c=default_config(p, rho_bar=1e-9))
    assert tr.termination == "Converged"
    np.testing.assert_allclose(tr.y_final, p.x_star, atol=1e-6)
    big = np.abs(p.x_star) > 1e-6
    assert np.array_equal(np.sign(tr.y_final[big]), np.sign(p.x_star[big]))


def test_zero_iterations():
    p = get_problem("logreg")
    tr = run(p, c=default_config(p, max_outer=0))
    assert tr.termination == "MaxIter" and tr.records == []
    np.testing.assert_array_equal(tr.y_final, p.x0)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_update_identities(d):
    p = get_problem("logsumexp")
    tr = run(p, c=default_config(p, d=d, max_outer=15))
    A, x, y = 0.0, tr.x0, tr.x0
    for r in tr.records:
        assert r.a_k == pytest.approx(a_next(A, r.lambda_k), rel=1e-14)
        assert r.A_k == pytest.approx(A + r.a_k, rel=1e-14)
        assert r.A_k > A
        x_tilde = (A * y + r.a_k * x) / (A + r.a_k)
        np.testing.assert_allclose(r.x_tilde, x_tilde, atol=1e-10 * (1 + np.linalg.norm(x_tilde)))
        np.testing.assert_allclose(r.x_k, x - r.a_k * r.v, rtol=1e-14, atol=1e-14)
        A, x, y = r.A_k, r.x_k, r.y_k


def test_subproblem_failure_terminates_run():
    p = get_problem("logreg")
    c = default_config(p, d=3)
    tr = run(p, c=replace(c, ats=replace(c.ats, max_inner=1)))
    assert tr.termination == "BisectFailed" and tr.message


def test_oracle_calls_counted():
    p = get_problem("logreg")
    tr = run(p, c=default_config(p, max_outer=3))
    assert tr.oracle_calls.get(2, 0) >= 3
    assert tr.oracle_calls.get(1, 0) >= 3


def test_invalid_config_raises():
    p = get_problem("logreg")
    with pytest.raises(ConfigError):
        run(p, c=default_config(p, sigma_l=0.9))
