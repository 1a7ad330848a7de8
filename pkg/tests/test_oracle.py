import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import fd_gradient, fd_jacobian
from tensorhpe.multilinear import SymTensor3
from tensorhpe.oracle import (BoxIndicator, DerivativeBundle, L1, OracleError, Problem, Zero,
                              query, validate_lipschitz)
from tensorhpe.problems import (PROBLEM_NAMES, builtin_problems, get_problem, log_sum_exp,
                                logistic_regression)


def half_norm_sq(n=2):
    def oracle(x, order):
        return DerivativeBundle(0.5 * float(x @ x), x.copy(),
                                np.eye(n) if order >= 2 else None,
                                SymTensor3.zeros(n) if order >= 3 else None, order)
    return Problem("half-norm", n, oracle, {1: 1.0, 2: 1e-12, 3: 1e-12})


def test_quadratic_query():
    b = query(half_norm_sq(), [1.0, 2.0], 2)
    assert b.value == 2.5
    assert np.array_equal(b.gradient, [1.0, 2.0])
    assert np.array_equal(b.hessian, np.eye(2))


def test_log_sum_exp_gradient_at_origin():
    p = log_sum_exp(np.eye(2), reference=False)
    np.testing.assert_allclose(p.query(np.zeros(2), 1).gradient, [0.5, 0.5], rtol=0, atol=1e-16)


def test_logistic_gradient_matches_finite_differences():
    p = logistic_regression(n=5, m=20, seed=7)
    x = np.random.default_rng(0).normal(size=5)
    g = p.query(x, 1).gradient
    np.testing.assert_allclose(g, fd_gradient(p.f, x), rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("name", PROBLEM_NAMES)
def test_derivatives_match_finite_differences(name, rng):
    p = get_problem(name)
    for _ in range(3):
        x = rng.uniform(-1, 1, p.n)
        b = p.query(x, 3)
        H_fd = fd_jacobian(lambda y: p.query(y, 1).gradient, x, 1e-5)
        np.testing.assert_allclose(b.hessian, H_fd, rtol=1e-5, atol=1e-7 * max(1, np.abs(H_fd).max()))
        T_fd = fd_jacobian(lambda y: p.query(y, 2).hessian, x, 1e-5)
        np.testing.assert_allclose(b.third.dense, T_fd, rtol=1e-5,
                                   atol=1e-7 * max(1, np.abs(T_fd).max()))


def test_order_out_of_range():
    p = half_norm_sq()
    with pytest.raises(OracleError):
        query(p, [0.0, 0.0], 4)
    with pytest.raises(OracleError):
        query(p, [0.0, 0.0], 0)


def test_bundle_validation():
    with pytest.raises(OracleError):
        DerivativeBundle(0.0, np.zeros(2), None, None, 2)
    with pytest.raises(OracleError):
        DerivativeBundle(np.nan, np.zeros(2))
    b = DerivativeBundle(1.0, np.zeros(2), np.eye(2), SymTensor3.zeros(2), 3)
    assert b.truncate(1).hessian is None
    with pytest.raises(OracleError):
        b.truncate(1).truncate(2)


def test_builtin_problem_set():
    probs = builtin_problems()
    assert [p.params["kind"] for p in probs] == list(PROBLEM_NAMES)
    quartic = probs[3]
    assert np.array_equal(quartic.x_star, np.zeros(quartic.n)) and quartic.F_star == 0.0
    assert probs[0].h.is_zero and not probs[2].h.is_zero
    for p in probs:
        assert all(p.L(d) > 0 for d in (1, 2, 3))
        assert "seed=42" in p.name


def test_problems_are_reproducible():
    a, b = get_problem("logreg", seed=3), get_problem("logreg", seed=3)
    x = np.linspace(-1, 1, a.n)
    assert a.f(x) == b.f(x)
    assert get_problem("logreg", seed=4).f(x) != a.f(x)


def test_unknown_problem_lists_names():
    with pytest.raises(KeyError, match="logreg, logsumexp, lasso, quartic"):
        get_problem("rosenbrock")


def test_logistic_hessian_psd(rng):
    p = get_problem("logreg")
    for _ in range(100):
        H = p.query(rng.uniform(-10, 10, p.n), 2).hessian
        assert np.linalg.eigvalsh(H)[0] >= 0


def test_reference_optima_are_stationary():
    for p in builtin_problems():
        g = p.gradient(p.x_star)
        assert p.h.subgradient_distance(p.x_star, -g) <= 1e-9


def test_l1_prox_example():
    assert np.array_equal(L1(1.0).prox(np.array([2.0, -0.5]), 1.0), [1.0, 0.0])


def test_nonsmooth_terms_evaluate():
    assert Zero()(np.ones(2)) == 0.0
    assert L1(0.5)(np.array([1.0, -2.0])) == 1.5
    box = BoxIndicator([-1, -1], [1, 1])
    assert box(np.array([0.5, 1.0])) == 0.0
    assert box(np.array([0.5, 1.5])) == np.inf
    assert np.isfinite(box(box.prox(np.array([3.0, -7.0]), 1.0)))
    with pytest.raises(ValueError):
        BoxIndicator([1.0], [0.0])
    with pytest.raises(ValueError):
        L1(-1.0)


vec = arrays(np.float64, 4, elements=st.floats(-5, 5, allow_nan=False))
step = st.floats(0.01, 5.0)


@given(vec, step, st.floats(0.0, 3.0))
def test_l1_prox_optimality(x, t, w):
    h = L1(w)
    y = h.prox(x, t)
    assert h.subgradient_distance(y, (x - y) / t) <= 1e-12 * (1 + w)


@given(vec, step)
def test_box_prox_optimality(x, t):
    h = BoxIndicator(-np.ones(4), 2 * np.ones(4))
    y = h.prox(x, t)
    assert h.subgradient_distance(y, (x - y) / t) <= 1e-12


@given(vec, step, st.floats(0.0, 3.0))
def test_l1_prox_minimizes(x, t, w):
    h = L1(w)
    y = h.prox(x, t)
    obj = lambda z: h(z) + np.sum((z - x) ** 2) / (2 * t)
    rng = np.random.default_rng(0)
    for d in rng.normal(size=(20, 4)) * 1e-3:
        assert obj(y) <= obj(y + d) + 1e-12


@given(vec, st.floats(0.0, 3.0))
def test_min_norm_subgradient_is_in_subdifferential(y, w):
    h = L1(w)
    base = np.linspace(-2, 2, 4)
    s = h.min_norm_subgradient(y, base)
    assert h.subgradient_distance(y, s) <= 1e-12


def test_lipschitz_quadratic_ratio_zero():
    rep = validate_lipschitz(half_norm_sq(), 50, d=2)
    assert rep.max_ratio == 0.0 and rep.ok


def test_lipschitz_quartic_third_order():
    rep = validate_lipschitz(get_problem("quartic"), 200, d=3)
    assert rep.L == 6.0
    assert rep.max_ratio <= 6.0 * (1 + 1e-9)
    assert rep.ok


@pytest.mark.parametrize("name", PROBLEM_NAMES)
@pytest.mark.parametrize("d", [1, 2, 3])
def test_documented_lipschitz_constants(name, d):
    rep = validate_lipschitz(get_problem(name), 200, d=d)
    assert rep.ok, (rep.max_ratio, rep.L)


def test_lipschitz_needs_trials():
    with pytest.raises(ValueError):
        validate_lipschitz(half_norm_sq(), 0)
