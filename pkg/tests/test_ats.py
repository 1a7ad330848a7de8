from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import bisect_root, grid_min_2d
from tensorhpe.ats import (AtsConfig, AtsError, bregman_reference, certificate_ratio, certify,
                           exact_prox_point, psi_residual, solve, solve_d1, solve_d2, solve_d3,
                           solve_generic, solve_tau)
from tensorhpe.multilinear import SymTensor3
from tensorhpe.oracle import DerivativeBundle, L1, Zero
from tensorhpe.problems import get_problem
from tensorhpe.taylor import TaylorModel, build_model, model_gradient, model_hessian, model_value

# root of 4 t (t + 2)^2 = 1, from the 1-D bisection oracle (frozen)
TAU_EXAMPLE = 0.05897113572218789
TIGHT = AtsConfig(sigma_hat=1e-10, max_inner=200_000)


def model_from(g, H=None, T=None, M=0.0, d=None, x=None):
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    d = d or (3 if T is not None else 2 if H is not None else 1)
    b = DerivativeBundle(0.0, g, None if H is None else np.asarray(H, float), T, d)
    return TaylorModel(np.zeros(n) if x is None else np.asarray(x, float), b, M, d)


def random_psd(rng, n, floor=0.0):
    B = rng.normal(size=(n, n))
    return B @ B.T / n + floor * np.eye(n)


# --- certify -------------------------------------------------------------


def test_certify_examples():
    assert certify([1.0], [-0.5], 0.0, 1.0, [0.0], 0.5)
    assert not certify([1.0], [-0.5], 0.0, 1.0, [0.0], 0.4)


def test_exact_solution_certifies_for_any_sigma():
    y, x, lam = np.array([0.5, -1.0]), np.array([1.0, 2.0]), 0.5
    u = (x - y) / lam
    assert certify(y, u, 0.0, lam, x, 0.0)
    assert certify(x, np.zeros(2), 0.0, lam, x, 0.0)
    assert certificate_ratio(x, np.zeros(2), 0.0, lam, x) == 0.0
    assert certificate_ratio(x, np.ones(2), 0.0, lam, x) == np.inf


def test_certify_rejects_bad_inputs():
    with pytest.raises(ValueError):
        certify([1.0], [0.0], -1.0, 1.0, [0.0], 0.5)
    with pytest.raises(ValueError):
        certify([1.0], [0.0], 0.0, 0.0, [0.0], 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        AtsConfig(kappa=1.0)
    with pytest.raises(ValueError):
        AtsConfig(sigma_hat=1.0)
    with pytest.raises(ValueError):
        AtsConfig(max_inner=-1)


# --- d = 1 ---------------------------------------------------------------


def test_d1_stationary_anchor():
    s = solve_d1(model_from([0.0, 0.0], M=1.0), Zero(), 1.0)
    assert np.array_equal(s.y, np.zeros(2)) and np.array_equal(s.u, np.zeros(2))


def test_d1_closed_form():
    s = solve_d1(model_from([1.0], M=0.0, x=[3.0]), Zero(), 1.0)
    assert s.y[0] == 2.0 and s.u[0] == 1.0 and s.eps == 0.0
    assert s.residual_ratio == 0.0


def test_d1_l1_matches_grid(rng):
    for _ in range(3):
        g = rng.normal(size=2)
        m = model_from(g, M=0.5, x=rng.normal(size=2))
        h, lam = L1(0.3), 0.8
        s = solve_d1(m, h, lam)
        obj = lambda y: model_value(m, y) + h(y) + np.sum((y - m.anchor) ** 2) / (2 * lam)
        _, y_grid = grid_min_2d(obj, m.anchor, 3.0)
        assert np.linalg.norm(s.y - y_grid) <= 1e-4
        assert L1(0.3).subgradient_distance(s.y, s.u - model_gradient(m, s.y)) <= 1e-12


# --- d = 2 ---------------------------------------------------------------


def test_d2_stationary_anchor():
    s = solve_d2(model_from([0.0, 0.0], np.eye(2), M=1.0), Zero(), 1.0)
    assert np.array_equal(s.y, np.zeros(2)) and s.inner_iterations == 0


def test_d2_one_dimensional_cubic():
    # -z + |z|^3 is minimized at 3 z^2 = 1
    s = solve_d2(model_from([-1.0], [[0.0]], M=6.0), Zero(), 1e12,
                 cfg=AtsConfig(enforce_certificate=False))
    assert s.y[0] == pytest.approx(1 / np.sqrt(3), rel=1e-10)


def test_d2_certificate_recomputed(rng):
    cfg = AtsConfig(sigma_hat=0.1)
    for _ in range(5):
        m = model_from(rng.normal(size=3), random_psd(rng, 3), M=2.0)
        lam = 10 ** rng.uniform(-2, 2)
        s = solve_d2(m, Zero(), lam, cfg=cfg)
        res = np.linalg.norm(model_gradient(m, s.y) + (s.y - m.anchor) / lam)
        assert res <= cfg.sigma_hat * np.linalg.norm(s.y - m.anchor) / lam
        assert s.eps == 0.0


def test_d2_indefinite_shift_handled():
    # H has a negative eigenvalue larger than 1/lam: the radial bracket must start above it
    m = model_from([1.0, 0.5], [[-1.0, 0.0], [0.0, 2.0]], M=4.0)
    s = solve_d2(m, Zero(), 10.0)
    g = model_gradient(m, s.y) + (s.y - m.anchor) / 10.0
    assert np.linalg.norm(g) <= 1e-10


def test_d2_agrees_with_generic(rng):
    for _ in range(10):
        m = model_from(rng.normal(size=4), random_psd(rng, 4), M=1.0 + rng.random())
        lam = 10 ** rng.uniform(-1, 1)
        a = solve_d2(m, Zero(), lam).y
        b = solve_generic(m, Zero(), lam, cfg=TIGHT, residual_tol=1e-12).y
        assert np.linalg.norm(a - b) <= 1e-6 * (1 + np.linalg.norm(a))


# --- solve_tau -----------------------------------------------------------


def test_tau_zero_vector():
    t, z = solve_tau(np.eye(2), np.zeros(2), 1.0)
    assert t == 0.0 and np.array_equal(z, np.zeros(2))


def test_tau_one_dimensional_example():
    oracle = bisect_root(lambda t: 4 * t * (t + 2) ** 2 - 1, 0.0, 1.0)
    assert oracle == pytest.approx(TAU_EXAMPLE, rel=1e-14)
    t, z = solve_tau(np.array([[2.0]]), np.array([1.0]), 1.0)
    assert abs(4 * t * (t + 2) ** 2 - 1) < 1e-10
    assert t == pytest.approx(TAU_EXAMPLE, rel=1e-12)
    assert z @ z == pytest.approx(4 * t, rel=1e-12)


def test_tau_stationarity(rng):
    for _ in range(20):
        n = rng.integers(1, 8)
        A, a, gamma = random_psd(rng, n), rng.normal(size=n), 10 ** rng.uniform(-2, 2)
        t, z = solve_tau(A, a, gamma)
        grad = a + A @ z + 0.25 * gamma * (z @ z) * z
        assert np.linalg.norm(grad) < 1e-8 * max(1.0, np.linalg.norm(a))


def test_tau_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_tau(-np.eye(2), np.ones(2), 1.0)
    with pytest.raises(ValueError):
        solve_tau(np.eye(2), np.ones(2), 0.0)


def test_tau_reuses_eigendecomposition(rng):
    A, a = random_psd(rng, 5), rng.normal(size=5)
    t1, z1 = solve_tau(A, a, 2.0)
    t2, z2 = solve_tau(None, a, 2.0, eig=np.linalg.eigh(A))
    assert t1 == t2 and np.array_equal(z1, z2)


@given(st.integers(1, 10), st.integers(0, 2 ** 32 - 1), st.floats(1e-2, 1e2))
def test_tau_matches_bisection_oracle(n, seed, gamma):
    rng = np.random.default_rng(seed)
    A = random_psd(rng, n) * (rng.random() < 0.8)   # sometimes the zero matrix
    a = rng.normal(size=n)
    t, _ = solve_tau(A, a, gamma)
    w, V = np.linalg.eigh(A)
    b2 = (V.T @ a) ** 2
    dphi = lambda s: 2 * gamma * s - 0.5 * gamma * np.sum(b2 / (gamma * s + np.maximum(w, 0)) ** 2)
    hi = 1.0
    while dphi(hi) <= 0:
        hi *= 2
    ref = bisect_root(dphi, 0.0, hi)
    assert abs(t - ref) <= 1e-8 * max(1.0, ref)


# --- d = 3 ---------------------------------------------------------------


def quartic_model(rng, n=2, lam=1.0, kappa=1.2):
    p = get_problem("quartic", n=n, seed=int(rng.integers(1000)))
    x = rng.uniform(-2, 2, n)
    return p, build_model(p, x, 3, 3 * kappa ** 2 * p.L(3))


def omega(m, lam, z):
    return model_value(m, m.anchor + z) - m.bundle.value + z @ z / (2 * lam)


def test_d3_stationary_anchor():
    m = model_from([0.0, 0.0], np.eye(2), SymTensor3.zeros(2), M=1.0)
    s = solve_d3(m, Zero(), 1.0)
    assert np.array_equal(s.y, m.anchor)


def test_d3_matches_grid_search(rng):
    for _ in range(3):
        p, m = quartic_model(rng)
        lam = 10 ** rng.uniform(-1, 1)
        s = solve_d3(m, Zero(), lam, cfg=TIGHT)
        z = s.y - m.anchor
        best, _ = grid_min_2d(lambda w: omega(m, lam, w), np.zeros(2), 2 * np.linalg.norm(z) + 1)
        assert omega(m, lam, z) <= best + 1e-6 * max(1.0, abs(best))


@pytest.mark.parametrize("name", ["quartic", "logreg", "logsumexp"])
def test_bregman_objective_decreases(name):
    p = get_problem(name)
    x = np.full(p.n, 0.7)
    m = build_model(p, x, 3, 3 * 1.2 ** 2 * p.L(3))
    z, it, hist = bregman_reference(m, 0.5, stop_ratio=1e-10)
    assert it > 1
    scale = max(abs(h) for h in hist)
    assert all(b <= a + 1e-12 * scale for a, b in zip(hist, hist[1:]))


@pytest.mark.parametrize("kappa", [1.2, 2.0, 4.0])
@pytest.mark.parametrize("name", ["quartic", "logreg"])
def test_relative_smoothness_sandwich(name, kappa, rng):
    """Hess rho <= Hess Omega <= (kappa+1)/(kappa-1) Hess rho at random points."""
    lam = 0.3
    p = get_problem(name)
    x = rng.uniform(-1, 1, p.n)
    M = 3 * kappa ** 2 * p.L(3)
    m = build_model(p, x, 3, M)
    H = m.bundle.hessian
    L3 = M / (3 * kappa ** 2)
    g0 = (M - 3 * kappa * L3) / 6
    P = (1 - 1 / kappa) * H + (kappa - 1) / ((kappa + 1) * lam) * np.eye(p.n)
    c = (kappa + 1) / (kappa - 1)
    for _ in range(20):
        z = rng.normal(size=p.n) * 10 ** rng.uniform(-2, 1)
        hess_rho = P + g0 * ((z @ z) * np.eye(p.n) + 2 * np.outer(z, z))
        hess_omega = model_hessian(m, x + z) + np.eye(p.n) / lam
        scale = np.linalg.norm(hess_omega, 2)
        assert np.linalg.eigvalsh(hess_omega - hess_rho)[0] >= -1e-10 * scale
        assert np.linalg.eigvalsh(c * hess_rho - hess_omega)[0] >= -1e-10 * scale


def test_d3_certificate_and_history(rng):
    _, m = quartic_model(rng, n=4)
    s = solve_d3(m, Zero(), 2.0)
    assert s.certified and s.residual_ratio <= 0.1 and s.eps == 0.0
    assert len(s.history) == s.inner_iterations + 1


def test_d3_failure_is_typed():
    p = get_problem("logreg")
    m = build_model(p, p.x0, 3, 3 * 1.44 * p.L(3))
    with pytest.raises(AtsError) as info:
        solve_d3(m, Zero(), 1.0, cfg=AtsConfig(max_inner=0))
    assert info.value.solution is not None and not info.value.solution.certified
    s = solve_d3(m, Zero(), 1.0, cfg=AtsConfig(max_inner=0, enforce_certificate=False))
    assert not s.certified


# --- generic solver --------------------------------------------------------


def test_generic_stationary_anchor():
    m = model_from([0.0, 0.0], np.eye(2), M=1.0)
    s = solve_generic(m, L1(0.5), 1.0)
    assert s.inner_iterations == 0 and np.array_equal(s.y, m.anchor)


def test_generic_l1_subgradient_membership(rng):
    p = get_problem("lasso")
    for d in (1, 2, 3):
        m = build_model(p, rng.normal(size=p.n), d, p.L(d))
        s = solve_generic(m, p.h, 0.5)
        r = s.u - model_gradient(m, s.y)
        w = p.h.weight
        assert np.all(np.abs(r) <= w * (1 + 1e-9))
        nz = s.y != 0
        np.testing.assert_allclose(r[nz], w * np.sign(s.y[nz]), rtol=1e-9, atol=1e-12)
        assert certify(s.y, s.u, s.eps, 0.5, m.anchor, 0.1)


def test_dispatch_routes_composite_to_generic(rng):
    p = get_problem("lasso")
    m = build_model(p, rng.normal(size=p.n), 3, p.L(3))
    assert solve(m, p.h, 1.0).certified


# --- prox residual -------------------------------------------------------


def test_psi_stationary_anchor():
    m = model_from([0.0, 0.0], np.eye(2), M=1.0)
    assert psi_residual(m, Zero(), 1.0) == 0.0


@pytest.mark.parametrize("d", [2, 3])
def test_psi_sandwich(d, rng):
    p = get_problem("logreg")
    sh = 0.1
    for _ in range(3):
        M = 3 * 1.44 * p.L(3) if d == 3 else p.L(d)
        m = build_model(p, rng.normal(size=p.n), d, M)
        lam = 10 ** rng.uniform(-1, 1)
        s = solve(m, Zero(), lam, AtsConfig(sigma_hat=sh))
        r = np.linalg.norm(s.y - m.anchor)
        psi = psi_residual(m, Zero(), lam)
        assert lam * (1 - sh) ** (d - 1) * r ** (d - 1) <= psi * (1 + 1e-9)
        assert psi <= lam * (1 + sh) ** (d - 1) * r ** (d - 1) * (1 + 1e-9)


@pytest.mark.parametrize("d", [2, 3])
def test_psi_monotone_in_lambda(d):
    p = get_problem("logsumexp")
    M = 3 * 1.44 * p.L(3) if d == 3 else p.L(d)
    m = build_model(p, np.full(p.n, 0.5), d, M)
    vals = [psi_residual(m, Zero(), lam) for lam in np.geomspace(1e-2, 1e2, 9)]
    assert all(b >= a * (1 - 1e-9) for a, b in zip(vals, vals[1:]))


def test_exact_prox_point_is_stationary():
    p = get_problem("lasso")
    m = build_model(p, np.ones(p.n), 2, p.L(2))
    y = exact_prox_point(m, p.h, 1.0)
    g = model_gradient(m, y) + (y - m.anchor)
    assert p.h.subgradient_distance(y, -g) <= 1e-9
