"""Built-in test problems.

Every random instance draws from ``numpy.random.default_rng(seed)`` and records
its seed in the problem name. Lipschitz constants are Frobenius-norm bounds on
the box ``[-10, 10]^n``; see each factory for the derivation.

=============  ================================================  ==========
name           f + h                                             optimum
=============  ================================================  ==========
``logreg``     mean logistic loss + (mu/2)||x||^2                Newton
``logsumexp``  log sum exp(Ax + c) + (mu/2)||x||^2               Newton
``lasso``      ||Ax - b||^2 / (2m) + w ||x||_1                   active set
``quartic``    sum x_i^4 / 4 + x^T Q x / 2                       (0, 0)
=============  ================================================  ==========
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logsumexp, softmax

from .multilinear import SymTensor3
from .oracle import DerivativeBundle, L1, Problem, Zero

__all__ = [
    "logistic_regression",
    "log_sum_exp",
    "lasso",
    "quartic",
    "builtin_problems",
    "get_problem",
    "PROBLEM_NAMES",
]

# sup |phi^(k)| of phi(s) = log(1 + exp(-s)) for k = 2, 3, 4
_LOGISTIC_SUP = {2: 0.25, 3: np.sqrt(3.0) / 18.0, 4: 0.125}
# sup of the Frobenius norm of the k-th derivative tensor of log-sum-exp:
# sum over set partitions of the cumulant coefficients (b - 1)!
_LSE_SUP = {2: 1.0, 3: 6.0, 4: 26.0}


def _newton_reference(oracle, x0, tol=1e-13, max_iter=200):
    x = np.array(x0, dtype=np.float64)
    b = oracle(x, 2)
    for _ in range(max_iter):
        g = b.gradient
        if np.linalg.norm(g) <= tol:
            break
        step = np.linalg.solve(b.hessian, -g)
        t = 1.0
        while True:
            bn = oracle(x + t * step, 2)
            if bn.value <= b.value + 1e-4 * t * (g @ step) or t < 1e-12:
                break
            t *= 0.5
        x_new = x + t * step
        if np.array_equal(x_new, x):
            break
        x, b = x_new, bn
    return x, b.value


def logistic_regression(n=20, m=100, seed=42, mu=1e-3):
    """l2-regularized logistic regression on Gaussian features.

    ``L_1 = ||A||_2^2 / (4m) + mu``. For ``d = 2, 3`` the derivative difference
    is ``sum_i c_i z_i^(x)d / m`` with ``|c_i| <= sup|phi^(d+1)| |z_i^T (x - y)|``,
    and ``||sum_i c_i z_i^(x)d||_F^2 = c^T (G o ... o G) c`` for the Gram matrix
    ``G = Z Z^T`` (d-fold Hadamard power), giving
    ``L_d = sup|phi^(d+1)| sqrt(lambda_max(G^(o d))) ||Z||_2 / m``.
    """
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    w_true = rng.normal(size=n) / np.sqrt(n)
    labels = np.where(A @ w_true + 0.5 * rng.normal(size=m) >= 0, 1.0, -1.0)
    Z = labels[:, None] * A          # rows b_i a_i, so s = Z x

    def oracle(x, order):
        s = Z @ x
        value = float(np.mean(np.logaddexp(0.0, -s)) + 0.5 * mu * (x @ x))
        sig_neg = expit(-s)
        grad = -(Z.T @ sig_neg) / m + mu * x
        hess = third = None
        if order >= 2:
            w2 = sig_neg * (1.0 - sig_neg)
            hess = (A.T * w2) @ A / m + mu * np.eye(n)
        if order >= 3:
            w3 = w2 * (2.0 * sig_neg - 1.0)
            third = SymTensor3.from_rank_one_sum(w3 / m, Z)
        return DerivativeBundle(value, grad, hess, third, order)

    G = Z @ Z.T
    z_norm = np.linalg.norm(Z, 2)
    lipschitz = {1: 0.25 * z_norm ** 2 / m + mu}
    for d in (2, 3):
        top = np.linalg.eigvalsh(G ** d)[-1]
        lipschitz[d] = _LOGISTIC_SUP[d + 1] * np.sqrt(top) * z_norm / m
    x0 = np.zeros(n)
    x_star, f_star = _newton_reference(oracle, x0)
    return Problem(f"logreg(n={n},m={m},seed={seed})", n, oracle, lipschitz, Zero(),
                   x0, (x_star, f_star), 3,
                   dict(kind="logreg", n=n, m=m, seed=seed, mu=mu))


def log_sum_exp(A, c=None, mu=0.0, name="logsumexp", x0=None, reference=True):
    """``log sum_i exp(a_i^T x + c_i) + (mu/2)||x||^2`` for given data.

    The derivatives are cumulant tensors of the random row ``a_I``,
    ``I ~ softmax(Ax + c)``. Pulling back through ``A`` costs a factor
    ``||A||_2`` per mode, so ``L_d = ||A||_2^(d+1) * sup||lse^(d+1)||_F``.
    """
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    c = np.zeros(m) if c is None else np.asarray(c, dtype=np.float64)

    def oracle(x, order):
        s = A @ x + c
        p = softmax(s)
        value = float(logsumexp(s) + 0.5 * mu * (x @ x))
        mean = A.T @ p
        grad = mean + mu * x
        hess = third = None
        if order >= 2:
            C = A - mean
            hess = (C.T * p) @ C + mu * np.eye(n)
        if order >= 3:
            third = SymTensor3.from_rank_one_sum(p, C)
        return DerivativeBundle(value, grad, hess, third, order)

    a_norm = np.linalg.norm(A, 2)
    lipschitz = {d: a_norm ** (d + 1) * _LSE_SUP[d + 1] for d in (1, 2, 3)}
    lipschitz[1] += mu
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    optimum = _newton_reference(oracle, x0) if reference and mu > 0 else None
    return Problem(name, n, oracle, lipschitz, Zero(), x0, optimum, 3,
                   dict(kind="logsumexp", n=n, m=m, mu=mu))


def random_log_sum_exp(n=10, m=40, seed=42, mu=1e-2):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n)) / np.sqrt(m)
    c = rng.normal(size=m)
    p = log_sum_exp(A, c, mu, name=f"logsumexp(n={n},m={m},seed={seed})")
    p.params.update(seed=seed)
    return p


def _lasso_reference(A, b, w, tol=1e-13, max_iter=200000):
    """Accelerated proximal gradient with restart, polished on the active set."""
    m, n = A.shape
    Q = A.T @ A / m
    q = A.T @ b / m
    L = np.linalg.eigvalsh(Q)[-1]
    h = L1(w)
    x = np.zeros(n)
    yk, t = x.copy(), 1.0
    for _ in range(max_iter):
        x_new = h.prox(yk - (Q @ yk - q) / L, 1.0 / L)
        if np.linalg.norm(x_new - yk) * L <= tol:
            x = x_new
            break
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        if (yk - x_new) @ (x_new - x) > 0:   # restart on non-monotone step
            t_new, t = 1.0, 1.0
        yk = x_new + (t - 1) / t_new * (x_new - x)
        x, t = x_new, t_new
    support = x != 0
    if support.any():
        S = np.flatnonzero(support)
        xs = np.linalg.solve(Q[np.ix_(S, S)], q[S] - w * np.sign(x[S]))
        cand = np.zeros(n)
        cand[S] = xs
        g = Q @ cand - q
        if (np.all(np.sign(xs) == np.sign(x[S]))
                and h.subgradient_distance(cand, -g) <= 1e-12):
            x = cand
    F = 0.5 * np.mean((A @ x - b) ** 2) + h(x)
    return x, float(F)


def lasso(n=20, m=60, seed=42, weight=None):
    """Least squares plus an l1 penalty.

    The Hessian is constant, so ``L_2 = L_3 = 0`` exactly; the documented
    values are set equal to ``L_1 = ||A||_2^2 / m``, which keeps the model
    weight ``M`` positive and is a valid over-estimate.
    """
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    x_true = np.zeros(n)
    k = max(1, n // 4)
    x_true[rng.choice(n, k, replace=False)] = rng.normal(size=k) * 2.0
    b = A @ x_true + 0.1 * rng.normal(size=m)
    if weight is None:
        weight = 0.1 * np.max(np.abs(A.T @ b)) / m
    Q = A.T @ A / m

    def oracle(x, order):
        r = A @ x - b
        value = 0.5 * float(r @ r) / m
        grad = A.T @ r / m
        hess = Q if order >= 2 else None
        third = SymTensor3.zeros(n) if order >= 3 else None
        return DerivativeBundle(value, grad, hess, third, order)

    L = np.linalg.norm(A, 2) ** 2 / m
    x_star, F_star = _lasso_reference(A, b, weight)
    return Problem(f"lasso(n={n},m={m},seed={seed})", n, oracle, {1: L, 2: L, 3: L},
                   L1(weight), np.zeros(n), (x_star, F_star), 3,
                   dict(kind="lasso", n=n, m=m, seed=seed, weight=weight, A=A, b=b))


def quartic(n=5, seed=42, radius=10.0):
    """``sum x_i^4 / 4 + x^T Q x / 2`` with random ``Q = B B^T / n + 0.01 I``.

    The third derivative is ``diag(6 x_i)`` so ``L_3 = 6`` globally. The
    Hessian ``diag(3 x_i^2) + Q`` is only locally Lipschitz; on the box
    ``[-radius, radius]^n`` the constants are ``L_2 = 6 radius`` and
    ``L_1 = 3 radius^2 + ||Q||_2``.
    """
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n))
    Q = B @ B.T / n + 0.01 * np.eye(n)

    def oracle(x, order):
        value = 0.25 * float(np.sum(x ** 4)) + 0.5 * float(x @ Q @ x)
        grad = x ** 3 + Q @ x
        hess = np.diag(3.0 * x ** 2) + Q if order >= 2 else None
        third = SymTensor3.from_diagonal(6.0 * x) if order >= 3 else None
        return DerivativeBundle(value, grad, hess, third, order)

    lipschitz = {1: 3 * radius ** 2 + np.linalg.eigvalsh(Q)[-1], 2: 6.0 * radius, 3: 6.0}
    return Problem(f"quartic(n={n},seed={seed})", n, oracle, lipschitz, Zero(),
                   np.ones(n), (np.zeros(n), 0.0), 3,
                   dict(kind="quartic", n=n, seed=seed, Q=Q))


PROBLEM_NAMES = ("logreg", "logsumexp", "lasso", "quartic")


def get_problem(name, n=None, m=None, seed=42):
    """Build a built-in problem by name; `n`, `m` default per problem."""
    kw = {"seed": seed}
    if n is not None:
        kw["n"] = n
    if name == "logreg":
        if m is not None:
            kw["m"] = m
        return logistic_regression(**kw)
    if name == "logsumexp":
        if m is not None:
            kw["m"] = m
        return random_log_sum_exp(**kw)
    if name == "lasso":
        if m is not None:
            kw["m"] = m
        return lasso(**kw)
    if name == "quartic":
        return quartic(**kw)
    raise KeyError(f"unknown problem {name!r}; available: {', '.join(PROBLEM_NAMES)}")


def builtin_problems(seed=42):
    """The four default instances: logistic regression, log-sum-exp, lasso, quartic."""
    return [get_problem(name, seed=seed) for name in PROBLEM_NAMES]
