"""Independent reference computations used by the tests.

Each oracle is deliberately naive (loops, finite differences, grids,
bisection) and shares no code with the package.
"""

import itertools

import numpy as np


def triple_loop_matrix(T, z):
    n = len(z)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += T[i, j, k] * z[k]
            out[i, j] = s
    return out


def triple_loop_full(T, a, b, c):
    n = len(a)
    s = 0.0
    for i, j, k in itertools.product(range(n), repeat=3):
        s += T[i, j, k] * a[i] * b[j] * c[k]
    return s


def random_symmetric_tensor(rng, n):
    A = rng.normal(size=(n, n, n))
    S = np.zeros_like(A)
    for p in itertools.permutations(range(3)):
        S += A.transpose(p)
    return S / 6.0


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_jacobian(F, x, h=1e-6):
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(F(x + e)) - np.asarray(F(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def bisect_root(fn, lo, hi, iters=200):
    """Plain bisection for an increasing function with fn(lo) < 0 < fn(hi)."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def grid_min_2d(fn, center, radius, pts=61, rounds=10):
    """Zooming grid search for the minimum of a convex fn on R^2.

    Each round evaluates a ``pts x pts`` lattice and recentres on the best
    node with the radius cut to two lattice spacings.
    """
    c = np.array(center, dtype=float)
    r = float(radius)
    best = None
    for _ in range(rounds):
        xs = np.linspace(c[0] - r, c[0] + r, pts)
        ys = np.linspace(c[1] - r, c[1] + r, pts)
        vals = np.array([[fn(np.array([x, y])) for y in ys] for x in xs])
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        c = np.array([xs[i], ys[j]])
        if best is None or vals[i, j] < best[0]:
            best = (float(vals[i, j]), c.copy())
        r = 2.0 * (2.0 * r / (pts - 1))
    return best
