"""Dense vector, matrix and symmetric third-order tensor arithmetic.

Vectors and matrices are plain ``numpy`` float64 arrays. Symmetric
third-order tensors are stored packed: one value per canonical multi-index
``i <= j <= k``, so symmetry is a property of the storage rather than
something that has to be checked.
"""

from __future__ import annotations

import itertools
from functools import cached_property

import numpy as np

__all__ = [
    "SymTensor3",
    "as_vector",
    "symmetric_matrix",
    "contract3_to_matrix",
    "contract3_vector",
    "contract3_full",
    "operator_norm_upper",
]


def as_vector(x, n=None):
    """Return `x` as a finite 1-D float64 array, optionally of length `n`."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"dimension mismatch: expected {n}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def symmetric_matrix(a):
    """Return the exactly symmetric matrix built from the upper triangle of `a`."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def _canonical_indices(n):
    return np.array(list(itertools.combinations_with_replacement(range(n), 3)),
                    dtype=np.intp).reshape(-1, 3)


class SymTensor3:
    """Symmetric tensor of order three on R^n with packed storage.

    Parameters
    ----------
    n : int
        Dimension.
    packed : array_like
        Values for the canonical multi-indices ``(i, j, k)``, ``i <= j <= k``,
        in lexicographic order. Length ``n (n + 1) (n + 2) / 6``.
    """

    __slots__ = ("n", "packed", "__dict__")

    def __init__(self, n, packed):
        packed = np.array(packed, dtype=np.float64).ravel()
        expected = n * (n + 1) * (n + 2) // 6
        if packed.shape[0] != expected:
            raise ValueError(f"packed storage for n={n} needs {expected} values, "
                             f"got {packed.shape[0]}")
        if not np.all(np.isfinite(packed)):
            raise ValueError("tensor has non-finite entries")
        packed.flags.writeable = False
        self.n = int(n)
        self.packed = packed

    @classmethod
    def zeros(cls, n):
        return cls(n, np.zeros(n * (n + 1) * (n + 2) // 6))

    @classmethod
    def from_dense(cls, t):
        """Build from a dense ``n x n x n`` array by reading its canonical entries.

        The dense array is symmetrized first, so any input gives a valid tensor.
        """
        t = np.asarray(t, dtype=np.float64)
        if t.ndim != 3 or len(set(t.shape)) != 1:
            raise ValueError(f"expected an n x n x n array, got shape {t.shape}")
        n = t.shape[0]
        sym = sum(np.transpose(t, p) for p in itertools.permutations(range(3))) / 6.0
        idx = _canonical_indices(n)
        return cls(n, sym[idx[:, 0], idx[:, 1], idx[:, 2]])

    @classmethod
    def from_diagonal(cls, diag):
        diag = as_vector(diag)
        n = diag.shape[0]
        idx = _canonical_indices(n)
        packed = np.zeros(idx.shape[0])
        on_diag = (idx[:, 0] == idx[:, 1]) & (idx[:, 1] == idx[:, 2])
        packed[on_diag] = diag
        return cls(n, packed)

    @classmethod
    def from_rank_one_sum(cls, weights, vectors):
        """Return ``sum_i weights[i] * a_i (x) a_i (x) a_i`` for rows ``a_i`` of `vectors`."""
        a = np.asarray(vectors, dtype=np.float64)
        w = np.asarray(weights, dtype=np.float64)
        idx = _canonical_indices(a.shape[1])
        packed = np.einsum("m,mc,mc,mc->c", w, a[:, idx[:, 0]], a[:, idx[:, 1]],
                           a[:, idx[:, 2]])
        return cls(a.shape[1], packed)

    @cached_property
    def dense(self):
        """Full ``n x n x n`` read-only array."""
        n = self.n
        out = np.empty((n, n, n))
        idx = _canonical_indices(n)
        for p in itertools.permutations(range(3)):
            out[idx[:, p[0]], idx[:, p[1]], idx[:, p[2]]] = self.packed
        out.flags.writeable = False
        return out

    def __getitem__(self, key):
        i, j, k = sorted(int(t) for t in key)
        n = self.n
        if not 0 <= i <= j <= k < n:
            raise IndexError(key)
        # offset of (i, j, k) in lexicographic combinations_with_replacement order
        offset = 0
        for a in range(i):
            m = n - a
            offset += m * (m + 1) // 2
        for b in range(i, j):
            offset += n - b
        return float(self.packed[offset + (k - j)])

    def __add__(self, other):
        if not isinstance(other, SymTensor3) or other.n != self.n:
            return NotImplemented
        return SymTensor3(self.n, self.packed + other.packed)

    def __mul__(self, c):
        return SymTensor3(self.n, float(c) * self.packed)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymTensor3(n={self.n})"


def _check_dim(t, *vs):
    for v in vs:
        if np.shape(v) != (t.n,):
            raise ValueError(f"dimension mismatch: tensor has n={t.n}, "
                             f"vector has shape {np.shape(v)}")


def contract3_to_matrix(t, z):
    """Return the symmetric matrix ``T[z]_{ij} = sum_k T_{ijk} z_k``."""
    z = np.asarray(z, dtype=np.float64)
    _check_dim(t, z)
    return symmetric_matrix(t.dense @ z)


def contract3_vector(t, z):
    """Return the vector ``T[z, z]_i = sum_{jk} T_{ijk} z_j z_k``."""
    z = np.asarray(z, dtype=np.float64)
    _check_dim(t, z)
    return (t.dense @ z) @ z


def contract3_full(t, z1, z2, z3):
    """Full contraction ``T[z1, z2, z3]``."""
    z1, z2, z3 = (np.asarray(z, dtype=np.float64) for z in (z1, z2, z3))
    _check_dim(t, z1, z2, z3)
    return float(np.einsum("ijk,i,j,k->", t.dense, z1, z2, z3))


def operator_norm_upper(t):
    """Upper estimate of the operator norm of `t` (its Frobenius norm)."""
    return float(np.linalg.norm(t.dense.ravel()))
