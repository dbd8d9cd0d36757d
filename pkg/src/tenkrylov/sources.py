"""Tensors seen only through tensor-by-vector-by-vector products (tenvecs).

Every source exposes ``shape`` and ``tenvec(skip_mode, p, q)``.  The two
contracted modes are taken in cyclic order after ``skip_mode``::

    tenvec(1, p, q) = A x_2 p x_3 q    (A p q, result of length n1)
    tenvec(2, p, q) = A x_3 p x_1 q    (result of length n2)
    tenvec(3, p, q) = A x_1 p x_2 q    (result of length n3)
"""

import threading
from dataclasses import dataclass

import numpy as np

from .core import (
    TuckerTensor,
    as_tensor,
    check_mode,
    cyclic_axes,
    tucker_reconstruct,
)


def _check_vectors(shape, skip_mode, p, q):
    _, a1, a2 = cyclic_axes(skip_mode)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != (shape[a1],) or q.shape != (shape[a2],):
        raise ValueError(
            f"tenvec({skip_mode}) needs vectors of length {shape[a1]} and "
            f"{shape[a2]}, got {p.shape} and {q.shape}"
        )
    return p, q


class TenvecSource:
    """Base class; subclasses implement ``_tenvec`` and ``densify``."""

    shape = (0, 0, 0)

    def tenvec(self, skip_mode, p, q):
        check_mode(skip_mode)
        p, q = _check_vectors(self.shape, skip_mode, p, q)
        return self._tenvec(skip_mode, p, q)

    def _tenvec(self, skip_mode, p, q):
        raise NotImplementedError

    def densify(self):
        """Dense array by brute force: one tenvec per (j, k) pair."""
        n1, n2, n3 = self.shape
        out = np.empty(self.shape)
        e2, e3 = np.eye(n2), np.eye(n3)
        for j in range(n2):
            for k in range(n3):
                out[:, j, k] = self.tenvec(1, e2[j], e3[k])
        return out


def tenvec_dense(t, skip_mode, p, q):
    t = np.asarray(t, dtype=np.float64)
    check_mode(skip_mode)
    p, q = _check_vectors(t.shape, skip_mode, p, q)
    if skip_mode == 1:
        return (t @ q) @ p
    if skip_mode == 2:
        return np.tensordot(q, t, axes=1) @ p
    return q @ np.tensordot(p, t, axes=1)


class DenseSource(TenvecSource):
    def __init__(self, values):
        self.values = np.ascontiguousarray(as_tensor(values))
        self.shape = self.values.shape

    def _tenvec(self, skip_mode, p, q):
        return tenvec_dense(self.values, skip_mode, p, q)

    def densify(self):
        return self.values.copy()


class SparseTensor3(TenvecSource):
    """COO tensor with 0-based indices; duplicate entries are summed."""

    def __init__(self, shape, indices, values):
        self.shape = tuple(int(n) for n in shape)
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, 3)
        vals = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(idx) != len(vals):
            raise ValueError("indices and values differ in length")
        for l in range(3):
            if len(idx) and (idx[:, l].min() < 0 or idx[:, l].max() >= self.shape[l]):
                raise ValueError(f"mode-{l + 1} index out of range for shape {self.shape}")
        if len(idx):
            lin = np.ravel_multi_index(idx.T, self.shape, order="F")
            lin, inv = np.unique(lin, return_inverse=True)
            vals = np.bincount(inv.ravel(), weights=vals, minlength=len(lin))
            idx = np.stack(np.unravel_index(lin, self.shape, order="F"), axis=1)
        self.indices = idx
        self.values = vals

    @property
    def nnz(self):
        return len(self.values)

    def _tenvec(self, skip_mode, p, q):
        out_ax, a1, a2 = cyclic_axes(skip_mode)
        idx = self.indices
        w = self.values * p[idx[:, a1]] * q[idx[:, a2]]
        return np.bincount(idx[:, out_ax], weights=w, minlength=self.shape[out_ax])

    def densify(self):
        out = np.zeros(self.shape)
        np.add.at(out, tuple(self.indices.T), self.values)
        return out

    @classmethod
    def from_dense(cls, t, threshold=0.0):
        t = np.asarray(t, dtype=np.float64)
        idx = np.argwhere(np.abs(t) > threshold)
        return cls(t.shape, idx, t[tuple(idx.T)])


def tenvec_sparse(t, skip_mode, p, q):
    return t.tenvec(skip_mode, p, q)


class CanonicalTensor(TenvecSource):
    """Sum of ``R`` rank-one terms ``u_s (x) v_s (x) w_s``."""

    def __init__(self, factors):
        self.factors = tuple(np.ascontiguousarray(f, dtype=np.float64) for f in factors)
        if len(self.factors) != 3 or any(f.ndim != 2 for f in self.factors):
            raise ValueError("need three factor matrices")
        ranks = {f.shape[1] for f in self.factors}
        if len(ranks) != 1:
            raise ValueError(f"factor column counts differ: {[f.shape[1] for f in self.factors]}")
        self.shape = tuple(f.shape[0] for f in self.factors)

    @property
    def rank(self):
        return self.factors[0].shape[1]

    def _tenvec(self, skip_mode, p, q):
        out_ax, a1, a2 = cyclic_axes(skip_mode)
        f = self.factors
        return f[out_ax] @ ((f[a1].T @ p) * (f[a2].T @ q))

    def densify(self):
        u, v, w = self.factors
        return np.einsum("is,js,ks->ijk", u, v, w)


def tenvec_canonical(t, skip_mode, p, q):
    return t.tenvec(skip_mode, p, q)


class TuckerSource(TenvecSource):
    """Tucker tensor evaluated as ``U (G x_2 V^T p x_3 W^T q)`` without densifying."""

    def __init__(self, tucker):
        self.tucker = tucker
        self.shape = tucker.shape

    def _tenvec(self, skip_mode, p, q):
        out_ax, a1, a2 = cyclic_axes(skip_mode)
        f = self.tucker.factors
        core = np.transpose(self.tucker.core, (out_ax, a1, a2))
        small = (core @ (f[a2].T @ q)) @ (f[a1].T @ p)
        return f[out_ax] @ small

    def densify(self):
        return tucker_reconstruct(self.tucker)


def tenvec_tucker(t, skip_mode, p, q):
    return TuckerSource(t).tenvec(skip_mode, p, q)


class HadamardTuckerSource(TenvecSource):
    """Elementwise product of two Tucker tensors, kept implicit.

    The product has a Kronecker-structured core of size ``(r1 p1, r2 p2, r3 p3)``
    that is never formed.  ``peak_entries`` records the largest intermediate
    array allocated by any tenvec so far.
    """

    def __init__(self, a, b):
        if a.shape != b.shape:
            raise ValueError(f"ambient shape mismatch {a.shape} vs {b.shape}")
        self.a, self.b = a, b
        self.shape = a.shape
        self.peak_entries = 0

    @property
    def kron_core_entries(self):
        return int(np.prod([ra * rb for ra, rb in zip(self.a.ranks, self.b.ranks)]))

    def _tenvec(self, skip_mode, p, q):
        out_ax, a1, a2 = cyclic_axes(skip_mode)
        fa, fb = self.a.factors, self.b.factors
        g = np.transpose(self.a.core, (out_ax, a1, a2))
        h = np.transpose(self.b.core, (out_ax, a1, a2))
        # crossed Gram contractions of the two contracted modes
        m1 = fa[a1].T @ (p[:, None] * fb[a1])
        m2 = fa[a2].T @ (q[:, None] * fb[a2])
        x = np.tensordot(g, m1, axes=([1], [0]))  # (a, c, e)
        y = np.tensordot(x, m2, axes=([1], [0]))  # (a, e, f)
        t = np.tensordot(y, h, axes=([1, 2], [1, 2]))  # (a, d)
        rows = fa[out_ax] @ t
        self.peak_entries = max(
            self.peak_entries, m1.size, m2.size, x.size, y.size, t.size, rows.size
        )
        return np.einsum("id,id->i", rows, fb[out_ax])

    def densify(self):
        return tucker_reconstruct(self.a) * tucker_reconstruct(self.b)


def tenvec_hadamard(t, skip_mode, p, q):
    return t.tenvec(skip_mode, p, q)


class CountingSource(TenvecSource):
    """Delegating wrapper that counts tenvec calls (thread-safe)."""

    def __init__(self, inner):
        self.inner = inner
        self.shape = inner.shape
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self):
        return self._count

    def tenvec(self, skip_mode, p, q):
        with self._lock:
            self._count += 1
        return self.inner.tenvec(skip_mode, p, q)

    def reset(self):
        with self._lock:
            self._count = 0

    def densify(self):
        return self.inner.densify()

    def __getattr__(self, name):
        # expose backend extras such as peak_entries
        if name == "inner":
            raise AttributeError(name)
        return getattr(self.inner, name)


def counted(src):
    return CountingSource(as_source(src))


def read_count(c):
    return c.count


def reset_count(c):
    c.reset()


def as_source(obj):
    """Coerce arrays and Tucker tensors to a :class:`TenvecSource`."""
    if isinstance(obj, TenvecSource):
        return obj
    if isinstance(obj, TuckerTensor):
        return TuckerSource(obj)
    return DenseSource(obj)


@dataclass
class SourceInfo:
    kind: str
    shape: tuple
    detail: dict


def describe(src):
    inner = src.inner if isinstance(src, CountingSource) else src
    if isinstance(inner, SparseTensor3):
        detail = {"nnz": inner.nnz}
    elif isinstance(inner, CanonicalTensor):
        detail = {"rank": inner.rank}
    elif isinstance(inner, TuckerSource):
        detail = {"ranks": list(inner.tucker.ranks)}
    elif isinstance(inner, HadamardTuckerSource):
        detail = {"ranks_a": list(inner.a.ranks), "ranks_b": list(inner.b.ranks)}
    else:
        detail = {}
    return SourceInfo(type(inner).__name__, tuple(inner.shape), detail)
