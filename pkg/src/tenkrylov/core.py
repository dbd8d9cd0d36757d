"""Dense 3-tensors, unfoldings, mode products and the Tucker format.

A dense 3-tensor is a plain ``numpy.ndarray`` of shape ``(n1, n2, n3)``.
Whenever a tensor is flattened the first index runs fastest, i.e. entry
``(i, j, k)`` sits at ``i + n1*j + n1*n2*k`` (Fortran order).

Unfoldings pair the remaining indices cyclically::

    A^(1)[i, j + n2*k] = a_ijk
    A^(2)[j, k + n3*i] = a_ijk
    A^(3)[k, i + n1*j] = a_ijk

so ``unfold(A, 1) @ np.kron(z, y) == A y z``.
"""

from dataclasses import dataclass, field

import numpy as np

MODES = (1, 2, 3)


def check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of 1, 2, 3; got {mode!r}")
    return mode


def cyclic_axes(mode):
    """0-based axes ``(mode, mode+1, mode+2)`` in cyclic order."""
    m = check_mode(mode) - 1
    return (m, (m + 1) % 3, (m + 2) % 3)


def as_tensor(values, shape=None):
    """Validate a dense 3-tensor, or build one from Fortran-ordered values."""
    a = np.asarray(values, dtype=np.float64)
    if shape is not None:
        shape = tuple(int(n) for n in shape)
        if a.size != int(np.prod(shape)):
            raise ValueError(f"{a.size} values do not fill shape {shape}")
        a = a.reshape(shape, order="F")
    if a.ndim != 3:
        raise ValueError(f"expected a 3-tensor, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("tensor has non-finite entries")
    return a


def linearize(t):
    """Values of ``t`` in the documented linear order (first index fastest)."""
    return np.asarray(t).ravel(order="F")


def unfold(t, mode):
    t = np.asarray(t)
    axes = cyclic_axes(mode)
    return np.transpose(t, axes).reshape(t.shape[axes[0]], -1, order="F")


def refold(mat, mode, shape):
    """Inverse of :func:`unfold` for a tensor of the given ``shape``."""
    axes = cyclic_axes(mode)
    perm_shape = tuple(shape[a] for a in axes)
    t = np.asarray(mat).reshape(perm_shape, order="F")
    return np.transpose(t, np.argsort(axes))


def mode_multiply(t, mode, m):
    """Mode product ``t x_mode m``; the mode size becomes ``m.shape[0]``."""
    t = np.asarray(t, dtype=np.float64)
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    ax = check_mode(mode) - 1
    if m.shape[1] != t.shape[ax]:
        raise ValueError(
            f"matrix with {m.shape[1]} columns cannot multiply mode {mode} "
            f"of size {t.shape[ax]}"
        )
    out = np.tensordot(m, t, axes=([1], [ax]))
    return np.moveaxis(out, 0, ax)


def frobenius_inner(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def frobenius_norm(a):
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64).ravel()))


def orthonormality_error(q):
    """Max-abs deviation of the Gram matrix of ``q`` from the identity."""
    q = np.asarray(q)
    if q.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(q.T @ q - np.eye(q.shape[1]))))


@dataclass
class TuckerTensor:
    """Core ``G`` of shape ``(r1, r2, r3)`` with factors ``U, V, W``.

    ``orthonormal`` records, per factor, whether its columns are
    orthonormal.  Flags are checked on construction (to 1e-12 by default).
    """

    core: np.ndarray
    factors: tuple
    orthonormal: tuple = (False, False, False)
    ortho_tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        self.core = np.ascontiguousarray(self.core, dtype=np.float64)
        if self.core.ndim != 3:
            raise ValueError("core must be a 3-tensor")
        self.factors = tuple(np.ascontiguousarray(f, dtype=np.float64) for f in self.factors)
        if len(self.factors) != 3:
            raise ValueError("need exactly three factors")
        self.orthonormal = tuple(bool(f) for f in self.orthonormal)
        for l, f in enumerate(self.factors):
            if f.ndim != 2 or f.shape[1] != self.core.shape[l]:
                raise ValueError(
                    f"factor {l + 1} has shape {f.shape}, core needs "
                    f"{self.core.shape[l]} columns"
                )
            if self.orthonormal[l]:
                if f.shape[1] > f.shape[0]:
                    raise ValueError(f"factor {l + 1} has more columns than rows")
                dev = orthonormality_error(f)
                if dev > self.ortho_tol:
                    raise ValueError(
                        f"factor {l + 1} flagged orthonormal but Gram deviation is {dev:.2e}"
                    )

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self):
        return self.core.shape

    def full(self):
        return tucker_reconstruct(self)

    def norm(self):
        """Frobenius norm; exact without densifying when all factors are orthonormal."""
        if all(self.orthonormal):
            return frobenius_norm(self.core)
        return tucker_residual_norm(self, zero_tucker(self.shape))


def zero_tucker(shape):
    """The rank-(0,0,0) Tucker tensor of the given ambient shape."""
    return TuckerTensor(
        np.zeros((0, 0, 0)),
        tuple(np.zeros((n, 0)) for n in shape),
        (True, True, True),
    )


def tucker_reconstruct(t):
    out = t.core
    for mode, f in zip(MODES, t.factors):
        out = mode_multiply(out, mode, f)
    return out


def tucker_residual_norm(a, b):
    """``||A - B||_F`` for two Tucker tensors without forming either one.

    Both operands are projected onto the joint per-mode bases obtained by a
    QR factorisation of the concatenated factors.
    """
    if a.shape != b.shape:
        raise ValueError(f"ambient shape mismatch {a.shape} vs {b.shape}")
    ca, cb = a.core, b.core
    for mode, fa, fb in zip(MODES, a.factors, b.factors):
        joint = np.hstack([fa, fb])
        if joint.shape[1] == 0:
            return 0.0
        q, _ = np.linalg.qr(joint)
        ca = mode_multiply(ca, mode, q.T @ fa)
        cb = mode_multiply(cb, mode, q.T @ fb)
    return frobenius_norm(ca - cb)


def spectral_norm_estimate(src, iters, seed=0):
    """Lower bound on the spectral norm from ``iters`` ALS sweeps."""
    from .krylov import als_rank1
    from .sources import as_source

    if iters < 1:
        raise ValueError("iters must be >= 1")
    src = as_source(src)
    rng = np.random.default_rng(seed)
    _, n2, n3 = src.shape
    v0 = random_unit(n2, rng)
    w0 = random_unit(n3, rng)
    return als_rank1(src, v0, w0, iters).sigma


def random_unit(n, rng):
    x = rng.standard_normal(n)
    return x / np.linalg.norm(x)


def random_orthonormal(n, r, rng):
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q
