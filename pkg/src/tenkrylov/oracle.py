"""Dense reference methods used as baselines and test oracles."""

import warnings
from dataclasses import dataclass

import numpy as np

from .core import TuckerTensor, as_tensor, mode_multiply, random_orthonormal, unfold
from .krylov import Rank1Result
from .sources import as_source


@dataclass(frozen=True)
class OracleConfig:
    """Target ranks and effort settings for the reference methods."""

    ranks: tuple = (1, 1, 1)
    als_iterations: int = 10
    restarts: int = 20
    seed: int = 0

    def __post_init__(self):
        if len(self.ranks) != 3 or min(self.ranks) < 1:
            raise ValueError("ranks must be three integers >= 1")

    def check(self, shape):
        if any(r > n for r, n in zip(self.ranks, shape)):
            raise ValueError(f"ranks {self.ranks} exceed shape {tuple(shape)}")


def hosvd(t, ranks):
    """Truncated higher-order SVD of a dense tensor."""
    t = as_tensor(t)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != 3 or any(r < 0 or r > n for r, n in zip(ranks, t.shape)):
        raise ValueError(f"ranks {ranks} incompatible with shape {t.shape}")
    factors = []
    for mode, r in zip((1, 2, 3), ranks):
        u, _, _ = np.linalg.svd(unfold(t, mode), full_matrices=False)
        factors.append(u[:, :r])
    core = t
    for mode, f in zip((1, 2, 3), factors):
        core = mode_multiply(core, mode, f.T)
    return TuckerTensor(core, tuple(factors), (True, True, True), ortho_tol=1e-10)


def _leading_left(mat, r):
    u, _, _ = np.linalg.svd(mat, full_matrices=False)
    return u[:, :r]


def tucker_als(src, init, iterations=10):
    """Tucker alternating least squares (HOOI) through tenvecs only.

    ``init`` is a triple of orthonormal factors or a TuckerTensor.  Each
    factor update contracts the other two factors column by column, so one
    iteration costs ``r2 r3 + r3 r1 + r1 r2`` tenvecs (``3 r^2`` for equal
    ranks).  If a projected unfolding loses rank the factor is shrunk and a
    warning is issued.
    """
    src = as_source(src)
    if isinstance(init, TuckerTensor):
        init = init.factors
    factors = [np.asarray(f, dtype=np.float64) for f in init]
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    for _ in range(iterations):
        for mode in (1, 2, 3):
            a = (mode % 3) + 1
            b = (a % 3) + 1
            fa, fb = factors[a - 1], factors[b - 1]
            cols = [src.tenvec(mode, fa[:, i], fb[:, j])
                    for j in range(fb.shape[1]) for i in range(fa.shape[1])]
            mat = np.column_stack(cols) if cols else np.zeros((src.shape[mode - 1], 0))
            r = factors[mode - 1].shape[1]
            s = np.linalg.svd(mat, compute_uv=False) if mat.size else np.zeros(0)
            rank = int(np.sum(s > s[0] * 1e-13)) if s.size and s[0] > 0 else 0
            if rank < r:
                warnings.warn(f"mode-{mode} rank collapsed from {r} to {rank}", RuntimeWarning)
                r = rank
            factors[mode - 1] = _leading_left(mat, r)
    u, v, w = factors
    core = np.zeros((u.shape[1], v.shape[1], w.shape[1]))
    for q in range(v.shape[1]):
        for s in range(w.shape[1]):
            core[:, q, s] = u.T @ src.tenvec(1, v[:, q], w[:, s])
    return TuckerTensor(core, (u, v, w), (True, True, True), ortho_tol=1e-10)


def random_init(shape, ranks, seed=0):
    rng = np.random.default_rng(seed)
    return tuple(random_orthonormal(n, r, rng) for n, r in zip(shape, ranks))


def brute_rank1(t, restarts=20, sweeps=50, seed=0):
    """Best rank-(1,1,1) value found by multi-restart dense ALS (einsum based).

    Returns the best restart as a :class:`Rank1Result`.
    """
    t = as_tensor(t)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        v = rng.standard_normal(t.shape[1])
        w = rng.standard_normal(t.shape[2])
        v /= np.linalg.norm(v)
        w /= np.linalg.norm(w)
        sigma = 0.0
        u = np.zeros(t.shape[0])
        for _ in range(sweeps):
            u = np.einsum("ijk,j,k->i", t, v, w)
            if not np.linalg.norm(u):
                sigma = 0.0
                break
            u /= np.linalg.norm(u)
            v = np.einsum("ijk,i,k->j", t, u, w)
            v /= np.linalg.norm(v)
            w = np.einsum("ijk,i,j->k", t, u, v)
            sigma = float(np.linalg.norm(w))
            w /= sigma
        if best is None or sigma > best.sigma:
            best = Rank1Result(sigma, u, v, w)
    return best


def dense_relative_residual(t, tucker):
    t = as_tensor(t)
    nt = np.linalg.norm(t)
    diff = np.linalg.norm(t - tucker.full())
    return diff / nt if nt else diff
