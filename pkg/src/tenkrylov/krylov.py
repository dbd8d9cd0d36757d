"""Krylov-type recursions for 3-tensors and their rank-one kernels.

All routines touch the tensor only through ``src.tenvec``.  Mode ``m``
routines work in the cyclic frame ``(m, m+1, m+2)``: the leading vectors
live on modes ``m+1`` and ``m+2`` and ``src.tenvec(m, y, z)`` is ``A y z``.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import random_unit
from .matrix import is_breakdown, orthogonalize
from .report import RunReport, Termination
from .sources import CountingSource, as_source

TINY = 1e-300


def next_mode(mode, shift=1):
    return (mode - 1 + shift) % 3 + 1


@dataclass
class Rank1Result:
    """``sigma * u (x) v (x) w`` with unit factors; ``history`` holds every sigma."""

    sigma: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    history: list = field(default_factory=list)


def _normalize(x):
    s = float(np.linalg.norm(x))
    if s < TINY:
        return np.zeros_like(x), 0.0
    return x / s, s


def _als(fu, fv, fw, v, w, sweeps):
    """Cyclic ALS sweeps ``u := fu(v, w); v := fv(w, u); w := fw(u, v)``."""
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    history = []
    u = None
    sigma = 0.0
    for _ in range(sweeps):
        u, sigma = _normalize(fu(v, w))
        history.append(sigma)
        if sigma == 0.0:
            break
        v, sigma = _normalize(fv(w, u))
        history.append(sigma)
        if sigma == 0.0:
            break
        w, sigma = _normalize(fw(u, v))
        history.append(sigma)
        if sigma == 0.0:
            break
    return Rank1Result(sigma, u, v, w, history)


def als_rank1(src, v0, w0, sweeps):
    """Alternating rank-(1,1,1) iteration starting from unit ``v0, w0``."""
    src = as_source(src)
    return _als(
        lambda v, w: src.tenvec(1, v, w),
        lambda w, u: src.tenvec(2, w, u),
        lambda u, v: src.tenvec(3, u, v),
        np.asarray(v0, dtype=np.float64),
        np.asarray(w0, dtype=np.float64),
        sweeps,
    )


def projected_als(src, mode, X, Y, Z, yhat, zhat, sweeps):
    """ALS on ``A x_m (I - X X^T) x_{m+1} Y^T x_{m+2} Z^T`` through tenvecs of ``A``.

    ``Y`` or ``Z`` set to ``None`` leaves that mode unrestricted.  Each sweep
    costs three tenvecs of ``A``.  Returns the result in small coordinates:
    ``u`` is the projected mode-``mode`` vector, ``v``/``w`` are ``yhat``/``zhat``.
    """
    m1, m2 = next_mode(mode), next_mode(mode, 2)
    lift_y = (lambda a: a) if Y is None else (lambda a: Y @ a)
    lift_z = (lambda a: a) if Z is None else (lambda a: Z @ a)
    drop_y = (lambda a: a) if Y is None else (lambda a: Y.T @ a)
    drop_z = (lambda a: a) if Z is None else (lambda a: Z.T @ a)
    return _als(
        lambda v, w: orthogonalize(src.tenvec(mode, lift_y(v), lift_z(w)), X),
        lambda w, u: drop_y(src.tenvec(m1, lift_z(w), orthogonalize(u, X))),
        lambda u, v: drop_z(src.tenvec(m2, orthogonalize(u, X), lift_y(v))),
        yhat,
        zhat,
        sweeps,
    )


def power_rank1_slice(src, mode, x, z0, sweeps):
    """Power iterations on the matrix ``A x_mode x^T``.

    Alternates ``y := A z x`` and ``z := A x y`` (cyclically relabelled for
    other modes).  Returns ``Rank1Result(sigma, x, y, z)``; two tenvecs per sweep.
    """
    src = as_source(src)
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    m1, m2 = next_mode(mode), next_mode(mode, 2)
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z0, dtype=np.float64)
    y = None
    sigma = 0.0
    history = []
    for _ in range(sweeps):
        y, sigma = _normalize(src.tenvec(m1, z, x))
        history.append(sigma)
        if sigma == 0.0:
            break
        z, sigma = _normalize(src.tenvec(m2, x, y))
        history.append(sigma)
        if sigma == 0.0:
            break
    return Rank1Result(sigma, x, y, z, history)


def _counting(src):
    src = as_source(src)
    return src if isinstance(src, CountingSource) else CountingSource(src)


def range_start(src, seed=0):
    """Unit start vectors inside the mode-1 and mode-2 ranges (two tenvecs).

    ``u1 = A v0 w0`` and ``v1 = A w0 u1`` for random ``v0, w0``; starting the
    recursions from vectors in the range keeps the final bases at the mode ranks.
    """
    rng = np.random.default_rng(seed)
    n1, n2, n3 = src.shape
    v0, w0 = random_unit(n2, rng), random_unit(n3, rng)
    u1, _ = _normalize(src.tenvec(1, v0, w0))
    if not u1.any():
        return random_unit(n1, rng), v0
    v1, _ = _normalize(src.tenvec(2, w0, u1))
    if not v1.any():
        v1 = v0
    return u1, v1


def _initial_bases(src, u1, v1):
    """``U = [u1], V = [v1], W = [A u1 v1 / ||.||]``; ``W`` empty if that vanishes.

    Also returns ``||A u1 v1||``, the size of the initial core entry, which
    seeds the ``nrm`` accumulators.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    v1 = np.asarray(v1, dtype=np.float64)
    for name, vec in (("u1", u1), ("v1", v1)):
        if not np.isclose(np.linalg.norm(vec), 1.0, atol=1e-12):
            raise ValueError(f"{name} must be a unit vector")
    w, s = _normalize(src.tenvec(3, u1, v1))
    bases = {1: u1[:, None], 2: v1[:, None], 3: w[:, None] if s > 0 else np.zeros((src.shape[2], 0))}
    return bases, s


def mkr(src, u1, v1, r, tol=1e-12, on_breakdown="stop", seed=0):
    """Minimal Krylov recursion.

    Grows each basis by ``A v_k w_k``, ``A w_k u_{k+1}``, ``A u_{k+1} v_{k+1}``
    until ``r`` columns per mode.  ``on_breakdown="stop"`` halts everything at
    the first breakdown.  With ``"retry"`` a stalled step is repeated once
    with random combinations of the other two bases (drawn from ``seed``);
    only a second breakdown switches that mode off, and the rest continue.

    Returns ``(U, V, W, report)``.  A breakdown-free run to rank ``r`` costs
    ``3r - 2`` tenvecs (one for ``w_1``, three per iteration).
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if on_breakdown not in ("stop", "retry"):
        raise ValueError("on_breakdown must be 'stop' or 'retry'")
    rng = np.random.default_rng(seed)
    src = _counting(src)
    start = src.count
    report = RunReport("mkr", estimator="orthogonal-component")
    bases, s0 = _initial_bases(src, u1, v1)
    nrm = {1: s0, 2: s0, 3: s0}
    if bases[3].shape[1] == 0:
        report.breakdown(3, 1)
        report.termination = {1: Termination("breakdown", 1), 2: Termination("breakdown", 1),
                              3: Termination("breakdown", 1)}
        return bases[1], bases[2], bases[3], report.finish((1, 1, 0), src.count - start)
    active = {m: True for m in (1, 2, 3)}
    halted = False
    while not halted and any(active.values()):
        for mode in (1, 2, 3):
            if not active[mode]:
                continue
            X = bases[mode]
            if X.shape[1] >= r:
                active[mode] = False
                report.termination[mode] = Termination("max_rank")
                continue
            y = bases[next_mode(mode)][:, -1]
            z = bases[next_mode(mode, 2)][:, -1]
            x = src.tenvec(mode, y, z)
            xp = orthogonalize(x, X)
            if is_breakdown(x, xp, tol) and on_breakdown == "retry":
                report.retries += 1
                Y, Z = bases[next_mode(mode)], bases[next_mode(mode, 2)]
                y = Y @ random_unit(Y.shape[1], rng)
                z = Z @ random_unit(Z.shape[1], rng)
                x = src.tenvec(mode, y, z)
                xp = orthogonalize(x, X)
            if is_breakdown(x, xp, tol):
                step = X.shape[1] + 1
                report.breakdown(mode, step)
                report.termination[mode] = Termination("breakdown", step)
                active[mode] = False
                if on_breakdown == "stop":
                    halted = True
                    break
                continue
            err = float(np.linalg.norm(xp))
            bases[mode] = np.column_stack([X, xp / err])
            nrm[mode] = float(np.hypot(nrm[mode], err))
            report.record(mode, bases[mode].shape[1], err, nrm[mode],
                          [bases[l].shape[1] for l in (1, 2, 3)], src.count - start)
    for mode in (1, 2, 3):
        report.termination.setdefault(mode, Termination("stopped"))
    ranks = [bases[l].shape[1] for l in (1, 2, 3)]
    return bases[1], bases[2], bases[3], report.finish(ranks, src.count - start)


def pad(vec, n):
    """Zero-extend a small-coordinate vector after its basis has grown."""
    out = np.zeros(n)
    out[: len(vec)] = vec
    return out


def mode_rng(seed, mode):
    return np.random.default_rng((seed, mode))


def optimized_mkr(src, u1, v1, r_max, tol=1e-12, p_als=3, seed=0, retry=False):
    """Minimal Krylov recursion with ALS-optimised leading vectors.

    For each active mode the leading pair maximises the component of
    ``A (Y yhat) (Z zhat)`` orthogonal to the current basis, restricted to the
    spans of the other two bases; ``p_als`` ALS sweeps approximate it.  ALS
    starts from the previous optimum of that mode (zero-padded), else from a
    random pair drawn from ``default_rng((seed, mode))``.  A breakdown turns
    the mode off, after one random restart when ``retry`` is set.

    Returns ``(U, V, W, report)``.
    """
    if p_als < 1:
        raise ValueError("p_als must be >= 1")
    src = _counting(src)
    start = src.count
    report = RunReport("opt-mkr", estimator="restricted-spectral")
    bases, s0 = _initial_bases(src, u1, v1)
    rngs = {m: mode_rng(seed, m) for m in (1, 2, 3)}
    warm = {}
    nrm = {1: s0, 2: s0, 3: s0}
    flags = {m: bases[m].shape[1] > 0 for m in (1, 2, 3)}
    for m in (1, 2, 3):
        if not flags[m]:
            report.termination[m] = Termination("breakdown", 1)
    while any(flags.values()):
        for mode in (1, 2, 3):
            if not flags[mode]:
                continue
            X = bases[mode]
            if X.shape[1] >= r_max:
                flags[mode] = False
                report.termination[mode] = Termination("max_rank")
                continue
            Y = bases[next_mode(mode)]
            Z = bases[next_mode(mode, 2)]
            if mode in warm:
                yhat = pad(warm[mode][0], Y.shape[1])
                zhat = pad(warm[mode][1], Z.shape[1])
            else:
                yhat = random_unit(Y.shape[1], rngs[mode])
                zhat = random_unit(Z.shape[1], rngs[mode])
            attempts = 2 if retry else 1
            for attempt in range(attempts):
                res = projected_als(src, mode, X, Y, Z, yhat, zhat, p_als)
                x = src.tenvec(mode, Y @ res.v, Z @ res.w)
                xp = orthogonalize(x, X)
                broke = res.sigma == 0.0 or is_breakdown(x, xp, tol)
                if not broke:
                    break
                if attempt + 1 < attempts:
                    report.retries += 1
                    yhat = random_unit(Y.shape[1], rngs[mode])
                    zhat = random_unit(Z.shape[1], rngs[mode])
            if broke:
                step = X.shape[1] + 1
                report.breakdown(mode, step)
                report.termination[mode] = Termination("breakdown", step)
                flags[mode] = False
                continue
            err = float(np.linalg.norm(xp))
            bases[mode] = np.column_stack([X, xp / err])
            warm[mode] = (res.v, res.w)
            nrm[mode] = float(np.hypot(nrm[mode], err))
            report.record(mode, bases[mode].shape[1], err, nrm[mode],
                          [bases[l].shape[1] for l in (1, 2, 3)], src.count - start)
    ranks = [bases[l].shape[1] for l in (1, 2, 3)]
    return bases[1], bases[2], bases[3], report.finish(ranks, src.count - start)
