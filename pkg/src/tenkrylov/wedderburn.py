"""Wedderburn elimination for dominant mode subspaces of 3-tensors.

Each mode basis grows by ``x := A y_k z_k`` orthogonalised against the
current basis.  Pivoting strategies differ in how the leading pair
``(y_k, z_k)`` is chosen:

``wsvd``
    ALS maximisation of the orthogonal component over all unit pairs.
``wlnc``
    Top singular pair of the slice ``A x_m x_k^T`` from power iterations.
``wsvdr``
    As ``wsvd`` but restricted to the spans of the other two bases.
``wlncr``
    Top singular pair of the newest core slice; the core grows slab by slab.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import TuckerTensor, cyclic_axes, orthonormality_error, random_unit
from .krylov import (
    _counting,
    _initial_bases,
    mode_rng,
    next_mode,
    pad,
    power_rank1_slice,
    projected_als,
    range_start,
)
from .matrix import is_breakdown, orthogonalize
from .report import RunReport, Termination

STRATEGIES = ("wsvd", "wlnc", "wsvdr", "wlncr")
ESTIMATORS = {
    "wsvd": "spectral",
    "wlnc": "spectral",
    "wsvdr": "restricted-spectral",
    "wlncr": "restricted-frobenius",
}


@dataclass(frozen=True)
class PivotStrategy:
    name: str = "wlncr"
    p_als: int = 3
    p_pow: int = 3

    def __post_init__(self):
        if self.name not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.name!r}; pick one of {STRATEGIES}")
        if self.p_als < 1 or self.p_pow < 1:
            raise ValueError("p_als and p_pow must be >= 1")

    @property
    def restricted(self):
        return self.name.endswith("r")


def as_strategy(strategy):
    if isinstance(strategy, PivotStrategy):
        return strategy
    return PivotStrategy(str(strategy).lower())


class Pivot(NamedTuple):
    y: np.ndarray
    z: np.ndarray
    sigma: float
    yhat: np.ndarray = None
    zhat: np.ndarray = None


def pivot_wsvd(src, X, p_als=3, seed=0, mode=1, start=None):
    """Leading pair maximising ``||(I - X X^T) A y z||`` by ``p_als`` ALS sweeps."""
    rng = np.random.default_rng(seed)
    _, a1, a2 = cyclic_axes(mode)
    if start is None:
        start = (random_unit(src.shape[a1], rng), random_unit(src.shape[a2], rng))
    res = projected_als(src, mode, X, None, None, start[0], start[1], p_als)
    return Pivot(res.v, res.w, res.sigma)


def pivot_wlnc(src, x, p_pow=3, seed=0, mode=1):
    """Top singular pair of ``A x_mode x^T`` by ``p_pow`` power sweeps (``2 p_pow`` tenvecs)."""
    rng = np.random.default_rng(seed)
    _, _, a2 = cyclic_axes(mode)
    res = power_rank1_slice(src, mode, x, random_unit(src.shape[a2], rng), p_pow)
    return Pivot(res.v, res.w, res.sigma)


def pivot_wsvdr(src, X, Y, Z, p_als=3, seed=0, mode=1, start=None):
    """``pivot_wsvd`` restricted to ``y = Y yhat``, ``z = Z zhat``."""
    rng = np.random.default_rng(seed)
    if start is None:
        start = (random_unit(Y.shape[1], rng), random_unit(Z.shape[1], rng))
    res = projected_als(src, mode, X, Y, Z, start[0], start[1], p_als)
    return Pivot(Y @ res.v, Z @ res.w, res.sigma, res.v, res.w)


def pivot_wlncr(core_slice):
    """Best rank-one approximation ``sigma yhat zhat^T`` of a small dense matrix.

    The sign is fixed so that the largest-magnitude entry of ``yhat`` is positive.
    """
    b = np.atleast_2d(np.asarray(core_slice, dtype=np.float64))
    if b.size == 0:
        return np.zeros(b.shape[0]), np.zeros(b.shape[1]), 0.0
    uu, s, vt = np.linalg.svd(b)
    yhat, zhat, sigma = uu[:, 0], vt[0], float(s[0])
    if sigma == 0.0:
        return np.zeros(b.shape[0]), np.zeros(b.shape[1]), 0.0
    if yhat[np.argmax(np.abs(yhat))] < 0:
        yhat, zhat = -yhat, -zhat
    return yhat, zhat, sigma


@dataclass
class SubspaceState:
    """Growing orthonormal basis of one mode with its error accumulators."""

    mode: int
    X: np.ndarray
    err: float = 0.0
    nrm: float = 0.0
    last: tuple = None
    terminated: Termination = None
    errs: list = field(default_factory=list)

    @property
    def k(self):
        return self.X.shape[1]

    @property
    def active(self):
        return self.terminated is None


class _ModeBuilder:
    """One Wedderburn subspace builder; ``step`` performs one iteration.

    Restricted strategies read the current bases of the other modes from
    ``shared`` (a dict mode -> basis) at every step.
    """

    def __init__(self, src, mode, strategy, tol, eps, r_max, seed, shared, report,
                 retry, X0=None):
        self.src = src
        self.mode = mode
        self.strategy = strategy
        self.tol = tol
        self.eps = eps
        self.r_max = r_max
        self.rng = mode_rng(seed, mode)
        self.shared = shared
        self.report = report
        self.retry = retry
        n = src.shape[mode - 1]
        X = np.zeros((n, 0)) if X0 is None else X0
        self.state = SubspaceState(mode, X)
        self.warm = None
        self.start_count = src.count

    def _other(self, shift):
        return self.shared[next_mode(self.mode, shift)]

    def _random_pair(self):
        m1, m2 = next_mode(self.mode) - 1, next_mode(self.mode, 2) - 1
        if self.strategy.restricted:
            Y, Z = self._other(1), self._other(2)
            return (Y @ random_unit(Y.shape[1], self.rng),
                    Z @ random_unit(Z.shape[1], self.rng))
        return (random_unit(self.src.shape[m1], self.rng),
                random_unit(self.src.shape[m2], self.rng))

    def _leading(self):
        """Leading pair for the next step, or ``None`` if the pivot vanished."""
        s = self.strategy
        X = self.state.X
        if s.name == "wsvd":
            piv = pivot_wsvd(self.src, X, s.p_als, self.rng, self.mode, start=self.warm)
            self.warm = (piv.y, piv.z)
            return (piv.y, piv.z) if piv.sigma > 0 else None
        if s.name == "wlnc":
            if self.state.last is None:
                return self._random_pair()
            return self.state.last
        Y, Z = self._other(1), self._other(2)
        if s.name == "wsvdr":
            start = None
            if self.warm is not None:
                start = (pad(self.warm[0], Y.shape[1]), pad(self.warm[1], Z.shape[1]))
            piv = pivot_wsvdr(self.src, X, Y, Z, s.p_als, self.rng, self.mode, start=start)
            self.warm = (piv.yhat, piv.zhat)
            return (piv.y, piv.z) if piv.sigma > 0 else None
        # wlncr with fixed shared bases: pivot from the newest restricted slice
        if self.state.last is None:
            return self._random_pair()
        yhat, zhat, sigma = pivot_wlncr(self.state.last)
        return (Y @ yhat, Z @ zhat) if sigma > 0 else None

    def _estimate(self, xk, xp_norm):
        """Error estimate for the newest basis vector."""
        s = self.strategy
        if s.name in ("wsvd", "wsvdr"):
            return xp_norm
        if s.name == "wlnc":
            piv = pivot_wlnc(self.src, xk, s.p_pow, self.rng, self.mode)
            self.state.last = (piv.y, piv.z)
            return piv.sigma
        Y, Z = self._other(1), self._other(2)
        slab = restricted_slice(self.src, self.mode, xk, Y, Z)
        self.state.last = slab
        return float(np.linalg.norm(slab))

    def step(self):
        st = self.state
        if st.k >= self.r_max:
            st.terminated = Termination("max_rank")
            return False
        attempts = 2 if self.retry else 1
        for attempt in range(attempts):
            lead = self._leading() if attempt == 0 else self._random_pair()
            if lead is not None:
                x = self.src.tenvec(self.mode, *lead)
                xp = orthogonalize(x, st.X)
                if not is_breakdown(x, xp, self.tol):
                    break
            if attempt + 1 < attempts:
                self.report.retries += 1
        else:
            st.terminated = Termination("breakdown", st.k + 1)
            self.report.breakdown(self.mode, st.k + 1)
            return False
        nxp = float(np.linalg.norm(xp))
        xk = xp / nxp
        st.X = np.column_stack([st.X, xk])
        st.err = float(self._estimate(xk, nxp))
        st.nrm = float(np.hypot(st.nrm, st.err))
        st.errs.append(st.err)
        ranks = [self.shared[l].shape[1] if l != self.mode else st.k for l in (1, 2, 3)] \
            if self.shared is not None else [st.k if l == self.mode else 0 for l in (1, 2, 3)]
        self.report.record(self.mode, st.k, st.err, st.nrm, ranks, self.src.count)
        if st.err <= self.eps * st.nrm:
            st.terminated = Termination("converged")
            return False
        if st.k >= self.r_max:
            st.terminated = Termination("max_rank")
            return False
        return True


def restricted_slice(src, mode, x, Y, Z):
    """``A x_mode x^T x_{mode+1} Y^T x_{mode+2} Z^T`` from ``Z.shape[1]`` tenvecs."""
    m1 = next_mode(mode)
    cols = [Y.T @ src.tenvec(m1, Z[:, s], x) for s in range(Z.shape[1])]
    if not cols:
        return np.zeros((Y.shape[1], 0))
    return np.column_stack(cols)


def _check_common(tol, eps, r_max):
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    if r_max is not None and min(np.atleast_1d(r_max)) < 1:
        raise ValueError("r_max must be >= 1")


def dominant_subspace(src, mode, strategy="wsvd", tol=1e-12, eps=1e-8, r_max=None, seed=0,
                      shared=None, retry=True):
    """Grow an orthonormal basis of the dominant mode-``mode`` subspace.

    Restricted strategies need ``shared``: a pair ``(Y, Z)`` of orthonormal
    bases for modes ``mode+1`` and ``mode+2``, held fixed during the run.
    On breakdown the step is repeated once with a random leading pair when
    ``retry`` is set, then the current basis is returned.

    Returns ``(X, report)``.
    """
    strategy = as_strategy(strategy)
    _check_common(tol, eps, r_max)
    src = _counting(src)
    start = src.count
    r_max = src.shape[mode - 1] if r_max is None else int(r_max)
    report = RunReport(strategy.name, estimator=ESTIMATORS[strategy.name])
    shared_map = None
    if strategy.restricted:
        if shared is None:
            raise ValueError(f"strategy {strategy.name} needs the other two mode bases")
        shared_map = {next_mode(mode): np.asarray(shared[0]), next_mode(mode, 2): np.asarray(shared[1])}
        shared_map[mode] = None
    b = _ModeBuilder(src, mode, strategy, tol, eps, r_max, seed, shared_map, report, retry)
    if shared_map is not None:
        shared_map[mode] = b.state.X
    while b.step():
        if shared_map is not None:
            shared_map[mode] = b.state.X
    report.termination[mode] = b.state.terminated
    _rebase_counts(report, start)
    return b.state.X, report.finish([b.state.k if l == mode else 0 for l in (1, 2, 3)],
                                    src.count - start)


def _rebase_counts(report, start):
    for rec in report.steps:
        rec.tenvecs -= start


def compute_core(src, U, V, W):
    """Optimal core ``A x_1 U^T x_2 V^T x_3 W^T`` from ``r2 * r3`` tenvecs."""
    for l, f in enumerate((U, V, W)):
        if orthonormality_error(f) > 1e-8:
            raise ValueError(f"basis {l + 1} is not orthonormal")
    from .sources import as_source

    src = as_source(src)
    core = np.zeros((U.shape[1], V.shape[1], W.shape[1]))
    if core.size == 0:
        return core
    for q in range(V.shape[1]):
        for s in range(W.shape[1]):
            core[:, q, s] = U.T @ src.tenvec(1, V[:, q], W[:, s])
    return core


def wlncr_drive(src, u0=None, v0=None, w0=None, tol=1e-12, eps=1e-8, r_max=None, seed=0,
                retry=False):
    """Wedderburn elimination with restricted Lanczos-like pivoting.

    Bases and core grow together.  Mode-3 fibres ``A x_p y_q`` are cached so
    that the core costs exactly one tenvec per ``(x_p, y_q)`` pair; a new
    mode-3 vector only projects the cached fibres.  Modes are visited
    round-robin; a mode stops on breakdown, on ``err < eps * nrm`` (with
    ``err`` the Frobenius norm of its newest core slab) or at ``r_max``.

    Returns ``(TuckerTensor, report)``.
    """
    _check_common(tol, eps, r_max)
    src = _counting(src)
    start = src.count
    shape = src.shape
    rmax = _rank_caps(r_max, shape)
    rng = np.random.default_rng(seed)
    u0 = random_unit(shape[0], rng) if u0 is None else np.asarray(u0, dtype=np.float64)
    v0 = random_unit(shape[1], rng) if v0 is None else np.asarray(v0, dtype=np.float64)
    w0 = random_unit(shape[2], rng) if w0 is None else np.asarray(w0, dtype=np.float64)
    report = RunReport("wlncr", estimator=ESTIMATORS["wlncr"])

    firsts = [src.tenvec(1, v0, w0), src.tenvec(2, w0, u0), src.tenvec(3, u0, v0)]
    norms = [np.linalg.norm(f) for f in firsts]
    if min(norms) == 0.0:
        # zero tensor (or a start annihilated by it): rank-0 result
        for m in (1, 2, 3):
            report.termination[m] = Termination("breakdown", 1)
            report.breakdown(m, 1)
        empty = TuckerTensor(np.zeros((0, 0, 0)), tuple(np.zeros((n, 0)) for n in shape),
                             (True, True, True))
        return empty, report.finish((0, 0, 0), src.count - start)
    bases = {m: (firsts[m - 1] / norms[m - 1])[:, None] for m in (1, 2, 3)}
    fibres = src.tenvec(3, bases[1][:, 0], bases[2][:, 0])[:, None, None]
    core = np.einsum("ipq,is->pqs", fibres, bases[3])
    nrm = float(np.linalg.norm(core))
    flags = {1: True, 2: True, 3: True}
    mode_rngs = {m: mode_rng(seed, m) for m in (1, 2, 3)}

    while any(flags.values()):
        for mode in (1, 2, 3):
            if not flags[mode]:
                continue
            X = bases[mode]
            if X.shape[1] >= rmax[mode - 1]:
                flags[mode] = False
                report.termination[mode] = Termination("max_rank")
                continue
            Y, Z = bases[next_mode(mode)], bases[next_mode(mode, 2)]
            newest = np.transpose(core, cyclic_axes(mode))[-1]
            yhat, zhat, sigma = pivot_wlncr(newest)
            attempts = 2 if retry else 1
            broke = True
            for attempt in range(attempts):
                if sigma > 0:
                    x = src.tenvec(mode, Y @ yhat, Z @ zhat)
                    xp = orthogonalize(x, X)
                    broke = is_breakdown(x, xp, tol)
                if not broke or attempt + 1 == attempts:
                    break
                report.retries += 1
                yhat = random_unit(Y.shape[1], mode_rngs[mode])
                zhat = random_unit(Z.shape[1], mode_rngs[mode])
                sigma = 1.0
            if broke:
                report.breakdown(mode, X.shape[1] + 1)
                report.termination[mode] = Termination("breakdown", X.shape[1] + 1)
                flags[mode] = False
                continue
            xk = xp / np.linalg.norm(xp)
            bases[mode] = np.column_stack([X, xk])
            if mode == 1:
                new = np.stack([src.tenvec(3, xk, bases[2][:, q])
                                for q in range(bases[2].shape[1])], axis=1)[:, None, :]
                fibres = np.concatenate([fibres, new], axis=1)
                slab = np.einsum("ipq,is->pqs", new, bases[3])
                core = np.concatenate([core, slab], axis=0)
            elif mode == 2:
                new = np.stack([src.tenvec(3, bases[1][:, p], xk)
                                for p in range(bases[1].shape[1])], axis=1)[:, :, None]
                fibres = np.concatenate([fibres, new], axis=2)
                slab = np.einsum("ipq,is->pqs", new, bases[3])
                core = np.concatenate([core, slab], axis=1)
            else:
                slab = np.einsum("ipq,i->pq", fibres, xk)[:, :, None]
                core = np.concatenate([core, slab], axis=2)
            err = float(np.linalg.norm(slab))
            nrm = float(np.hypot(nrm, err))
            report.record(mode, bases[mode].shape[1], err, nrm,
                          [bases[l].shape[1] for l in (1, 2, 3)], src.count - start)
            if err < eps * nrm:
                flags[mode] = False
                report.termination[mode] = Termination("converged")
    t = TuckerTensor(core, (bases[1], bases[2], bases[3]), (True, True, True), ortho_tol=1e-10)
    return t, report.finish(t.ranks, src.count - start)


def _rank_caps(r_max, shape):
    if r_max is None:
        return tuple(shape)
    caps = np.broadcast_to(np.asarray(r_max, dtype=int), (3,))
    return tuple(int(min(c, n)) for c, n in zip(caps, shape))


def tucker_approximate(src, strategy="wlncr", tol=1e-12, eps=1e-8, r_max=None, seed=0,
                       retry=None, trim=False):
    """Tucker approximation with any pivoting strategy.

    ``wsvd``/``wlnc`` build the three mode bases independently (stepped in
    lockstep) and then form the optimal core; ``wsvdr`` shares the bases
    between modes on the optimised minimal Krylov schedule; ``wlncr`` grows
    bases and core together.  With ``trim`` the last basis vector of each
    ``converged`` mode, whose contribution fell below ``eps``, is dropped.

    Returns ``(TuckerTensor, report)``.
    """
    strategy = as_strategy(strategy)
    _check_common(tol, eps, r_max)
    src = _counting(src)
    start = src.count
    shape = src.shape
    rmax = _rank_caps(r_max, shape)

    if strategy.name == "wlncr":
        t, report = wlncr_drive(src, tol=tol, eps=eps, r_max=rmax, seed=seed,
                                retry=bool(retry))
        report.core_tenvecs = 0
        if trim:
            t = _trim(t, report)
        report.algorithm = "wlncr"
        return t, report

    report = RunReport(strategy.name, estimator=ESTIMATORS[strategy.name])
    shared = {}
    if strategy.name == "wsvdr":
        u1, v1 = range_start(src, seed)
        init, s0 = _initial_bases(src, u1, v1)
        shared.update(init)
        if shared[3].shape[1] == 0:
            for m in (1, 2, 3):
                report.termination[m] = Termination("breakdown", 1)
            return _zero_result(shape), report.finish((0, 0, 0), src.count - start)
        retry = False if retry is None else retry
    else:
        retry = True if retry is None else retry
    builders = {}
    for m in (1, 2, 3):
        builders[m] = _ModeBuilder(
            src, m, strategy, tol, eps, rmax[m - 1], seed,
            shared, report, retry, X0=shared.get(m),
        )
        shared[m] = builders[m].state.X
        if strategy.name == "wsvdr":
            builders[m].state.nrm = s0
    active = [1, 2, 3]
    while active:
        for m in list(active):
            if not builders[m].step():
                active.remove(m)
            shared[m] = builders[m].state.X
    for m in (1, 2, 3):
        report.termination[m] = builders[m].state.terminated
    _rebase_counts(report, start)
    U, V, W = (builders[m].state.X for m in (1, 2, 3))
    before = src.count
    core = compute_core(src, U, V, W)
    report.core_tenvecs = src.count - before
    t = TuckerTensor(core, (U, V, W), (True, True, True), ortho_tol=1e-10)
    if trim:
        t = _trim(t, report)
    return t, report.finish(t.ranks, src.count - start)


def _zero_result(shape):
    return TuckerTensor(np.zeros((0, 0, 0)), tuple(np.zeros((n, 0)) for n in shape),
                        (True, True, True))


def _trim(t, report):
    """Drop the final vector of every mode whose last estimate met the eps test."""
    keep = list(t.ranks)
    for m in (1, 2, 3):
        term = report.termination.get(m)
        if term is not None and term.reason == "converged" and keep[m - 1] > 1:
            keep[m - 1] -= 1
    if tuple(keep) == t.ranks:
        return t
    core = t.core[: keep[0], : keep[1], : keep[2]]
    factors = tuple(f[:, :r] for f, r in zip(t.factors, keep))
    report.ranks = tuple(keep)
    return TuckerTensor(core, factors, (True, True, True), ortho_tol=1e-10)
