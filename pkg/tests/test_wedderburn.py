import numpy as np
import pytest

from tenkrylov.core import TuckerTensor, mode_multiply, orthonormality_error, random_orthonormal
from tenkrylov.krylov import als_rank1
from tenkrylov.oracle import brute_rank1
from tenkrylov.sources import CountingSource, DenseSource
from tenkrylov.wedderburn import (
    PivotStrategy,
    compute_core,
    dominant_subspace,
    pivot_wlnc,
    pivot_wlncr,
    pivot_wsvd,
    pivot_wsvdr,
    tucker_approximate,
    wlncr_drive,
)

from conftest import exact_tucker_dense, rel, unit

ALL = ("wsvd", "wlnc", "wsvdr", "wlncr")


def project(a, mode, X):
    return mode_multiply(a, mode, X @ X.T)


@pytest.mark.parametrize("name", ["wsvd", "wlnc"])
def test_dominant_subspace_exact_rank(name):
    for seed in range(5):
        t, a = exact_tucker_dense((12, 10, 9), (3, 4, 2), seed)
        for mode in (1, 2, 3):
            X, report = dominant_subspace(a, mode, name, eps=0.0, seed=seed)
            assert X.shape[1] == t.ranks[mode - 1]
            assert rel(project(a, mode, X), a) <= 1e-9
            assert orthonormality_error(X) < 1e-10


@pytest.mark.parametrize("name", ["wsvdr", "wlncr"])
def test_dominant_subspace_restricted(name):
    t, a = exact_tucker_dense((12, 10, 9), (3, 4, 2), 1)
    X, report = dominant_subspace(a, 1, name, eps=0.0, seed=1, shared=(t.factors[1], t.factors[2]))
    assert X.shape[1] == 3 and rel(project(a, 1, X), a) <= 1e-9
    with pytest.raises(ValueError):
        dominant_subspace(a, 1, name)


def test_dominant_subspace_rank_one(rng):
    u, v, w = unit(6, rng), unit(5, rng), unit(4, rng)
    a = 2.0 * np.einsum("i,j,k->ijk", u, v, w)
    for name in ("wsvd", "wlnc"):
        X, _ = dominant_subspace(a, 1, name, r_max=1)
        assert X.shape == (6, 1)
        assert min(np.linalg.norm(X[:, 0] - u), np.linalg.norm(X[:, 0] + u)) < 1e-10


def test_wsvd_breakdown_bounds_spectral_error():
    seen = 0
    for seed in range(8):
        _, a = exact_tucker_dense((9, 8, 7), (3, 2, 4), seed)
        noise = np.random.default_rng(seed).standard_normal(a.shape) * 1e-14
        a = a + noise
        tol = 1e-10
        for mode in (1, 2, 3):
            X, report = dominant_subspace(a, mode, "wsvd", tol=tol, eps=0.0, seed=seed)
            if report.breakdowns:
                seen += 1
                resid = a - project(a, mode, X)
                spec = brute_rank1(resid, restarts=5, sweeps=50, seed=0).sigma
                norm2 = brute_rank1(a, restarts=5, sweeps=50, seed=0).sigma
                assert spec < tol * norm2
    assert seen == 24


def test_subspace_state_accumulators(rng):
    a = rng.standard_normal((7, 6, 5))
    report = tucker_approximate(a, "wlnc", eps=1e-3, seed=2)[1]
    for mode in (1, 2, 3):
        recs = [r for r in report.steps if r.mode == mode]
        errs = np.array([r.err_estimate for r in recs])
        assert abs(recs[-1].nrm ** 2 - np.sum(errs ** 2)) <= 1e-12 * recs[-1].nrm ** 2


def test_pivot_wsvd_empty_basis_is_als(rng):
    a = rng.standard_normal((5, 4, 6))
    p = pivot_wsvd(DenseSource(a), np.zeros((5, 0)), 4, seed=3)
    r = np.random.default_rng(3)
    v0, w0 = unit(4, r), unit(6, r)
    ref = als_rank1(a, v0, w0, 4)
    assert p.sigma == ref.sigma and np.array_equal(p.y, ref.v) and np.array_equal(p.z, ref.w)


def test_pivot_wsvd_complete_basis(rng):
    a = rng.standard_normal((4, 4, 4))
    assert pivot_wsvd(DenseSource(a), np.eye(4), 3).sigma == 0.0


def test_pivot_wsvd_second_step_value():
    t, a = exact_tucker_dense((6, 6, 6), (2, 2, 2), 4)
    src = DenseSource(a)
    X, _ = dominant_subspace(a, 1, "wsvd", r_max=1, eps=0.0, seed=0)
    p = pivot_wsvd(src, X, 300, seed=1)
    projected = a - project(a, 1, X)
    oracle = brute_rank1(projected, restarts=20, sweeps=300, seed=2).sigma
    assert abs(p.sigma - oracle) <= 1e-7 * oracle


def test_pivot_wlnc(rng):
    u, v, w = unit(5, rng), unit(6, rng), unit(4, rng)
    a = np.einsum("i,j,k->ijk", u, v, w)
    c = CountingSource(DenseSource(a))
    p = pivot_wlnc(c, u, 3, seed=0)
    assert c.count == 6
    assert abs(abs(p.y @ v) - 1) < 1e-10 and abs(abs(p.z @ w) - 1) < 1e-10
    b = rng.standard_normal((5, 5, 5))
    x = unit(5, rng)
    p = pivot_wlnc(DenseSource(b), x, 100, seed=1)
    uu, s, vt = np.linalg.svd(np.einsum("ijk,i->jk", b, x))
    sign = np.sign(p.y @ uu[:, 0])
    assert np.max(np.abs(p.y - sign * uu[:, 0])) < 1e-7
    assert np.max(np.abs(p.z - sign * vt[0])) < 1e-7


def test_pivot_wsvdr_limits(rng):
    a = rng.standard_normal((5, 4, 6))
    src = DenseSource(a)
    X = random_orthonormal(5, 2, rng)
    start = (unit(4, rng), unit(6, rng))
    full = pivot_wsvdr(src, X, np.eye(4), np.eye(6), 5, start=start)
    free = pivot_wsvd(src, X, 5, start=start)
    assert abs(full.sigma - free.sigma) < 1e-12 * free.sigma
    np.testing.assert_allclose(full.y, free.y, atol=1e-12)
    # the restricted slice lies inside span X: nothing left to find
    b = np.zeros((5, 4, 6))
    b[:, 0, 0] = X[:, 0]
    p = pivot_wsvdr(DenseSource(b), X, np.eye(4)[:, :1], np.eye(6)[:, :1], 3)
    assert p.sigma < 1e-15


def test_pivot_wlncr_examples(rng):
    y, z, s = pivot_wlncr(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(y, [1, 0]) and np.testing.assert_allclose(z, [1, 0])
    assert s == 3.0
    a, b = rng.standard_normal(4), rng.standard_normal(3)
    y, z, s = pivot_wlncr(np.outer(a, b))
    assert abs(s - np.linalg.norm(a) * np.linalg.norm(b)) < 1e-12 * s
    assert np.allclose(np.outer(y, z) * s, np.outer(a, b))
    m = rng.standard_normal((6, 4))
    y, z, s = pivot_wlncr(m)
    uu, ss, vt = np.linalg.svd(m)
    sign = np.sign(y @ uu[:, 0])
    assert abs(s - ss[0]) < 1e-10 * ss[0]
    assert np.max(np.abs(y - sign * uu[:, 0])) < 1e-10 and np.max(np.abs(z - sign * vt[0])) < 1e-10
    assert pivot_wlncr(np.zeros((2, 2)))[2] == 0.0


def test_wlncr_drive_exact_and_consistent():
    t, a = exact_tucker_dense((10, 11, 12), (2, 3, 4), 6)
    c = CountingSource(DenseSource(a))
    out, report = wlncr_drive(c, eps=0.0, r_max=(2, 3, 4), seed=6)
    assert out.ranks == (2, 3, 4)
    assert rel(out.full(), a) <= 1e-9
    assert report.tenvec_count == c.count
    core = compute_core(a, *out.factors)
    assert rel(out.core, core) <= 1e-9


def test_wlncr_core_slabs_at_insertion():
    # each recorded err is the Frobenius norm of the slab A x X^T Y^T Z^T
    _, a = exact_tucker_dense((8, 8, 8), (3, 3, 3), 2)
    out, report = wlncr_drive(a, eps=0.0, r_max=3, seed=2)
    U, V, W = out.factors
    for rec in report.steps:
        k = rec.ranks
        sub = out.core[: k[0], : k[1], : k[2]]
        if rec.mode == 1:
            slab = sub[-1]
        elif rec.mode == 2:
            slab = sub[:, -1]
        else:
            slab = sub[:, :, -1]
        assert abs(np.linalg.norm(slab) - rec.err_estimate) <= 1e-12 * max(rec.nrm, 1.0)


def test_wlncr_budget_balanced():
    for r in (2, 3, 4, 5):
        _, a = exact_tucker_dense((12, 12, 12), (r, r, r), r)
        c = CountingSource(DenseSource(a))
        wlncr_drive(c, eps=0.0, r_max=r, seed=0)
        assert c.count <= r * r + 3 * r + 3


def test_wlncr_zero_tensor():
    out, report = wlncr_drive(np.zeros((3, 4, 5)), seed=0)
    assert out.ranks == (0, 0, 0) and out.shape == (3, 4, 5)
    assert report.outcome == "breakdown"


def test_compute_core_examples(rng):
    a = rng.standard_normal((3, 4, 5))
    np.testing.assert_allclose(compute_core(a, np.eye(3), np.eye(4), np.eye(5)), a, atol=1e-15)
    t, d = exact_tucker_dense((7, 6, 5), (2, 3, 2), 1)
    assert rel(compute_core(d, *t.factors), t.core) < 1e-11
    U, V, W = (random_orthonormal(n, r, rng) for n, r in ((3, 2), (4, 3), (5, 2)))
    ref = mode_multiply(mode_multiply(mode_multiply(a, 1, U.T), 2, V.T), 3, W.T)
    assert rel(compute_core(a, U, V, W), ref) < 1e-12
    c = CountingSource(DenseSource(a))
    compute_core(c, U, V, W)
    assert c.count == 6
    with pytest.raises(ValueError):
        compute_core(a, np.ones((3, 2)), V, W)


@pytest.mark.parametrize("name", ALL)
def test_tucker_approximate_exact_cube(name):
    for seed in range(5):
        _, a = exact_tucker_dense((11, 10, 12), (3, 3, 3), seed)
        out, report = tucker_approximate(a, name, eps=0.0, r_max=3, seed=seed)
        assert out.ranks == (3, 3, 3) and rel(out.full(), a) <= 1e-9
        for f in out.factors:
            assert orthonormality_error(f) < 1e-10


@pytest.mark.parametrize("name", ALL)
def test_tucker_approximate_finds_ranks_itself(name):
    _, a = exact_tucker_dense((9, 10, 11), (2, 3, 4), 9)
    out, report = tucker_approximate(a, name, eps=1e-10, seed=9, trim=True)
    assert out.ranks == (2, 3, 4) and rel(out.full(), a) <= 1e-9


def test_tucker_budgets():
    p_als, p_pow, r = 2, 2, 4
    _, a = exact_tucker_dense((12, 12, 12), (r, r, r), 3)
    budgets = {
        "wsvd": (9 * p_als + 3) * r + r * r,
        "wlnc": (6 * p_pow + 3) * r + r * r,
        "wsvdr": (9 * p_als + 3) * r + r * r,
        "wlncr": r * r + 3 * r + 3,
    }
    for name, bound in budgets.items():
        c = CountingSource(DenseSource(a))
        out, report = tucker_approximate(c, PivotStrategy(name, p_als, p_pow), eps=0.0, r_max=r)
        assert report.tenvec_count == c.count <= bound, name


@pytest.mark.parametrize("name", ALL)
def test_eps_with_dominant_component(name):
    rng = np.random.default_rng(3)
    u, v, w = unit(10, rng), unit(10, rng), unit(10, rng)
    a = 1e3 * np.einsum("i,j,k->ijk", u, v, w) + rng.standard_normal((10, 10, 10)) / np.sqrt(1000)
    raw, rep = tucker_approximate(a, name, eps=0.5, seed=0)
    trimmed, _ = tucker_approximate(a, name, eps=0.5, seed=0, trim=True)
    # the stopping test appends the negligible vector before it can fire
    assert raw.ranks == (2, 2, 2)
    assert trimmed.ranks == (1, 1, 1)
    assert all(t.reason == "converged" for t in rep.termination.values())


@pytest.mark.parametrize("name", ALL)
def test_zero_tensor(name):
    out, report = tucker_approximate(np.zeros((3, 4, 5)), name, seed=0)
    assert out.ranks == (0, 0, 0)
    assert not out.full().any()


@pytest.mark.parametrize("name", ALL)
def test_monotone_true_error(name):
    rng = np.random.default_rng(5)
    a = rng.standard_normal((7, 6, 8))
    out, report = tucker_approximate(a, name, eps=1e-4, r_max=5, seed=1)
    U, V, W = out.factors
    ranks = {1: 0, 2: 0, 3: 0}
    prev = np.inf
    for rec in report.steps:
        ranks[rec.mode] = rec.rank
        if min(ranks.values()) == 0:
            continue
        sub = tuple(f[:, : ranks[m]] for m, f in zip((1, 2, 3), (U, V, W)))
        err = rel(TuckerTensor(compute_core(a, *sub), sub).full(), a)
        assert err <= prev + 1e-12
        prev = err


def test_wsvd_no_breakdown_before_eps():
    for seed in range(10):
        a = np.random.default_rng(seed).standard_normal((6, 7, 5))
        out, report = tucker_approximate(a, "wsvd", eps=1e-3, seed=seed)
        assert report.breakdowns == []


def test_strategy_validation():
    with pytest.raises(ValueError):
        PivotStrategy("svd")
    with pytest.raises(ValueError):
        PivotStrategy("wsvd", p_als=0)
    with pytest.raises(ValueError):
        tucker_approximate(np.ones((2, 2, 2)), "wsvd", eps=1.5)
