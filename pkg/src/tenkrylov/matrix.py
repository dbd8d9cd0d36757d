"""Wedderburn rank reduction for matrices given by matvecs.

Contains the single rank-one update, Wedderburn elimination with column
pivoting (WCP), Golub-Kahan-Lanczos bidiagonalisation and the WCP variant
whose leading vectors follow the Lanczos choice.
"""

from dataclasses import dataclass, field

import numpy as np

from .report import RunReport, Termination


class MatvecSource:
    """A linear map known through ``apply`` and ``apply_transpose``."""

    def __init__(self, matvec, rmatvec, dims):
        self._matvec = matvec
        self._rmatvec = rmatvec
        self.dims = tuple(dims)

    def apply(self, x):
        return np.asarray(self._matvec(np.asarray(x, dtype=np.float64)), dtype=np.float64)

    def apply_transpose(self, y):
        return np.asarray(self._rmatvec(np.asarray(y, dtype=np.float64)), dtype=np.float64)

    @property
    def T(self):
        """Transposed source; running WCP on it gives row pivoting (WRP)."""
        return MatvecSource(self._rmatvec, self._matvec, self.dims[::-1])


class DenseMatvec(MatvecSource):
    def __init__(self, a):
        self.matrix = np.asarray(a, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("expected a matrix")
        super().__init__(self.matrix.__matmul__, self.matrix.T.__matmul__, self.matrix.shape)

    @property
    def T(self):
        return DenseMatvec(self.matrix.T)


def as_matvec(a):
    if isinstance(a, MatvecSource):
        return a
    return DenseMatvec(a)


class SingularPivotError(ValueError):
    """Raised when ``x^T A y`` vanishes and the update is undefined."""


def wedderburn_update(a, x, y):
    """Rank-reducing update ``A - (A y)(x^T A) / (x^T A y)``."""
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ay = a @ y
    xa = x @ a
    omega = x @ ay
    scale = np.linalg.norm(a) * np.linalg.norm(x) * np.linalg.norm(y)
    if abs(omega) < 1e-14 * scale or scale == 0.0:
        raise SingularPivotError(f"x^T A y = {omega:.3e} is numerically zero")
    return a - np.outer(ay, xa) / omega


def optimal_pivot(a, y):
    """The unit ``x`` minimising the Wedderburn residual for fixed ``y``: ``Ay/||Ay||``."""
    ay = as_matvec(a).apply(y)
    nrm = np.linalg.norm(ay)
    if nrm == 0.0:
        raise ValueError("A y = 0, no pivot direction")
    return ay / nrm


def orthogonalize(x, basis):
    """Project ``x`` off ``span(basis)`` with two classical Gram-Schmidt passes."""
    if basis.shape[1] == 0:
        return x.copy()
    x = x - basis @ (basis.T @ x)
    return x - basis @ (basis.T @ x)


def is_breakdown(x, xp, tol):
    nx = np.linalg.norm(x)
    return nx == 0.0 or np.linalg.norm(xp) < tol * nx


@dataclass
class MatrixWedderburnState:
    """Orthonormal pivot basis ``X``, images ``B = A^T X`` and accumulators."""

    m: int
    n: int
    X: np.ndarray = None
    B: np.ndarray = None
    Y: np.ndarray = None
    omegas: list = field(default_factory=list)
    nrm: float = 0.0
    err: float = 0.0
    terminated: str = None

    def __post_init__(self):
        self.X = np.zeros((self.m, 0))
        self.B = np.zeros((self.n, 0))
        self.Y = np.zeros((self.n, 0))

    @property
    def k(self):
        return self.X.shape[1]

    def approximation(self):
        return self.X @ self.B.T


def random_leading(rng):
    def choose(state, a):
        y = rng.standard_normal(state.n)
        return y / np.linalg.norm(y)

    return choose


def lanczos_leading(y1, rng):
    """Leading vectors ``y_{k+1} = A^T x_k / ||A^T x_k||`` after a given ``y1``."""

    def choose(state, a):
        if state.k == 0:
            return np.asarray(y1, dtype=np.float64)
        b = state.B[:, -1]
        nb = np.linalg.norm(b)
        if nb == 0.0:
            y = rng.standard_normal(state.n)
            return y / np.linalg.norm(y)
        return b / nb

    return choose


def wcp_approximate(a, leading="random", tol=1e-12, eps=1e-8, r_max=None, seed=0, retry=True):
    """Wedderburn elimination with column pivoting.

    Parameters
    ----------
    a : array or MatvecSource
    leading : "random", "lanczos" or callable ``(state, a) -> y``
        Rule for the leading vector ``y_k``.
    tol : float
        Breakdown threshold on ``||x'|| / ||x||``.
    eps : float
        Stop once the newest update satisfies ``||b_k|| <= eps * nrm``.
    retry : bool
        On breakdown, repeat the step once with a fresh random ``y_k``.

    Returns
    -------
    X, B, report, state
        ``A ~ X @ B.T`` with ``X`` orthonormal and ``B = A^T X``; ``state``
        also keeps the normalised leading vectors and the pivots ``omega_k``.
    """
    a = as_matvec(a)
    m, n = a.dims
    r_max = min(m, n) if r_max is None else r_max
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    rng = np.random.default_rng(seed)
    if leading == "random":
        leading = random_leading(rng)
    elif leading == "lanczos":
        y1 = rng.standard_normal(n)
        leading = lanczos_leading(y1 / np.linalg.norm(y1), rng)
    elif not callable(leading):
        raise ValueError(f"unknown leading-vector rule {leading!r}")
    state = MatrixWedderburnState(m, n)
    report = RunReport("wcp", estimator="frobenius")
    fresh = random_leading(rng)
    while True:
        y = leading(state, a)
        x = a.apply(y)
        xp = orthogonalize(x, state.X)
        if is_breakdown(x, xp, tol) and retry:
            report.retries += 1
            y = fresh(state, a)
            x = a.apply(y)
            xp = orthogonalize(x, state.X)
        if is_breakdown(x, xp, tol):
            report.breakdown(1, state.k + 1)
            state.terminated = "breakdown"
            report.termination[1] = Termination("breakdown", state.k + 1)
            break
        nxp = np.linalg.norm(xp)
        xk = xp / nxp
        b = a.apply_transpose(xk)
        state.omegas.append(float(xk @ x))
        state.X = np.column_stack([state.X, xk])
        state.B = np.column_stack([state.B, b])
        state.Y = np.column_stack([state.Y, y / np.linalg.norm(y)])
        state.err = float(np.linalg.norm(b))
        state.nrm = float(np.sqrt(state.nrm**2 + state.err**2))
        report.record(1, state.k, state.err, state.nrm, (state.k,), 0)
        if state.err <= eps * state.nrm:
            state.terminated = "converged"
            break
        if state.k >= r_max:
            state.terminated = "max_rank"
            break
    if state.terminated != "breakdown":
        report.termination[1] = Termination(state.terminated)
    report.finish((state.k,), 0)
    return state.X, state.B, report, state


def lanczos_bidiag(a, x0, steps, reorth=True):
    """Golub-Kahan-Lanczos bidiagonalisation started from ``x0``.

    The start vector only seeds ``y_1 = A^T x0 / ||A^T x0||``; then::

        x_k = (A y_k - alpha_k x_{k-1}) / beta_k
        y_{k+1} = (A^T x_k - beta_k y_k) / alpha_{k+1}

    so ``X^T A Y`` is upper bidiagonal with ``alphas`` on the
    superdiagonal (shifted by one) and ``betas`` on the diagonal.

    Returns
    -------
    X, Y, alphas, betas
        Truncated at the first breakdown.
    """
    a = as_matvec(a)
    m, n = a.dims
    x0 = np.asarray(x0, dtype=np.float64)
    if not np.isclose(np.linalg.norm(x0), 1.0, atol=1e-12):
        raise ValueError("x0 must be a unit vector")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    X = np.zeros((m, 0))
    Y = np.zeros((n, 0))
    alphas, betas = [], []
    scale = 0.0
    x_prev = x0
    beta = 0.0
    for k in range(steps):
        y = a.apply_transpose(x_prev)
        if k > 0:
            y = y - beta * Y[:, -1]
        if reorth:
            y = orthogonalize(y, Y)
        alpha = np.linalg.norm(y)
        scale = max(scale, alpha)
        if alpha == 0.0 or alpha <= 1e-14 * scale:
            break
        Y = np.column_stack([Y, y / alpha])
        alphas.append(alpha)
        x = a.apply(Y[:, -1])
        if k > 0:
            x = x - alpha * X[:, -1]
        if reorth:
            x = orthogonalize(x, X)
        beta = np.linalg.norm(x)
        scale = max(scale, beta)
        if beta == 0.0 or beta <= 1e-14 * scale:
            break
        X = np.column_stack([X, x / beta])
        betas.append(beta)
        x_prev = X[:, -1]
    return X, Y, np.array(alphas), np.array(betas)


def wcp_lanczos(a, y1, tol=1e-12, eps=1e-8, r_max=None):
    """WCP whose leading vectors are ``y_{k+1} = A^T x_k``.

    Orthogonalisation uses the short two-term recurrence followed by a full
    reorthogonalisation sweep.  Returns ``(X, B, Y, report)`` with the
    approximation ``X @ B.T``; ``Y`` holds the normalised leading vectors.
    """
    a = as_matvec(a)
    m, n = a.dims
    y = np.asarray(y1, dtype=np.float64)
    if not np.isclose(np.linalg.norm(y), 1.0, atol=1e-12):
        raise ValueError("y1 must be a unit vector")
    r_max = min(m, n) if r_max is None else r_max
    X = np.zeros((m, 0))
    B = np.zeros((n, 0))
    Y = np.zeros((n, 0))
    nrm = 0.0
    report = RunReport("wcp-lanczos", estimator="frobenius")
    while True:
        x = a.apply(y)
        xp = x.copy()
        for j in range(max(0, X.shape[1] - 2), X.shape[1]):
            xp -= (X[:, j] @ xp) * X[:, j]
        xp = xp - X @ (X.T @ xp)
        if is_breakdown(x, xp, tol):
            report.breakdown(1, X.shape[1] + 1)
            report.termination[1] = Termination("breakdown", X.shape[1] + 1)
            break
        xk = xp / np.linalg.norm(xp)
        b = a.apply_transpose(xk)
        X = np.column_stack([X, xk])
        B = np.column_stack([B, b])
        Y = np.column_stack([Y, y / np.linalg.norm(y)])
        err = np.linalg.norm(b)
        nrm = np.sqrt(nrm**2 + err**2)
        report.record(1, X.shape[1], err, nrm, (X.shape[1],), 0)
        if err <= eps * nrm:
            report.termination[1] = Termination("converged")
            break
        if X.shape[1] >= r_max:
            report.termination[1] = Termination("max_rank")
            break
        y = b
    report.finish((X.shape[1],), 0)
    return X, B, Y, report
