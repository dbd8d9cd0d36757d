"""Wedderburn rank reduction on a matrix, and its Lanczos twin.

Started from the same vector, WCP with Lanczos-like pivots builds the same
left basis as Golub-Kahan bidiagonalization.
"""

import numpy as np

from tenkrylov import lanczos_bidiag, wcp_approximate, wcp_lanczos

rng = np.random.default_rng(0)
a = rng.standard_normal((40, 6)) @ rng.standard_normal((6, 30))
a += 1e-6 * rng.standard_normal(a.shape)

X, B, report, _ = wcp_approximate(a, "random", eps=1e-4, seed=0)
print(f"WCP kept {X.shape[1]} columns, residual {np.linalg.norm(a - X @ B.T) / np.linalg.norm(a):.1e}")

x0 = rng.standard_normal(40)
x0 /= np.linalg.norm(x0)
Xl, _, _, _ = lanczos_bidiag(a, x0, 5)
y1 = a.T @ x0
Xw, _, _, _ = wcp_lanczos(a, y1 / np.linalg.norm(y1), eps=1e-300, r_max=5)
signs = np.sign(np.sum(Xw * Xl, axis=0))
print(f"max |X_wcp - X_lanczos| up to sign: {np.max(np.abs(Xw - Xl * signs)):.1e}")
