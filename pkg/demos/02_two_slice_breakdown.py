"""Why plain Krylov recursion stalls, and how optimised pivots avoid it.

A tensor with only two non-zero frontal slices has mode-3 rank two, so the
mode-3 Krylov basis runs out of new directions after two steps. Plain MKR
then stops the whole recursion, while the optimised variants keep growing
the other two modes.
"""

import numpy as np

from tenkrylov import DenseSource, compute_core, mkr, optimized_mkr, range_start, tucker_approximate
from tenkrylov.cli import two_slice
from tenkrylov.core import TuckerTensor

a = two_slice(8, seed=1)
src = DenseSource(a)
u, v = range_start(src, seed=1)


def residual(U, V, W):
    t = TuckerTensor(compute_core(a, U, V, W), (U, V, W), (True,) * 3)
    return np.linalg.norm(t.full() - a) / np.linalg.norm(a)


U, V, W, rep = mkr(src, u, v, 8)
print("MKR      ranks", rep.ranks, "breakdowns (mode, step)", rep.breakdowns,
      f"residual {residual(U, V, W):.2e}")
U, V, W, rep = optimized_mkr(src, u, v, 8, seed=1)
print("opt-MKR  ranks", rep.ranks, f"residual {residual(U, V, W):.2e}")
t, rep = tucker_approximate(a, "wlncr", eps=0.0, seed=1)
print("WlncR    ranks", t.ranks, f"residual {np.linalg.norm(t.full() - a) / np.linalg.norm(a):.2e}")
