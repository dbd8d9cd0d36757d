"""Recover an exact low multilinear rank tensor with every pivoting strategy.

The tensor is only touched through tenvec products, and a counter shows
what each method paid.
"""

import numpy as np

from tenkrylov import CountingSource, TuckerSource, tucker_approximate
from tenkrylov.cli import exact_tucker

target = exact_tucker((30, 25, 20), (4, 3, 5), seed=11)
dense = target.full()
print(f"target shape {target.shape}, multilinear rank {target.ranks}")

for name in ("wsvd", "wlnc", "wsvdr", "wlncr"):
    src = CountingSource(TuckerSource(target))
    approx, report = tucker_approximate(src, name, eps=1e-10, seed=0, trim=True)
    err = np.linalg.norm(approx.full() - dense) / np.linalg.norm(dense)
    print(f"{name:6s} ranks {approx.ranks}  tenvecs {src.count:4d}  rel. error {err:.1e}")
