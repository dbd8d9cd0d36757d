"""Recompress the elementwise square of a Tucker tensor without forming it.

The square has an implicit core whose size is the cube of the squared
ranks. The Hadamard source evaluates tenvecs from the two factorizations
directly and records its largest intermediate array.
"""

import numpy as np

from tenkrylov import HadamardTuckerSource, tucker_approximate
from tenkrylov.cli import exact_tucker

t = exact_tucker(20, (4, 4, 4), seed=2)
src = HadamardTuckerSource(t, t)
approx, report = tucker_approximate(src, "wlncr", eps=1e-12, seed=0)
dense = t.full() ** 2
print(f"input ranks {t.ranks}, recompressed ranks {approx.ranks}")
print(f"relative error {np.linalg.norm(approx.full() - dense) / np.linalg.norm(dense):.1e}")
print(f"tenvecs {report.tenvec_count}, peak intermediate entries {src.peak_entries}, "
      f"implicit core entries {src.kron_core_entries}")
