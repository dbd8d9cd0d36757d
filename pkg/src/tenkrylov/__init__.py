"""Matrix-free Tucker approximation of 3-tensors through tenvec products."""

from .core import (
    TuckerTensor,
    as_tensor,
    frobenius_inner,
    frobenius_norm,
    linearize,
    mode_multiply,
    refold,
    spectral_norm_estimate,
    tucker_reconstruct,
    tucker_residual_norm,
    unfold,
    zero_tucker,
)
from .krylov import (
    Rank1Result,
    als_rank1,
    mkr,
    optimized_mkr,
    power_rank1_slice,
    projected_als,
    range_start,
)
from .matrix import (
    DenseMatvec,
    MatvecSource,
    SingularPivotError,
    lanczos_bidiag,
    optimal_pivot,
    wcp_approximate,
    wcp_lanczos,
    wedderburn_update,
)
from .oracle import OracleConfig, brute_rank1, hosvd, tucker_als
from .report import RunReport, StepRecord, Termination
from .sources import (
    CanonicalTensor,
    CountingSource,
    DenseSource,
    HadamardTuckerSource,
    SparseTensor3,
    TenvecSource,
    TuckerSource,
    as_source,
    tenvec_dense,
)
from .wedderburn import (
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

__version__ = "0.1.0"
