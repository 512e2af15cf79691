"""batchfact: batched small-matrix factorizations and H2-matrix compression."""

from .core import (
    BatchError,
    as_matrix,
    batch_apply,
    frobenius,
    gemm,
    read_matrix_text,
    syrk,
    write_matrix_text,
)
from .qr import QrResult, batch_qr, householder_vector, qr
from .jacobi import (
    JacobiOptions,
    PairSchedule,
    SvdResult,
    batch_svd,
    jacobi_rotation,
    off_orthogonality,
    round_robin_schedule,
    svd,
)

__version__ = "0.1.0"
