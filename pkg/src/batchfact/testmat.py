"""Test matrices with a prescribed singular spectrum.

Matrices are built as P diag(sigma) Q^T from seeded random orthonormal
factors, and the exact sigma used is returned alongside, so SVD tests can
check against the construction instead of a second SVD implementation.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import as_matrix
from .qr import qr
from .rsvd import gaussian_matrix

_SEED_MIX = 0x9E3779B97F4A7C15  # distinct stream for the right factor

_MODES = ("geometric", "arithmetic", "explicit")


@dataclass
class SpectrumSpec:
    n: int
    mode: str = "geometric"
    cond: float = 1.0
    rank: Optional[int] = None  # None means full rank; trailing sigma are 0
    values: Optional[Sequence[float]] = None  # explicit mode only

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")
        if self.cond < 1.0:
            raise ValueError("cond must be >= 1")
        if self.rank is None:
            self.rank = self.n if self.mode != "explicit" else len(self.values)
        if not 1 <= self.rank <= self.n:
            raise ValueError("rank must be in [1, n]")
        if self.mode == "explicit":
            if self.values is None:
                raise ValueError("explicit mode needs values")
            vals = np.asarray(self.values, dtype=np.float64)
            if vals.ndim != 1 or len(vals) != self.rank:
                raise ValueError("values must be a vector of length rank")
            if np.any(vals < 0) or np.any(np.diff(vals) > 0):
                raise ValueError("values must be nonnegative and descending")


def spectrum(spec):
    """Length-n singular value vector for a :class:`SpectrumSpec`."""
    sigma = np.zeros(spec.n, dtype=np.float64)
    r = spec.rank
    if spec.mode == "explicit":
        sigma[:r] = np.asarray(spec.values, dtype=np.float64)
    elif r == 1:
        sigma[0] = 1.0
    elif spec.mode == "geometric":
        i = np.arange(r)
        sigma[:r] = spec.cond ** (-i / (r - 1))
    else:  # arithmetic
        i = np.arange(r)
        sigma[:r] = 1.0 - (1.0 - 1.0 / spec.cond) * i / (r - 1)
    return sigma


def random_orthonormal(m, n, seed):
    """Seeded random matrix with orthonormal columns and fixed column signs.

    QR of a Gaussian matrix; each column is flipped so the corresponding
    diagonal of R is positive, which pins the sign across platforms.
    """
    if m < n:
        raise ValueError(f"random_orthonormal requires m >= n, got {m} x {n}")
    res = qr(gaussian_matrix(m, n, seed))
    q = res.q
    d = np.diagonal(res.r)
    q[:, d < 0] *= -1.0
    return q


def make_matrix(m, spec, seed, dtype=np.float64):
    """Matrix with the prescribed spectrum plus the exact sigma used.

    A = P diag(sigma) Q^T with seeded orthonormal P (m x n) and Q (n x n).
    """
    if m < spec.n:
        raise ValueError(f"make_matrix requires m >= spec.n, got {m} < {spec.n}")
    sigma = spectrum(spec)
    p = random_orthonormal(m, spec.n, seed)
    q = random_orthonormal(spec.n, spec.n, seed ^ _SEED_MIX)
    a = (p * sigma[None, :]) @ q.T
    return as_matrix(a, dtype=dtype), sigma
