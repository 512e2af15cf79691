"""Randomized truncated SVD built from the batched QR, Jacobi SVD and gemm.

Two-phase scheme: sample the range with k+p Gaussian vectors and
orthogonalize (Y = A @ Omega, Y = Q R_y), then factor the small projected
matrix B = Q^T A through the QR of its transpose and the Jacobi SVD of the
triangular factor. All k+p computed triplets are returned; callers that
want exactly k truncate themselves.
"""

from dataclasses import dataclass

import numpy as np

from .core import as_matrix, batch_apply
from .jacobi import JacobiOptions, svd
from .qr import qr


@dataclass
class RsvdOptions:
    k: int
    p: int = 8  # oversampling
    seed: int = 0
    q_iterations: int = 0  # reserved; subspace iteration is not implemented

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.p < 0:
            raise ValueError("p must be >= 0")
        if self.q_iterations != 0:
            raise ValueError("q_iterations is reserved and must be 0")


@dataclass
class TruncatedSvd:
    u: np.ndarray  # m x (k+p)
    s: np.ndarray  # length k+p, descending
    v: np.ndarray  # n x (k+p)


def gaussian_matrix(rows, cols, seed, dtype=np.float64):
    """I.i.d. standard normal matrix from a counter-based (Philox) stream.

    Identical (rows, cols, seed, dtype) give bitwise identical output on
    any platform.
    """
    if rows < 0 or cols < 0:
        raise ValueError("rows and cols must be >= 0")
    key = int(seed) & ((1 << 128) - 1)
    rng = np.random.Generator(np.random.Philox(key=key))
    out = rng.standard_normal((rows, cols), dtype=np.dtype(dtype))
    return np.asfortranarray(out)


def rsvd(a, opts):
    """Randomized SVD capturing the top k (+p oversampled) triplets of a."""
    a = as_matrix(a)
    m, n = a.shape
    width = opts.k + opts.p
    if width > min(m, n):
        raise ValueError(
            f"k + p = {width} exceeds min(m, n) = {min(m, n)} for shape {a.shape}"
        )
    omega = gaussian_matrix(n, width, opts.seed, dtype=a.dtype)
    y = a @ omega
    q = qr(y).q
    b = q.T @ a
    fb = qr(np.asfortranarray(b.T))
    inner = svd(
        np.asfortranarray(fb.r.T),
        JacobiOptions(ordering="round_robin", accumulate_v=True),
    )
    u = np.asfortranarray(q @ inner.u)
    v = np.asfortranarray(fb.q @ inner.v)
    return TruncatedSvd(u=u, s=inner.sigma, v=v)


def batch_rsvd(batch, opts, *, threads=1):
    """Per-entry :func:`rsvd` with per-entry seeds ``opts.seed ^ index``."""
    entries = list(batch)
    jobs = [
        (a, RsvdOptions(k=opts.k, p=opts.p, seed=opts.seed ^ i))
        for i, a in enumerate(entries)
    ]
    return batch_apply(jobs, lambda job: rsvd(job[0], job[1]), threads=threads)
