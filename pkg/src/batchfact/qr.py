"""Householder QR of single matrices and batches.

The factorization is organized panel-wise: a block of ``panel_width``
columns is factored with reflectors applied immediately inside the panel,
then the panel's reflectors are applied one at a time (vector form, no
blocked WY accumulation) to the trailing submatrix before recursing on it.
Q is accumulated explicitly in reduced form.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import as_matrix, batch_apply

DEFAULT_PANEL_WIDTH = 16


@dataclass
class QrResult:
    q: np.ndarray  # m x n, orthonormal columns
    r: np.ndarray  # n x n, upper triangular with exact zeros below


def householder_vector(x):
    """Reflector (v, tau) with v[0] = 1 mapping x to (beta, 0, ..., 0).

    beta carries the sign opposite to x[0] so the subtraction never
    cancels. A zero (or already collinear-with-e1) tail gives tau = 0 and
    the identity reflector.
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("householder_vector expects a nonempty vector")
    v = x.copy()
    v[0] = 1.0
    alpha = float(x[0])
    if x.size == 1:
        return v, 0.0
    tail = x[1:]
    tail_sq = float(tail.dot(tail))
    if tail_sq == 0.0:
        return v, 0.0
    beta = -math.copysign(math.hypot(alpha, math.sqrt(tail_sq)), alpha)
    tau = (beta - alpha) / beta
    v[1:] = x[1:] / (alpha - beta)
    return v, tau


def _apply_reflector(v, tau, block, scratch=None):
    # block <- (I - tau v v^T) block, in place
    w = v @ block
    w *= tau
    if scratch is None:
        block -= np.outer(v, w)
    else:
        out = scratch[: v.shape[0], : w.shape[0]]
        np.multiply(v[:, None], w[None, :], out=out)
        block -= out


def qr(a, panel_width=DEFAULT_PANEL_WIDTH):
    """Reduced QR of an m x n matrix with m >= n.

    Zero columns yield identity reflectors and a zero column of R instead
    of an error, so rank-deficient batch entries cannot abort a run.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ValueError(f"qr requires m >= n, got {m} x {n}; pass the transpose")
    if panel_width < 1:
        raise ValueError("panel_width must be >= 1")
    r = a.copy(order="F")
    reflectors = []
    for p0 in range(0, n, panel_width):
        p1 = min(p0 + panel_width, n)
        for j in range(p0, p1):
            v, tau = householder_vector(r[j:, j])
            reflectors.append((j, v, tau))
            if tau != 0.0:
                _apply_reflector(v, tau, r[j:, j:p1])
            if j + 1 < m:
                r[j + 1 :, j] = 0.0
        if p1 < n:
            for j, v, tau in reflectors[p0:p1]:
                if tau != 0.0:
                    _apply_reflector(v, tau, r[j:, p1:])
    q = np.zeros((m, n), dtype=a.dtype, order="F")
    np.fill_diagonal(q, 1.0)
    for j, v, tau in reversed(reflectors):
        if tau != 0.0:
            _apply_reflector(v, tau, q[j:, :])
    return QrResult(q=q, r=np.asfortranarray(r[:n, :]))


def batch_qr(batch, panel_width=DEFAULT_PANEL_WIDTH, *, threads=1):
    """Per-entry :func:`qr` over a batch."""
    return batch_apply(batch, lambda a: qr(a, panel_width), threads=threads)
