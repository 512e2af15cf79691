"""One-sided block Jacobi SVD for matrices too large for single-shot Jacobi.

Pairs of block columns are orthogonalized per sweep, either through the SVD
of their Gram matrix (fast, but squares the condition number) or directly
through QR followed by the SVD of the triangular factor (robust for
ill-conditioned input). Convergence is tracked per sweep from the scaled
off-diagonal norm of the Gram/triangular factor of each pair.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import as_matrix, batch_apply, syrk
from .jacobi import JacobiOptions, SvdResult, _extract_svd, round_robin_schedule, svd
from .qr import qr

BLOCK_DEFAULT_TOLERANCE = {
    np.dtype(np.float64): 1e-13,
    np.dtype(np.float32): 1e-5,
}

_METHODS = ("gram", "direct")


@dataclass
class BlockJacobiOptions:
    block_width: int = 32
    method: str = "direct"
    tolerance: Optional[float] = None  # None picks the per-dtype default
    max_sweeps: int = 30
    accumulate_v: bool = False

    def __post_init__(self):
        if self.block_width < 1:
            raise ValueError("block_width must be >= 1")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")

    def resolve_tolerance(self, dtype):
        if self.tolerance is not None:
            return float(self.tolerance)
        return BLOCK_DEFAULT_TOLERANCE[np.dtype(dtype)]


@dataclass
class BlockSvdResult(SvdResult):
    # max scaled off-diagonal seen in each sweep, for convergence profiling
    e_history: list = field(default_factory=list)


def scaled_offdiag(g):
    """Max over i != j of |g_ij| / sqrt(|g_ii| |g_jj|).

    A zero diagonal entry under a zero off-diagonal contributes 0; a nonzero
    off-diagonal over a zero diagonal reads as +inf (never converges).
    """
    g = as_matrix(g)
    n = g.shape[0]
    if g.shape[0] != g.shape[1]:
        raise ValueError(f"scaled_offdiag expects a square matrix, got {g.shape}")
    if n < 2:
        return 0.0
    d = np.sqrt(np.abs(np.diag(g)))
    denom = np.outer(d, d)
    num = np.abs(g)
    np.fill_diagonal(num, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    ratio[(denom == 0) & (num > 0)] = np.inf
    return float(ratio.max())


def _inner_options(accumulate_v):
    # the per-pair SVD mirrors the parallel-ordering vector kernel
    return JacobiOptions(ordering="round_robin", accumulate_v=accumulate_v)


def block_svd(a, opts=None):
    """One-sided block Jacobi SVD of an m x n matrix, m >= n.

    Block-column pairs are visited in round-robin order and processed
    serially. Columns are padded with zeros up to a multiple of twice the
    block width and the padding is dropped again after the final sort.
    """
    opts = opts or BlockJacobiOptions()
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ValueError(f"block_svd requires m >= n, got {m} x {n}")
    tol = opts.resolve_tolerance(a.dtype)

    k = opts.block_width
    if opts.method == "direct":
        # the QR of an m x 2k block pair needs m >= 2k
        k = max(1, min(k, m // 2))
    n_pad = max(2 * k, -(-n // (2 * k)) * (2 * k))
    w = np.zeros((m, n_pad), dtype=a.dtype, order="F")
    w[:, :n] = a
    v = None
    if opts.accumulate_v:
        v = np.zeros((n_pad, n_pad), dtype=a.dtype, order="F")
        np.fill_diagonal(v, 1.0)

    n_blocks = n_pad // k
    pair_order = [p for step in round_robin_schedule(n_blocks).steps for p in step]
    inner_opts = _inner_options(False)
    inner_opts_v = _inner_options(True)

    e_history = []
    converged = False
    sweeps = 0
    for _ in range(opts.max_sweeps):
        e_sweep = 0.0
        for bi, bj in pair_order:
            ci = slice(bi * k, (bi + 1) * k)
            cj = slice(bj * k, (bj + 1) * k)
            pair = np.concatenate((w[:, ci], w[:, cj]), axis=1)
            if opts.method == "gram":
                g = syrk(pair)
                e_pair = scaled_offdiag(g)
                e_sweep = max(e_sweep, e_pair)
                if e_pair <= tol:
                    continue
                inner = svd(g, inner_opts)
                rot = inner.u
                new_pair = pair @ rot
                # keep exactly-null directions exactly null through the sweeps
                new_pair[:, inner.sigma == 0.0] = 0.0
            else:
                f = qr(pair)
                e_pair = scaled_offdiag(f.r)
                e_sweep = max(e_sweep, e_pair)
                if e_pair <= tol:
                    continue
                inner = svd(f.r, inner_opts_v)
                rot = inner.v
                new_pair = (f.q @ inner.u) * inner.sigma[None, :]
            w[:, ci] = new_pair[:, :k]
            w[:, cj] = new_pair[:, k:]
            if v is not None:
                vpair = np.concatenate((v[:, ci], v[:, cj]), axis=1) @ rot
                v[:, ci] = vpair[:, :k]
                v[:, cj] = vpair[:, k:]
        sweeps += 1
        e_history.append(e_sweep)
        if e_sweep < tol:
            converged = True
            break

    wt = np.ascontiguousarray(w.T)
    vt = np.ascontiguousarray(v.T) if v is not None else None
    base = _extract_svd(wt, vt, n_pad, converged, sweeps)
    # padding (and any exactly-null input column) carries sigma == 0 and
    # sorts last; drop the pad count from the tail
    sigma = base.sigma[:n]
    u = np.asfortranarray(base.u[:, :n])
    vv = None
    if base.v is not None:
        vv = np.asfortranarray(base.v[:n, :n])
    return BlockSvdResult(
        u=u, sigma=sigma, v=vv, converged=converged, sweeps=sweeps, e_history=e_history
    )


def batch_block_svd(batch, opts=None, *, threads=1):
    """Per-entry :func:`block_svd`; converged entries simply stop sweeping."""
    opts = opts or BlockJacobiOptions()
    return batch_apply(batch, lambda a: block_svd(a, opts), threads=threads)
