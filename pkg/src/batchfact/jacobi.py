"""One-sided Jacobi SVD of small matrices.

Column pairs are repeatedly orthogonalized by plane rotations until every
pair meets the tolerance. Two visit orders are provided: ``serial`` walks
the strict upper triangle one pair at a time, ``round_robin`` walks the
(n-1)-step circle-method schedule in which each step is a perfect matching
of the columns; pairs inside a step are disjoint, so the step can be
applied with vectorized arithmetic without changing the result.

Left singular vectors are the normalized rotated columns, singular values
their norms; right vectors come from accumulating the rotations.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import as_matrix, batch_apply

DEFAULT_TOLERANCE = {
    np.dtype(np.float64): 1e-14,
    np.dtype(np.float32): 1e-6,
}

_ORDERINGS = ("serial", "round_robin")


@dataclass
class JacobiOptions:
    tolerance: Optional[float] = None  # None picks the per-dtype default
    max_sweeps: int = 30
    ordering: str = "serial"
    accumulate_v: bool = False

    def __post_init__(self):
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.ordering not in _ORDERINGS:
            raise ValueError(f"ordering must be one of {_ORDERINGS}")

    def resolve_tolerance(self, dtype):
        if self.tolerance is not None:
            return float(self.tolerance)
        return DEFAULT_TOLERANCE[np.dtype(dtype)]


@dataclass
class SvdResult:
    u: np.ndarray
    sigma: np.ndarray
    v: Optional[np.ndarray] = None
    converged: bool = True
    sweeps: int = 0


@dataclass
class PairSchedule:
    """(n-1)-step round-robin pairing of n columns, each step a perfect matching."""

    n: int
    steps: list


def jacobi_rotation(g_pp, g_pq, g_qq):
    """Stable rotation (c, s) diagonalizing [[g_pp, g_pq], [g_pq, g_qq]].

    Rutishauser's formulas; hypot keeps the intermediate quantities finite
    for extreme off-diagonal ratios.
    """
    g_pq = float(g_pq)
    if g_pq == 0.0:
        return 1.0, 0.0
    zeta = (float(g_qq) - float(g_pp)) / (2.0 * g_pq)
    t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
    c = 1.0 / math.hypot(1.0, t)
    return c, c * t


def off_orthogonality(a):
    """Max over column pairs of |<a_i, a_j>| / (||a_i|| ||a_j||).

    Pairs involving a zero column contribute 0.
    """
    a = as_matrix(a)
    n = a.shape[1]
    if n < 2:
        return 0.0
    g = a.T @ a
    d = np.sqrt(np.abs(np.diag(g)))
    denom = np.outer(d, d)
    num = np.abs(g)
    np.fill_diagonal(num, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)
    return float(ratio.max())


def round_robin_schedule(n):
    """Circle-method schedule: index 0 stays put, the rest rotate one slot per step."""
    if n < 2 or n % 2 != 0:
        raise ValueError(f"round-robin schedule needs even n >= 2, got {n}")
    idx = list(range(n))
    steps = []
    for _ in range(n - 1):
        pairs = []
        for i in range(n // 2):
            p, q = idx[i], idx[n - 1 - i]
            pairs.append((p, q) if p < q else (q, p))
        steps.append(pairs)
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return PairSchedule(n=n, steps=steps)


def _serial_sweep(wt, vt, tol2):
    """One serial sweep over all pairs; returns the rotation count."""
    nw, m = wt.shape
    buf_a = np.empty(m, dtype=wt.dtype)
    buf_b = np.empty(m, dtype=wt.dtype)
    if vt is not None:
        vbuf_a = np.empty(vt.shape[1], dtype=vt.dtype)
        vbuf_b = np.empty(vt.shape[1], dtype=vt.dtype)
    rotations = 0
    for p in range(nw - 1):
        wp = wt[p]
        for q in range(p + 1, nw):
            wq = wt[q]
            g_pp = float(wp.dot(wp))
            g_pq = float(wp.dot(wq))
            g_qq = float(wq.dot(wq))
            if g_pq * g_pq <= tol2 * (g_pp * g_qq):
                continue
            c, s = jacobi_rotation(g_pp, g_pq, g_qq)
            np.multiply(wq, s, out=buf_a)
            np.multiply(wp, c, out=buf_b)
            buf_b -= buf_a
            np.multiply(wp, s, out=buf_a)
            wq *= c
            wq += buf_a
            wp[:] = buf_b
            if vt is not None:
                vp = vt[p]
                vq = vt[q]
                np.multiply(vq, s, out=vbuf_a)
                np.multiply(vp, c, out=vbuf_b)
                vbuf_b -= vbuf_a
                np.multiply(vp, s, out=vbuf_a)
                vq *= c
                vq += vbuf_a
                vp[:] = vbuf_b
            rotations += 1
    return rotations


def _round_robin_sweep(wt, vt, tol2, steps):
    """One round-robin sweep; disjoint pairs per step are rotated together."""
    rotations = 0
    for ip, iq in steps:
        p_rows = wt[ip]
        q_rows = wt[iq]
        g_pp = np.einsum("ij,ij->i", p_rows, p_rows)
        g_pq = np.einsum("ij,ij->i", p_rows, q_rows)
        g_qq = np.einsum("ij,ij->i", q_rows, q_rows)
        rot = g_pq * g_pq > tol2 * (g_pp * g_qq)
        n_rot = int(rot.sum())
        if n_rot == 0:
            continue
        rotations += n_rot
        denom = np.where(rot, 2.0 * g_pq, 1.0)
        zeta = (g_qq - g_pp) / denom
        t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
        c = 1.0 / np.hypot(1.0, t)
        s = c * t
        c = np.where(rot, c, 1.0)[:, None]
        s = np.where(rot, s, 0.0)[:, None]
        wt[ip] = c * p_rows - s * q_rows
        wt[iq] = s * p_rows + c * q_rows
        if vt is not None:
            vp_rows = vt[ip]
            vq_rows = vt[iq]
            vt[ip] = c * vp_rows - s * vq_rows
            vt[iq] = s * vp_rows + c * vq_rows
    return rotations


def _complete_zero_rows(ut, zero_rows):
    """Fill rows of norm 0 with unit vectors orthogonal to the others."""
    m = ut.shape[1]
    done = [ut[i] for i in range(ut.shape[0]) if i not in set(zero_rows)]
    for k in zero_rows:
        best = None
        best_norm = -1.0
        for j in range(m):
            cand = np.zeros(m, dtype=ut.dtype)
            cand[j] = 1.0
            for row in done:
                cand -= row * row.dot(cand)
            nrm = float(np.linalg.norm(cand))
            if nrm > best_norm:
                best_norm = nrm
                best = cand
        # one re-orthogonalization pass for hygiene
        for row in done:
            best -= row * row.dot(best)
        ut[k] = best / np.linalg.norm(best)
        done.append(ut[k])


def _extract_svd(wt, vt, n, converged, sweeps):
    """Norms -> sigma, normalized columns -> U, stable descending sort."""
    wt = wt[:n]
    norms = np.sqrt(np.einsum("ij,ij->i", wt, wt))
    order = np.argsort(-norms, kind="stable")
    sigma = norms[order].copy()
    ut = wt[order].copy()
    nonzero = sigma > 0
    ut[nonzero] /= sigma[nonzero, None]
    zero_rows = [int(i) for i in np.nonzero(~nonzero)[0]]
    if zero_rows:
        _complete_zero_rows(ut, zero_rows)
    u = np.asfortranarray(ut.T)
    v = None
    if vt is not None:
        v = np.asfortranarray(vt[:n, :n][order].T)
    return SvdResult(u=u, sigma=sigma, v=v, converged=converged, sweeps=sweeps)


def svd(a, opts=None):
    """One-sided Jacobi SVD of an m x n matrix, m >= n.

    Iterates sweeps until a full sweep performs no rotation (every pair
    already inside tolerance), or until the off-orthogonality metric after
    the last allowed sweep is below tolerance. Non-convergence is reported
    through ``converged=False`` on the result, never as an exception.
    """
    opts = opts or JacobiOptions()
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ValueError(f"svd requires m >= n, got {m} x {n}; pass the transpose")
    if n == 0:
        return SvdResult(
            u=np.zeros((m, 0), dtype=a.dtype, order="F"),
            sigma=np.zeros(0, dtype=a.dtype),
            v=np.zeros((0, 0), dtype=a.dtype, order="F") if opts.accumulate_v else None,
        )
    tol = opts.resolve_tolerance(a.dtype)
    tol2 = tol * tol

    pad = opts.ordering == "round_robin" and n % 2 == 1
    nw = n + 1 if pad else n
    wt = np.zeros((nw, m), dtype=a.dtype)
    wt[:n] = a.T
    vt = None
    if opts.accumulate_v:
        vt = np.zeros((nw, nw), dtype=a.dtype)
        np.fill_diagonal(vt, 1.0)

    steps = None
    if opts.ordering == "round_robin" and nw >= 2:
        schedule = round_robin_schedule(nw)
        steps = [
            (np.array([p for p, _ in st]), np.array([q for _, q in st]))
            for st in schedule.steps
        ]

    converged = n < 2
    sweeps = 0
    for _ in range(opts.max_sweeps):
        if converged:
            break
        if opts.ordering == "serial":
            rotations = _serial_sweep(wt, vt, tol2)
        else:
            rotations = _round_robin_sweep(wt, vt, tol2, steps)
        sweeps += 1
        if rotations == 0:
            converged = True
    if not converged:
        converged = off_orthogonality(wt.T) < tol
    return _extract_svd(wt, vt, n, converged, sweeps)


def batch_svd(batch, opts=None, *, threads=1):
    """Per-entry :func:`svd` over a batch; convergence flags ride on each result."""
    opts = opts or JacobiOptions()
    return batch_apply(batch, lambda a: svd(a, opts), threads=threads)
