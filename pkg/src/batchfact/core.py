"""Dense matrix containers and the small set of level-3 primitives the
factorization kernels are built on.

A "matrix" throughout this package is a 2-d numpy array in column-major
(Fortran) order; a "batch" is a plain list of such arrays, homogeneous in
the common case but per-entry shapes are allowed.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

REAL_DTYPES = (np.float32, np.float64)


class BatchError(Exception):
    """Failure of a per-entry operation inside a batch, tagged with the index."""

    def __init__(self, index, cause):
        super().__init__(f"batch entry {index}: {cause}")
        self.index = index
        self.cause = cause


def as_matrix(a, dtype=None):
    """Coerce ``a`` to a 2-d column-major float array (copying only if needed)."""
    a = np.asarray(a, dtype=dtype)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got ndim={a.ndim}")
    if a.dtype.type not in REAL_DTYPES:
        a = a.astype(np.float64)
    return np.asfortranarray(a)


def gemm(a, b, c=None, *, alpha=1.0, beta=0.0, trans_a=False, trans_b=False):
    """General matrix multiply: ``alpha * op(a) @ op(b) + beta * c``.

    Returns a new array; ``c`` is never written in place. With ``beta == 0``
    the ``c`` argument is ignored entirely, so no NaN/Inf can leak out of it.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    oa = a.T if trans_a else a
    ob = b.T if trans_b else b
    if oa.shape[1] != ob.shape[0]:
        raise ValueError(
            f"gemm conformance error: op(a) is {oa.shape}, op(b) is {ob.shape}"
        )
    if alpha == 0.0:
        out = np.zeros((oa.shape[0], ob.shape[1]), dtype=a.dtype, order="F")
    elif alpha == 1.0:
        out = oa @ ob
    else:
        out = alpha * (oa @ ob)
    if beta != 0.0:
        if c is None:
            raise ValueError("gemm: beta != 0 requires c")
        c = as_matrix(c)
        if c.shape != out.shape:
            raise ValueError(
                f"gemm conformance error: c is {c.shape}, product is {out.shape}"
            )
        out = out + (c if beta == 1.0 else beta * c)
    return np.asfortranarray(out)


def syrk(a):
    """Gram matrix ``a.T @ a``, materialized exactly symmetric.

    Only the upper triangle is trusted from the BLAS product; it is mirrored
    so ``G[i, j]`` and ``G[j, i]`` are bitwise equal.
    """
    a = as_matrix(a)
    g = a.T @ a
    g = np.triu(g)
    g = g + np.triu(g, 1).T
    return np.asfortranarray(g)


def frobenius(a):
    """Frobenius norm; 0.0 for an empty matrix."""
    a = as_matrix(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a))


def default_threads():
    env = os.environ.get("BATCHFACT_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def batch_apply(entries, op, *, threads=1):
    """Apply ``op`` to every batch entry independently.

    Each entry is processed start-to-finish by a single worker, so the result
    is bitwise independent of ``threads``. The first failing entry (lowest
    index) is reported as a :class:`BatchError`.
    """
    entries = list(entries)
    results = [None] * len(entries)
    errors = {}

    def run(i):
        try:
            results[i] = op(entries[i])
        except Exception as exc:  # noqa: BLE001 - reported with batch index
            errors[i] = exc

    if threads > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, range(len(entries))))
    else:
        for i in range(len(entries)):
            run(i)
    if errors:
        i = min(errors)
        raise BatchError(i, errors[i]) from errors[i]
    return results


def write_matrix_text(path, a):
    """Write a matrix as text: a ``rows cols`` header, then row-major values."""
    a = as_matrix(a)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for i in range(a.shape[0]):
            fh.write(" ".join(repr(float(x)) for x in a[i, :]))
            fh.write("\n")


def read_matrix_text(path, dtype=np.float64):
    """Read a matrix written by :func:`write_matrix_text` (column-major result)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad header {header!r}")
        rows, cols = int(header[0]), int(header[1])
        data = fh.read().split()
    if len(data) != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, got {len(data)}")
    a = np.array([float(x) for x in data], dtype=dtype).reshape(rows, cols)
    return np.asfortranarray(a)
