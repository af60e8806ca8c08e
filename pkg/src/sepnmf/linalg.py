"""Dense matrix helpers: the three norms used throughout, column
normalization, and the plain-text matrix format.

Matrices are plain 2-D float64 ``numpy`` arrays whose columns carry the
data points; every public routine validates its input through
``check_matrix``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .validation import check_matrix

__all__ = [
    "norm1_induced",
    "norm_sum",
    "norm_fro",
    "normalize_columns_l1",
    "drop_zero_columns",
    "write_matrix_text",
    "read_matrix_text",
]


def norm1_induced(a):
    """Maximum over columns of the column's absolute entry sum."""
    arr = check_matrix(a, name="A")
    return float(np.abs(arr).sum(axis=0).max())


def norm_sum(a):
    """Sum of the absolute values of all entries."""
    arr = check_matrix(a, name="A")
    return float(np.abs(arr).sum())


def norm_fro(a):
    """Square root of the sum of squared entries."""
    arr = check_matrix(a, name="A")
    return float(np.sqrt((arr * arr).sum()))


def normalize_columns_l1(a):
    """Scale each nonzero column so its absolute entry sum equals 1.

    Zero columns are preserved verbatim; their reported scale is 0, which
    is the flag downstream LP builders use to exclude them. Returns
    ``(normalized, scales)`` where ``scales`` holds the original column
    absolute sums.
    """
    arr = check_matrix(a, name="A")
    scales = np.abs(arr).sum(axis=0)
    safe = np.where(scales > 0, scales, 1.0)
    return arr / safe, scales.copy()


def drop_zero_columns(a, tol=0.0):
    """Split off columns whose absolute sum is <= ``tol``.

    Returns ``(kept, kept_indices, dropped_indices)`` with indices into the
    original column order.
    """
    arr = check_matrix(a, name="A")
    sums = np.abs(arr).sum(axis=0)
    keep = np.flatnonzero(sums > tol)
    drop = np.flatnonzero(sums <= tol)
    if keep.size == 0:
        raise DimensionError("all columns are zero")
    return arr[:, keep], keep, drop


def write_matrix_text(a, path):
    """Write ``a`` as text: first line ``rows cols``, then one row per line.

    Values are printed with 17 significant digits so the file round-trips
    float64 exactly.
    """
    arr = check_matrix(a, name="A", allow_empty=True)
    rows, cols = arr.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{rows} {cols}\n")
        for i in range(rows):
            fh.write(" ".join(format(v, ".17g") for v in arr[i]) + "\n")


def read_matrix_text(path):
    """Read a matrix written by :func:`write_matrix_text`."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed header {header!r}")
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, dtype=float, ndmin=2) if rows else np.zeros((0, cols))
    if data.shape != (rows, cols):
        raise ValueError(
            f"{path}: header says {(rows, cols)} but body has shape {data.shape}"
        )
    return data
