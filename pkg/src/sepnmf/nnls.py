"""Nonnegative regression subroutines.

``nnls_fro`` solves min ||M - W H||_F^2 over H >= 0 for all columns of M
at once with block principal pivoting on the cached Gram system; columns
that fail to settle fall back to the Lawson-Hanson solver. ``nnls_l1``
solves the column-wise least absolute deviation problem as a sequence of
small LPs on the exact engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import DimensionError
from .validation import check_matrix

__all__ = ["NnlsResult", "nnls_fro", "nnls_l1"]


@dataclass
class NnlsResult:
    h: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _kkt_ok(gram, wtm, h, tol):
    """Columnwise KKT test: gradient >= -tol on the zero set, |gradient|
    <= tol on the positive set."""
    grad = gram @ h - wtm
    on = h > 0
    return np.all(grad >= -tol) if not on.any() else (
        np.all(grad[~on] >= -tol) and np.all(np.abs(grad[on]) <= tol)
    )


def nnls_fro(m, w, max_outer=150, tol=1e-8):
    """Frobenius nonnegative least squares, all columns simultaneously.

    Rank-deficient ``w`` is allowed: subproblems use a least-squares solve
    and only the residual (not the weights) is then unique.
    """
    m = check_matrix(m, name="m")
    w = check_matrix(w, name="w")
    if m.shape[0] != w.shape[0]:
        raise DimensionError(f"row mismatch: m has {m.shape[0]}, w has {w.shape[0]}")
    k, n = w.shape[1], m.shape[1]
    gram = w.T @ w
    wtm = w.T @ m
    h = np.zeros((k, n))
    grad = -wtm  # gradient of 0.5||.||^2 at h = 0
    passive = np.zeros((k, n), dtype=bool)
    # Kim-Park style backup counters against cycling
    backup = np.full(n, 3)
    ticks = np.full(n, k + 1)
    iters = 0
    active_cols = np.arange(n)
    scale = max(1.0, float(np.abs(wtm).max(initial=0.0)), float(np.abs(gram).max(initial=0.0)))
    for _ in range(max_outer):
        if active_cols.size == 0:
            break
        iters += 1
        infeas_h = (h < -tol * scale) & passive
        infeas_g = (grad < -tol * scale) & ~passive
        bad = infeas_h | infeas_g
        bad_cols = active_cols[bad[:, active_cols].any(axis=0)]
        if bad_cols.size == 0:
            break
        for j in bad_cols:
            nbad = int(bad[:, j].sum())
            if nbad < ticks[j]:
                ticks[j] = nbad
                backup[j] = 3
                passive[:, j] ^= bad[:, j]
            elif backup[j] > 0:
                backup[j] -= 1
                passive[:, j] ^= bad[:, j]
            else:
                # flip only the highest-index violation (Murty's rule)
                idx = np.flatnonzero(bad[:, j]).max()
                passive[idx, j] = ~passive[idx, j]
        # re-solve the passive systems, grouped by support pattern
        h[:, bad_cols] = 0.0
        patterns = {}
        for j in bad_cols:
            patterns.setdefault(passive[:, j].tobytes(), []).append(j)
        for key, cols in patterns.items():
            sup = np.frombuffer(key, dtype=bool)
            if not sup.any():
                continue
            sub = gram[np.ix_(sup, sup)]
            rhs = wtm[np.ix_(sup, cols)]
            try:
                sol = np.linalg.solve(sub, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(sub, rhs, rcond=None)[0]
            h[np.ix_(sup, cols)] = sol
        grad[:, bad_cols] = gram @ h[:, bad_cols] - wtm[:, bad_cols]
    h = np.where(np.abs(h) < tol * scale, 0.0, h)
    converged = _kkt_ok(gram, wtm, h, 10 * tol * scale)
    if not converged:
        # per-column fallback for stubborn columns
        grad = gram @ h - wtm
        on = h > 0
        bad_cols = np.flatnonzero(
            ((grad < -10 * tol * scale) | (on & (np.abs(grad) > 10 * tol * scale))).any(axis=0)
        )
        for j in bad_cols:
            h[:, j] = scipy.optimize.nnls(w, m[:, j])[0]
        converged = _kkt_ok(gram, wtm, h, 100 * tol * scale)
    h = np.maximum(h, 0.0)
    residual = float(np.linalg.norm(m - w @ h))
    return NnlsResult(h=h, residual=residual, iterations=iters, converged=bool(converged))


def nnls_l1(m, w):
    """Least absolute deviations with nonnegative weights, per column.

    Returns the weight matrix, the worst-column absolute-error sum as the
    residual, and the summed LP iteration count.
    """
    m = check_matrix(m, name="m")
    w = check_matrix(w, name="w")
    if m.shape[0] != w.shape[0]:
        raise DimensionError(f"row mismatch: m has {m.shape[0]}, w has {w.shape[0]}")
    rows, k = w.shape
    n = m.shape[1]
    # epigraph form: variables [z (k), s (rows)], minimize sum(s)
    c = np.concatenate([np.zeros(k), np.ones(rows)])
    eye = sp.eye(rows, format="csr")
    block = sp.csr_matrix(w)
    a_ub = sp.vstack([sp.hstack([block, -eye]), sp.hstack([-block, -eye])], format="csr")
    h = np.zeros((k, n))
    errors = np.zeros(n)
    iterations = 0
    ok = True
    for j in range(n):
        b = m[:, j]
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=np.concatenate([b, -b]),
            bounds=[(0, None)] * k + [(0, None)] * rows,
            method="highs-ds",
        )
        if res.status != 0:
            ok = False
            continue
        h[:, j] = np.maximum(res.x[:k], 0.0)
        errors[j] = float(res.fun)
        iterations += int(getattr(res, "nit", 0) or 0)
    return NnlsResult(
        h=h,
        residual=float(errors.max(initial=0.0)),
        iterations=iterations,
        converged=ok,
    )
