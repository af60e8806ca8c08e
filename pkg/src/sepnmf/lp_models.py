"""The four LP models behind the column-selection algorithms.

Each builder returns an :class:`LpSpec`, a structured description of one
model; :func:`assemble_standard` lowers a spec to an explicit sparse
standard form (:class:`StandardLp`) for the exact solver and the MPS
exporter, while the first-order engine works directly from the spec.

Variable layout of the standard form, for an m-by-n data matrix:
``vec(X)`` column-major (n^2 entries) followed by the per-entry epigraph
slacks ``vec(S)`` column-major (m*n entries). Row order: residual upper
family, residual lower family, per-column slack budgets, the
off-diagonal/diagonal chain rows, then (only with a fixed rank) the trace
equality.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, PreconditionError
from .linalg import normalize_columns_l1
from .validation import (
    check_l1_normalized,
    check_matrix,
    check_positive_vector,
    check_vector,
    distinct_entries,
)

__all__ = [
    "LpSpec",
    "StandardLp",
    "build_hottopixx",
    "build_rho_lp",
    "build_relative_lp",
    "build_absolute_lp",
    "change_of_variables",
    "assemble_standard",
    "export_mps",
    "lpspec_json",
]

MODELS = ("hottopixx", "rho_lp", "relative_lp", "absolute_lp")


@dataclass
class LpSpec:
    """One LP model applied to one data matrix.

    ``column_scales`` is all ones for the models that require normalized
    input; for the unnormalized models it holds the original column
    absolute sums. ``col_index`` maps the spec's columns back to the
    caller's column numbering when zero columns were excluded upstream.
    """

    model: str
    data: np.ndarray
    rho: float | None
    epsilon: float
    r: int | None
    objective_p: np.ndarray
    column_scales: np.ndarray
    col_index: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown LP model {self.model!r}")
        if self.col_index is None:
            self.col_index = np.arange(self.data.shape[1])

    @property
    def shape(self):
        return self.data.shape

    @property
    def n_variables(self):
        m, n = self.data.shape
        return n * n + m * n

    def column_budgets(self):
        """Right-hand side of the per-column residual budget rows."""
        n = self.data.shape[1]
        if self.model == "hottopixx":
            return np.full(n, 2.0 * self.epsilon)
        if self.model == "relative_lp":
            return self.rho * self.epsilon * self.column_scales
        return np.full(n, self.rho * self.epsilon)

    def variable_upper_bounds(self):
        """Box bounds implied by the diagonal-dominance chain.

        Entries coupled to a zero-scale column are pinned at zero: they
        multiply no data and would otherwise be unbounded.
        """
        m, n = self.data.shape
        s = self.column_scales
        if np.all(s == s[0]):
            ub_x = np.ones(n * n)
        else:
            safe = np.where(s > 0, s, 1.0)
            ub_x = np.minimum(s[None, :] / safe[:, None], 1e6).ravel(order="F")
            dead = s == 0
            pin = dead[:, None] | dead[None, :]
            np.fill_diagonal(pin, False)
            ub_x[pin.ravel(order="F")] = 0.0
            np.put(ub_x, np.arange(n) * n + np.arange(n), 1.0)
        ub_s = np.repeat(self.column_budgets(), m)
        return np.concatenate([ub_x, ub_s])

    def objective_vector(self):
        m, n = self.data.shape
        c = np.zeros(self.n_variables)
        c[np.arange(n) * n + np.arange(n)] = self.objective_p
        return c


@dataclass
class StandardLp:
    """Explicit sparse standard form: min c'x, rows A x (<=|=) rhs, lb <= x <= ub."""

    objective: np.ndarray
    matrix: sp.csr_matrix
    senses: np.ndarray  # 'L' or 'E' per row
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    m: int
    n: int
    spec: LpSpec | None = None

    @property
    def n_variables(self):
        return self.objective.size

    @property
    def n_rows(self):
        return self.rhs.size

    def variable_name(self, k):
        m, n = self.m, self.n
        if k < n * n:
            return f"X_{k % n + 1}_{k // n + 1}"
        k -= n * n
        return f"S_{k % m + 1}_{k // m + 1}"

    def row_name(self, t):
        m, n = self.m, self.n
        if t < m * n:
            return f"RP_{t % m + 1}_{t // m + 1}"
        t -= m * n
        if t < m * n:
            return f"RM_{t % m + 1}_{t // m + 1}"
        t -= m * n
        if t < n:
            return f"B_{t + 1}"
        t -= n
        if t < n * (n - 1):
            j, i = divmod(t, n - 1)
            if i >= j:
                i += 1
            return f"C_{i + 1}_{j + 1}"
        return "TRACE"


def _prepare_p(p, n, positive):
    p = check_vector(p, name="p", length=n)
    if positive and np.any(p <= 0):
        raise PreconditionError("objective vector p must be strictly positive")
    return distinct_entries(p)


def build_hottopixx(m_tilde, r, epsilon, p):
    """Rank-constrained model: residual budget 2*epsilon, trace fixed to r."""
    data = check_l1_normalized(m_tilde, tol=1e-9, name="m_tilde", allow_zero_columns=True)
    n = data.shape[1]
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= r <= n, got r={r}")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return LpSpec("hottopixx", data, None, float(epsilon), int(r),
                  _prepare_p(p, n, positive=False), np.ones(n))


def build_rho_lp(m_tilde, rho, epsilon, p):
    """Rank-free model on normalized data with residual budget rho*epsilon."""
    data = check_l1_normalized(m_tilde, tol=1e-9, name="m_tilde", allow_zero_columns=True)
    if rho < 0:
        raise ValueError("rho must be >= 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return LpSpec("rho_lp", data, float(rho), float(epsilon), None,
                  _prepare_p(p, data.shape[1], positive=True), np.ones(data.shape[1]))


def build_relative_lp(m_o, rho, epsilon, p):
    """Rank-free model on unnormalized data, per-column relative budgets.

    Zero columns make the relative budget degenerate and must be excluded
    by the caller (see ``linalg.drop_zero_columns``).
    """
    data = check_matrix(m_o, name="m_o")
    scales = np.abs(data).sum(axis=0)
    if np.any(scales == 0):
        raise PreconditionError(
            "zero column present; exclude zero columns before building the relative model"
        )
    if rho < 0 or epsilon < 0:
        raise ValueError("rho and epsilon must be >= 0")
    return LpSpec("relative_lp", data, float(rho), float(epsilon), None,
                  _prepare_p(p, data.shape[1], positive=True), scales)


def build_absolute_lp(m_o, rho, epsilon, p):
    """Rank-free model on unnormalized data with one global residual budget."""
    data = check_matrix(m_o, name="m_o")
    if rho < 0 or epsilon < 0:
        raise ValueError("rho and epsilon must be >= 0")
    scales = np.abs(data).sum(axis=0)
    return LpSpec("absolute_lp", data, float(rho), float(epsilon), None,
                  _prepare_p(p, data.shape[1], positive=True), scales)


def change_of_variables(x_solution, scales, direction):
    """Rescale a weight matrix between the normalized and unnormalized
    models: entry (i, j) is multiplied by scale_i/scale_j one way and
    divided the other way. The diagonal is unchanged."""
    x = check_matrix(x_solution, name="x_solution")
    s = check_vector(scales, name="scales", length=x.shape[0])
    if np.any(s <= 0):
        raise ValueError("scales must be strictly positive")
    ratio = s[:, None] / s[None, :]
    if direction in ("Y->X", "y_to_x"):
        return x * ratio
    if direction in ("X->Y", "x_to_y"):
        return x / ratio
    raise ValueError(f"direction must be 'X->Y' or 'Y->X', got {direction!r}")


def _chain_pairs(n):
    """Off-diagonal (i, j) pairs ordered column-major."""
    i = np.tile(np.arange(n), n)
    j = np.repeat(np.arange(n), n)
    keep = i != j
    return i[keep], j[keep]


def assemble_standard(spec):
    """Materialize the sparse standard form of a model spec."""
    data = spec.data
    m, n = data.shape
    nx = n * n
    ns = m * n
    eye_n = sp.eye(n, format="csr")
    block = sp.kron(eye_n, sp.csr_matrix(data), format="csr")
    eye_s = sp.eye(ns, format="csr")
    fam1 = sp.hstack([block, -eye_s], format="csr")
    fam2 = sp.hstack([-block, -eye_s], format="csr")
    budget = sp.hstack(
        [sp.csr_matrix((n, nx)), sp.kron(eye_n, np.ones((1, m)), format="csr")],
        format="csr",
    )
    ci, cj = _chain_pairs(n)
    s = spec.column_scales
    live = (s[ci] > 0) & (s[cj] > 0)
    rows = np.repeat(np.arange(ci.size), 2)
    cols = np.stack([cj * n + ci, ci * n + ci], axis=1).ravel()
    vals = np.stack([s[ci], -s[cj]], axis=1).ravel()
    vals[np.repeat(~live, 2)] = 0.0
    chain = sp.csr_matrix(
        (vals, (rows, cols)), shape=(ci.size, nx + ns)
    )
    parts = [fam1, fam2, budget, chain]
    senses = ["L"] * (2 * ns + n + ci.size)
    rhs = np.concatenate([
        data.ravel(order="F"),
        -data.ravel(order="F"),
        spec.column_budgets(),
        np.zeros(ci.size),
    ])
    if spec.model == "hottopixx":
        trace = sp.csr_matrix(
            (np.ones(n), (np.zeros(n, dtype=int), np.arange(n) * n + np.arange(n))),
            shape=(1, nx + ns),
        )
        parts.append(trace)
        senses.append("E")
        rhs = np.concatenate([rhs, [float(spec.r)]])
    matrix = sp.vstack(parts, format="csr")
    return StandardLp(
        objective=spec.objective_vector(),
        matrix=matrix,
        senses=np.array(senses),
        rhs=rhs,
        lower=np.zeros(nx + ns),
        upper=spec.variable_upper_bounds(),
        m=m,
        n=n,
        spec=spec,
    )


def lpspec_json(spec):
    """Debug summary of a spec: model, dims, parameters and a content
    digest of the objective vector."""
    m, n = spec.data.shape
    return json.dumps(
        {
            "model": spec.model,
            "m": m,
            "n": n,
            "rho": spec.rho,
            "epsilon": spec.epsilon,
            "r": spec.r,
            "p_digest": hashlib.sha256(np.ascontiguousarray(spec.objective_p).tobytes()).hexdigest()[:16],
            "variables": int(spec.n_variables),
        },
        sort_keys=True,
    )


def _mps_field(name, width=9):
    return name.ljust(width)


def export_mps(lp, path):
    """Write fixed-format MPS (MIN objective). Variable and row names are
    stable across runs so files can be compared byte for byte."""
    if isinstance(lp, LpSpec):
        lp = assemble_standard(lp)
    csc = lp.matrix.tocsc()
    with open(path, "w", encoding="ascii") as fh:
        fh.write("NAME          SEPNMF_LP\n")
        fh.write("ROWS\n")
        fh.write(" N  COST\n")
        for t in range(lp.n_rows):
            fh.write(f" {lp.senses[t]}  {lp.row_name(t)}\n")
        fh.write("COLUMNS\n")
        for k in range(lp.n_variables):
            name = lp.variable_name(k)
            entries = []
            if lp.objective[k] != 0.0:
                entries.append(("COST", lp.objective[k]))
            start, end = csc.indptr[k], csc.indptr[k + 1]
            for idx in range(start, end):
                entries.append((lp.row_name(csc.indices[idx]), csc.data[idx]))
            for pos in range(0, len(entries), 2):
                chunk = entries[pos : pos + 2]
                line = f"    {_mps_field(name)} "
                for row, val in chunk:
                    line += f" {_mps_field(row)} {format(val, '.12g').ljust(12)}"
                fh.write(line.rstrip() + "\n")
        fh.write("RHS\n")
        for t in range(lp.n_rows):
            if lp.rhs[t] != 0.0:
                fh.write(
                    f"    RHS        {_mps_field(lp.row_name(t))} "
                    f"{format(lp.rhs[t], '.12g')}\n"
                )
        fh.write("BOUNDS\n")
        for k in range(lp.n_variables):
            up = lp.upper[k]
            if np.isfinite(up):
                fh.write(
                    f" UP BND        {_mps_field(lp.variable_name(k))} "
                    f"{format(up, '.12g')}\n"
                )
        fh.write("ENDATA\n")
