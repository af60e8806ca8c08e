"""LP solving: an exact simplex engine and a first-order engine.

The exact engine hands the assembled standard form to HiGHS dual simplex
(via ``scipy.optimize.linprog``); it is deterministic and serves as the
test oracle on small instances. The first-order engine is a diagonally
preconditioned primal-dual hybrid gradient method that works matrix-free
from the model spec, so one iteration costs two dense products with the
data matrix instead of a pass over the full standard form.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import SolverError
from .lp_models import LpSpec, StandardLp, assemble_standard
from .linalg import norm1_induced

__all__ = [
    "SolveOptions",
    "LpSolution",
    "solve",
    "check_feasibility_certificate",
    "CertificateReport",
    "cross_validate",
    "CrossValidation",
]

AUTO_SIMPLEX_MAX_VARS = 2500


@dataclass
class SolveOptions:
    engine: str = "auto"  # simplex | pdhg | auto
    feas_tol: float | None = None
    gap_tol: float | None = None
    max_iters: int | None = None
    time_limit: float | None = None
    log_file: str | None = None
    check_every: int = 250

    def resolved(self, engine):
        feas = self.feas_tol if self.feas_tol is not None else (1e-7 if engine == "simplex" else 1e-6)
        gap = self.gap_tol if self.gap_tol is not None else (1e-9 if engine == "simplex" else 1e-5)
        iters = self.max_iters if self.max_iters is not None else (None if engine == "simplex" else 400_000)
        if feas <= 0 or gap <= 0:
            raise ValueError("tolerances must be positive")
        return feas, gap, iters


@dataclass
class LpSolution:
    x_matrix: np.ndarray | None
    objective: float
    status: str  # optimal | infeasible | iteration_limit | time_limit
    stats: dict = field(default_factory=dict)

    @property
    def diagonal(self):
        return np.diag(self.x_matrix) if self.x_matrix is not None else None


def solve(lp, opts=None):
    """Solve an assembled LP or a model spec; returns an :class:`LpSolution`.

    Infeasibility is a status, not an exception; numerical breakdown
    raises :class:`SolverError`.
    """
    opts = opts or SolveOptions()
    spec = lp if isinstance(lp, LpSpec) else lp.spec
    engine = opts.engine
    if engine == "auto":
        nvars = spec.n_variables if spec is not None else lp.n_variables
        engine = "simplex" if nvars <= AUTO_SIMPLEX_MAX_VARS else "pdhg"
    if engine == "simplex":
        std = lp if isinstance(lp, StandardLp) else assemble_standard(lp)
        return _solve_simplex(std, opts)
    if engine == "pdhg":
        op = _SpecOperator(spec) if spec is not None else _CsrOperator(lp)
        return _solve_pdhg(op, opts)
    raise ValueError(f"unknown engine {opts.engine!r}")


def _solve_simplex(std, opts):
    feas_tol, _, max_iters = opts.resolved("simplex")
    ub_rows = std.senses == "L"
    eq_rows = ~ub_rows
    options = {
        "presolve": True,
        "primal_feasibility_tolerance": min(feas_tol, 1e-7),
        "dual_feasibility_tolerance": min(feas_tol, 1e-7),
    }
    if max_iters is not None:
        options["maxiter"] = int(max_iters)
    if opts.time_limit is not None:
        options["time_limit"] = float(opts.time_limit)
    t0 = time.perf_counter()
    res = linprog(
        c=std.objective,
        A_ub=std.matrix[ub_rows] if ub_rows.any() else None,
        b_ub=std.rhs[ub_rows] if ub_rows.any() else None,
        A_eq=std.matrix[eq_rows] if eq_rows.any() else None,
        b_eq=std.rhs[eq_rows] if eq_rows.any() else None,
        bounds=np.column_stack([std.lower, std.upper]),
        method="highs-ds",
        options=options,
    )
    runtime = time.perf_counter() - t0
    if res.status == 0:
        status = "optimal"
    elif res.status == 2:
        status = "infeasible"
    elif res.status == 1:
        timed_out = opts.time_limit is not None and runtime >= 0.995 * opts.time_limit
        status = "time_limit" if timed_out else "iteration_limit"
    else:
        raise SolverError(f"simplex backend failed: status={res.status} ({res.message})")
    x_matrix = None
    objective = float("nan")
    if res.x is not None and status == "optimal":
        n = std.n
        x_matrix = np.asarray(res.x[: n * n]).reshape(n, n, order="F")
        objective = float(res.fun)
    sol = LpSolution(
        x_matrix=x_matrix,
        objective=objective,
        status=status,
        stats={
            "engine": "simplex",
            "iterations": int(getattr(res, "nit", 0) or 0),
            "runtime": runtime,
            "primal_residual": 0.0 if status == "optimal" else float("nan"),
            "gap_estimate": 0.0 if status == "optimal" else float("nan"),
        },
    )
    if opts.log_file:
        with open(opts.log_file, "a", encoding="ascii") as fh:
            fh.write(f"{sol.stats['iterations']},{objective},{sol.stats['primal_residual']},{sol.stats['gap_estimate']}\n")
    return sol


class _SpecOperator:
    """Matrix-free standard-form operator derived from a model spec."""

    def __init__(self, spec):
        self.spec = spec
        data = spec.data
        self.data = data
        self.m, self.n = data.shape
        self.nx = self.n * self.n
        self.ns = self.m * self.n
        self.s = spec.column_scales
        self.has_trace = spec.model == "hottopixx"
        n = self.n
        self.live = np.outer(self.s > 0, self.s > 0)
        np.fill_diagonal(self.live, False)
        self.offdiag = ~np.eye(n, dtype=bool)
        self.n_chain = n * n - n
        self.budgets = spec.column_budgets()
        self.b = np.concatenate(
            [
                data.ravel(order="F"),
                -data.ravel(order="F"),
                self.budgets,
                np.zeros(self.n_chain),
                [float(spec.r)] if self.has_trace else [],
            ]
        )
        self.eq_mask = np.zeros(self.b.size, dtype=bool)
        if self.has_trace:
            self.eq_mask[-1] = True
        self.c = spec.objective_vector()
        self.lb = np.zeros(self.nx + self.ns)
        self.ub = spec.variable_upper_bounds()
        self.nvar = self.nx + self.ns
        self.nrow = self.b.size

    def _split(self, x):
        n = self.n
        X = x[: self.nx].reshape(n, n, order="F")
        S = x[self.nx :].reshape(self.m, n, order="F")
        return X, S

    def matvec(self, x):
        X, S = self._split(x)
        mx = self.data @ X
        chain = self.s[:, None] * X - np.diag(X)[:, None] * self.s[None, :]
        chain[~self.live] = 0.0
        parts = [
            (mx - S).ravel(order="F"),
            (-mx - S).ravel(order="F"),
            S.sum(axis=0),
            chain.T[self.offdiag.T],
        ]
        if self.has_trace:
            parts.append(np.array([np.trace(X)]))
        return np.concatenate(parts)

    def rmatvec(self, y):
        m, n = self.m, self.n
        k = self.ns
        y1 = y[:k].reshape(m, n, order="F")
        y2 = y[k : 2 * k].reshape(m, n, order="F")
        yb = y[2 * k : 2 * k + n]
        g = np.zeros((n, n))
        g.T[self.offdiag.T] = y[2 * k + n : 2 * k + n + self.n_chain]
        g[~self.live] = 0.0
        gx = self.data.T @ (y1 - y2)
        gx += self.s[:, None] * g
        diag_extra = -(g * self.s[None, :]).sum(axis=1)
        if self.has_trace:
            diag_extra = diag_extra + y[-1]
        gx[np.arange(n), np.arange(n)] += diag_extra
        gs = -y1 - y2 + yb[None, :]
        return np.concatenate([gx.ravel(order="F"), gs.ravel(order="F")])

    def col_abs_sums(self):
        n = self.n
        colabs = np.abs(self.data).sum(axis=0)
        cx = 2.0 * np.tile(colabs, (n, 1)).T  # entry (i, j): data column i used in X(i, j)
        cx += np.where(self.live, self.s[:, None], 0.0)
        diag_chain = (np.where(self.live, self.s[None, :], 0.0)).sum(axis=1)
        cx[np.arange(n), np.arange(n)] += diag_chain + (1.0 if self.has_trace else 0.0)
        cs = np.full(self.ns, 3.0)
        return np.concatenate([cx.ravel(order="F"), cs])

    def row_abs_sums(self):
        rowabs = np.abs(self.data).sum(axis=1)
        fam = np.tile(rowabs + 1.0, self.n)
        chain = (self.s[:, None] + self.s[None, :]) * self.live
        parts = [fam, fam, np.full(self.n, float(self.m)), chain.T[self.offdiag.T]]
        if self.has_trace:
            parts.append(np.array([float(self.n)]))
        return np.concatenate(parts)

    def initial_x(self):
        x = np.zeros(self.nvar)
        n = self.n
        d = self.spec.r / n if self.has_trace else 1.0
        x[(np.arange(n) * n + np.arange(n))] = min(d, 1.0)
        X, _ = self._split(x)
        resid = np.abs(self.data - self.data @ X)
        x[self.nx :] = resid.ravel(order="F")
        return x

    def polish(self, x):
        """Project the weight block back to its box and chain, then blend
        any over-budget column toward exact self-representation."""
        X, _ = self._split(x.copy())
        X = np.clip(X, 0.0, 1.0)
        s = np.where(self.s > 0, self.s, 1.0)
        cap = np.diag(X)[:, None] * (self.s[None, :] / s[:, None])
        np.fill_diagonal(cap, np.diag(X))
        X = np.minimum(X, np.maximum(cap, 0.0))
        if np.any(self.s == 0):
            X[~self.live & self.offdiag] = 0.0
        resid = np.abs(self.data - self.data @ X).sum(axis=0)
        over = resid > self.budgets
        if np.any(over):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(over & (resid > 0), 1.0 - self.budgets / np.maximum(resid, 1e-300), 0.0)
            t = np.clip(t, 0.0, 0.02)  # polish only; large gaps stay visible in the residual
            X *= 1.0 - t[None, :]
            X[np.arange(self.n), np.arange(self.n)] += t
        S = np.abs(self.data - self.data @ X)
        out = np.concatenate([X.ravel(order="F"), S.ravel(order="F")])
        return np.minimum(np.maximum(out, self.lb), np.maximum(self.ub, 0.0))

    def primal_residual(self, x):
        X, _ = self._split(x)
        resid = np.abs(self.data - self.data @ X).sum(axis=0)
        budget_viol = float(np.max(resid - self.budgets, initial=0.0))
        chain = self.s[:, None] * X - np.diag(X)[:, None] * self.s[None, :]
        chain[~self.live] = 0.0
        chain_viol = float(chain.max(initial=0.0))
        box_viol = float(max(-x.min(initial=0.0), np.max(x - self.ub, initial=0.0)))
        trace_viol = abs(np.trace(X) - self.spec.r) if self.has_trace else 0.0
        scale = 1.0 + float(np.max(np.abs(self.budgets), initial=1.0))
        return max(budget_viol, chain_viol, box_viol, trace_viol) / scale


class _CsrOperator:
    """Generic operator over an explicit standard form."""

    def __init__(self, std):
        self.std = std
        self.A = std.matrix.tocsr()
        self.At = self.A.T.tocsr()
        self.b = std.rhs
        self.eq_mask = std.senses == "E"
        self.c = std.objective
        self.lb = std.lower
        self.ub = std.upper
        self.nvar = std.n_variables
        self.nrow = std.n_rows
        self._abs = abs(self.A)

    def matvec(self, x):
        return self.A @ x

    def rmatvec(self, y):
        return self.At @ y

    def col_abs_sums(self):
        return np.asarray(self._abs.sum(axis=0)).ravel()

    def row_abs_sums(self):
        return np.asarray(self._abs.sum(axis=1)).ravel()

    def initial_x(self):
        return np.clip(np.zeros(self.nvar), self.lb, np.minimum(self.ub, 1.0))

    def polish(self, x):
        return np.clip(x, self.lb, self.ub)

    def primal_residual(self, x):
        v = self.A @ x - self.b
        v[~self.eq_mask] = np.maximum(v[~self.eq_mask], 0.0)
        scale = 1.0 + float(np.max(np.abs(self.b), initial=1.0))
        return float(np.max(np.abs(v), initial=0.0)) / scale


def _dual_objective(op, y, z):
    """Lower bound from the dual iterate; ``z = c + A' y``."""
    ub = op.ub
    contrib = np.where(z < 0, z * np.where(np.isfinite(ub), ub, 0.0), 0.0)
    bound = float(contrib.sum() - op.b @ y)
    if np.any((z < -1e-9) & ~np.isfinite(ub)):
        return -np.inf
    return bound


def _solve_pdhg(op, opts):
    feas_tol, gap_tol, max_iters = opts.resolved("pdhg")
    tau = 1.0 / np.maximum(op.col_abs_sums(), 1e-12)
    sigma = 1.0 / np.maximum(op.row_abs_sums(), 1e-12)
    x = op.initial_x()
    y = np.zeros(op.nrow)
    lam = 1.5
    ineq = ~op.eq_mask
    t0 = time.perf_counter()
    status = "iteration_limit"
    it = 0
    gap = np.inf
    rp = np.inf
    log_lines = []
    while it < max_iters:
        it += 1
        g = op.c + op.rmatvec(y)
        xh = np.clip(x - tau * g, op.lb, op.ub)
        ax = op.matvec(2.0 * xh - x)
        yh = y + sigma * (ax - op.b)
        np.maximum(yh, 0.0, out=yh, where=ineq)
        x += lam * (xh - x)
        y += lam * (yh - y)
        if it % opts.check_every == 0 or it == max_iters:
            rp = op.primal_residual(x)
            z = op.c + op.rmatvec(y)
            dual = _dual_objective(op, y, z)
            obj = float(op.c @ x)
            gap = abs(obj - dual) / max(1.0, abs(obj), abs(dual))
            if opts.log_file:
                log_lines.append(f"{it},{obj},{rp},{gap}")
            if rp <= feas_tol and gap <= gap_tol:
                status = "optimal"
                break
            if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
                status = "time_limit"
                break
            if it % (opts.check_every * 20) == 0 and _infeasibility_certificate(op, y):
                status = "infeasible"
                break

    runtime = time.perf_counter() - t0
    if status == "optimal":
        x = op.polish(x)
        rp = op.primal_residual(x)
        if rp > 10 * feas_tol:
            status = "iteration_limit"
    if opts.log_file and log_lines:
        with open(opts.log_file, "a", encoding="ascii") as fh:
            fh.write("\n".join(log_lines) + "\n")
    n = getattr(op, "n", None)
    if n is None:
        n = op.std.n
    x_matrix = x[: n * n].reshape(n, n, order="F") if status == "optimal" else None
    objective = float(op.c @ x) if status == "optimal" else float("nan")
    return LpSolution(
        x_matrix=x_matrix,
        objective=objective,
        status=status,
        stats={
            "engine": "pdhg",
            "iterations": it,
            "runtime": runtime,
            "primal_residual": float(rp),
            "gap_estimate": float(gap),
        },
    )


def _infeasibility_certificate(op, y, margin=1e-7):
    norm = float(np.abs(y).sum())
    if norm < 1e3:
        return False
    yh = y / norm
    v = op.rmatvec(yh)
    ub = np.where(np.isfinite(op.ub), op.ub, 1e9)
    value = float(np.where(v < 0, v * ub, 0.0).sum() - op.b @ yh)
    return value > margin


@dataclass
class CertificateReport:
    """Max violation per constraint family (positive numbers violate) and
    the analytic feasibility bounds when ground truth is supplied."""

    violations: dict
    bounds: dict

    def ok(self, tol):
        return all(v <= tol for v in self.violations.values())

    def max_violation(self):
        return max(self.violations.values(), default=0.0)


def check_feasibility_certificate(
    lp_spec, x, slack_tol=1e-9, m_true=None, true_indices=None, kappa=None, beta=None, gamma=None
):
    """Report how far a candidate weight matrix is from feasibility, and
    evaluate the feasible-solution bounds against ground truth when given.
    """
    spec = lp_spec
    X = np.asarray(x, dtype=float)
    n = spec.data.shape[1]
    if X.shape != (n, n):
        raise ValueError(f"candidate must be {n}x{n}, got {X.shape}")
    s = spec.column_scales
    live = np.outer(s > 0, s > 0)
    np.fill_diagonal(live, False)
    chain = s[:, None] * X - np.diag(X)[:, None] * s[None, :]
    chain[~live] = 0.0
    resid = np.abs(spec.data - spec.data @ X).sum(axis=0)
    violations = {
        "nonneg": float(max(0.0, -X.min(initial=0.0))),
        "diag_bound": float(max(0.0, np.diag(X).max(initial=0.0) - 1.0)),
        "chain": float(max(0.0, chain.max(initial=0.0))),
        "budget": float(np.max(resid - spec.column_budgets(), initial=0.0)),
    }
    if spec.model == "hottopixx":
        violations["trace"] = float(abs(np.trace(X) - spec.r))
    bounds = {}
    rho_eff = spec.rho if spec.rho is not None else 2.0
    eps = spec.epsilon
    if m_true is not None and eps < 1.0:
        limit = eps * (rho_eff + 2.0) / (1.0 - eps)
        bounds["feasible_norm_limit"] = limit + 1.0
        bounds["feasible_norm_excess"] = float(norm1_induced(X) - (1.0 + limit))
        m_true = np.asarray(m_true, dtype=float)
        bounds["true_residual_limit"] = limit
        bounds["true_residual_excess"] = float(norm1_induced(m_true - m_true @ X) - limit)
    if true_indices is not None and kappa is not None and beta is not None and eps < 1.0 and beta < 1.0:
        lower = 1.0 - 2.0 * eps * (rho_eff + 2.0) / (kappa * (1.0 - beta) * (1.0 - eps))
        diag = np.diag(X)
        bounds["anchor_diag_lower"] = lower
        bounds["anchor_diag_excess"] = float(lower - diag[np.asarray(true_indices)].min())
        if gamma is not None:
            others = np.setdiff1d(np.arange(n), np.asarray(true_indices))
            if others.size:
                upper = 1.0 - min(gamma, rho_eff / 2.0)
                bounds["other_diag_upper"] = upper
                bounds["other_diag_excess"] = float(diag[others].max() - upper)
    report = CertificateReport(violations=violations, bounds=bounds)
    report.violations = {k: (0.0 if v <= slack_tol else v) for k, v in violations.items()}
    return report


@dataclass
class CrossValidation:
    passed: bool
    status_a: str
    status_b: str
    objective_a: float
    objective_b: float
    objective_rel_diff: float
    diag_max_diff: float
    message: str = ""


def cross_validate(lp, opts_a, opts_b):
    """Solve the same LP with two engines and compare: matching status,
    objective within max(1e-4, 10*gap_tol) relative, diagonal within 1e-3.
    """
    sol_a = solve(lp, opts_a)
    sol_b = solve(lp, opts_b)
    if sol_a.status != sol_b.status:
        return CrossValidation(False, sol_a.status, sol_b.status, sol_a.objective,
                               sol_b.objective, np.inf, np.inf, "status mismatch")
    if sol_a.status != "optimal":
        return CrossValidation(True, sol_a.status, sol_b.status, sol_a.objective,
                               sol_b.objective, 0.0, 0.0, "both non-optimal with equal status")
    gap_tols = []
    for o in (opts_a, opts_b):
        engine = o.engine if o.engine != "auto" else "simplex"
        gap_tols.append(o.resolved(engine)[1])
    tol = max(1e-4, 10.0 * max(gap_tols))
    rel = abs(sol_a.objective - sol_b.objective) / max(1.0, abs(sol_a.objective), abs(sol_b.objective))
    ddiff = float(np.max(np.abs(sol_a.diagonal - sol_b.diagonal)))
    passed = rel <= tol and ddiff <= 1e-3
    return CrossValidation(passed, sol_a.status, sol_b.status, sol_a.objective,
                           sol_b.objective, rel, ddiff,
                           "" if passed else "objective or diagonal disagreement")
