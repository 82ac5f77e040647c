"""Concave log-of-affine programs over complex Hermitian PSD matrices.

A :class:`ConicProblem` holds Hermitian PSD matrix variables X_1..X_p and
affine functionals ``c + sum_i Re Tr(C_i X_i)``. The objective to maximize is
a sum of logarithms of affine functionals plus one affine functional, under
affine (in)equalities. :func:`solve_conic` solves it with one of two
backends:

* ``"cvxopt"`` (default) solves the Lagrangian dual, whose variables are one
  multiplier per log term, inequality and equality. The PSD multiplier of
  the dual is the primal matrix. This keeps the Newton systems at the size
  of the constraint count instead of the number of matrix entries.
* ``"clarabel"`` solves the primal directly with exponential and PSD
  triangle cones. It is slower for large matrices and serves as fallback.

Real embedding: an n x n Hermitian X = A + jB is parameterized by the n^2
reals ``A[i, j]`` (i <= j, row-major over ``np.triu_indices(n)``) followed by
``B[i, j]`` (i < j, over ``np.triu_indices(n, 1)``). For Hermitian C = P + jQ,

    Re Tr(C X) = sum_i P_ii A_ii + 2 sum_{i<j} (P_ij A_ij + Q_ij B_ij),

and X >= 0 iff the real symmetric Y = [[A, -B], [B, A]] >= 0. Y enters the
PSD triangle cone as its upper triangle, column-major, off-diagonals scaled
by sqrt(2). Each log term ``t <= log(u)`` is the exponential cone point
(t, 1, u).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import clarabel
import numpy as np
import scipy.sparse as sp

SQRT2 = np.sqrt(2.0)
BACKENDS = ("cvxopt", "clarabel")

OPTIMAL = "optimal"
INACCURATE = "inaccurate"
INFEASIBLE = "infeasible"
FAILURE = "failure"


def hermitian_part(C):
    C = np.asarray(C, dtype=complex)
    return 0.5 * (C + C.conj().T)


def real_embedding(C):
    """[[Re C, -Im C], [Im C, Re C]] of the Hermitian part of ``C``."""
    H = hermitian_part(C)
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


@dataclass
class Affine:
    """``const + sum_i Re Tr(terms[i] @ X_i)``."""

    const: float = 0.0
    terms: dict = field(default_factory=dict)

    def add(self, var, C, scale=1.0):
        C = scale * np.asarray(C, dtype=complex)
        if var in self.terms:
            self.terms[var] = self.terms[var] + C
        else:
            self.terms[var] = C
        return self

    def scaled(self, a):
        return Affine(a * self.const, {v: a * C for v, C in self.terms.items()})

    def plus(self, other):
        out = Affine(self.const + other.const, dict(self.terms))
        for v, C in other.terms.items():
            out.add(v, C)
        return out

    def magnitude(self):
        return max([abs(self.const)] + [float(np.abs(C).max()) for C in self.terms.values()])

    def value(self, values):
        total = self.const
        for v, C in self.terms.items():
            total += float(np.real(np.trace(C @ values[v])))
        return total


@dataclass
class ConicProblem:
    var_names: list = field(default_factory=list)
    var_dims: list = field(default_factory=list)
    log_terms: list = field(default_factory=list)
    linear: Affine = field(default_factory=Affine)
    constraints: list = field(default_factory=list)

    def add_variable(self, name, dim):
        self.var_names.append(name)
        self.var_dims.append(int(dim))
        return len(self.var_dims) - 1

    def add_constraint(self, expr, sense):
        if sense not in (">=", "<=", "=="):
            raise ValueError(f"unknown constraint sense {sense!r}")
        for v in expr.terms:
            if not 0 <= v < len(self.var_dims):
                raise ValueError(f"constraint references undeclared variable {v}")
        self.constraints.append((expr, sense))

    def count(self, sense):
        return sum(1 for _, s in self.constraints if s == sense)

    def normalized(self):
        """Equivalent problem with every functional scaled to unit magnitude.

        Log arguments are rescaled by ``s`` and ``ln s`` moves into the
        linear constant, so the objective value is unchanged.
        """
        out = ConicProblem(list(self.var_names), list(self.var_dims))
        shift = 0.0
        for term in self.log_terms:
            s = term.magnitude() or 1.0
            out.log_terms.append(term.scaled(1.0 / s))
            shift += np.log(s)
        out.linear = Affine(self.linear.const + shift, dict(self.linear.terms))
        for expr, sense in self.constraints:
            s = expr.magnitude() or 1.0
            out.constraints.append((expr.scaled(1.0 / s), sense))
        return out

    def objective_value(self, values):
        logs = [t.value(values) for t in self.log_terms]
        if any(x <= 0 for x in logs):
            return float("-inf")
        return float(np.sum(np.log(logs)) + self.linear.value(values))

    def dump(self, stream=None):
        """Write a plain-text description; returns it as a string if ``stream`` is None."""
        out = stream if stream is not None else io.StringIO()

        def affine_lines(expr):
            for v in sorted(expr.terms):
                C = hermitian_part(expr.terms[v])
                rows, cols = np.triu_indices(C.shape[0])
                for r, c in zip(rows, cols):
                    if C[r, c] != 0:
                        out.write(f"  {v} {r} {c} {C[r, c].real:.17g} {C[r, c].imag:.17g}\n")

        out.write(f"variables {len(self.var_dims)}\n")
        for i, (name, dim) in enumerate(zip(self.var_names, self.var_dims)):
            out.write(f"var {i} {name} {dim}\n")
        out.write(f"log_terms {len(self.log_terms)}\n")
        for i, t in enumerate(self.log_terms):
            out.write(f"log {i} const {t.const:.17g}\n")
            affine_lines(t)
        out.write(f"linear const {self.linear.const:.17g}\n")
        affine_lines(self.linear)
        out.write(f"constraints {len(self.constraints)}\n")
        for i, (expr, sense) in enumerate(self.constraints):
            out.write(f"con {i} {sense} const {expr.const:.17g}\n")
            affine_lines(expr)
        if stream is None:
            return out.getvalue()
        return None


@dataclass
class SolverResult:
    status: str
    values: list
    objective: float
    iterations: int
    residuals: dict

    @property
    def ok(self):
        return self.status in (OPTIMAL, INACCURATE)


class _Layout:
    def __init__(self, dims):
        self.dims = dims
        self.offsets = np.cumsum([0] + [n * n for n in dims])
        self.triu = {n: np.triu_indices(n) for n in set(dims)}
        self.triu1 = {n: np.triu_indices(n, 1) for n in set(dims)}

    @property
    def size(self):
        return int(self.offsets[-1])

    def trace_row(self, expr):
        row = np.zeros(self.size)
        for v, C in expr.terms.items():
            n = self.dims[v]
            H = hermitian_part(C)
            iu, iu1 = self.triu[n], self.triu1[n]
            a = H.real[iu] * np.where(iu[0] == iu[1], 1.0, 2.0)
            b = 2.0 * H.imag[iu1]
            off = self.offsets[v]
            row[off:off + a.size] += a
            row[off + a.size:off + n * n] += b
        return row

    def svec_map(self, v):
        """Sparse map from the variable block to svec(Y), Y the real embedding."""
        n = self.dims[v]
        n_a = n * (n + 1) // 2
        a_index = -np.ones((n, n), dtype=int)
        a_index[self.triu[n]] = np.arange(n_a)
        b_index = -np.ones((n, n), dtype=int)
        b_index[self.triu1[n]] = n_a + np.arange(n * (n - 1) // 2)

        rows, cols, vals = [], [], []
        k = 0
        for c in range(2 * n):
            for r in range(c + 1):
                scale = 1.0 if r == c else SQRT2
                if c < n or r >= n:
                    i, j = r % n, c % n
                    rows.append(k)
                    cols.append(a_index[i, j])
                    vals.append(scale)
                else:
                    # Y[r, c] = -B[r, c - n]
                    i, j = r, c - n
                    if i < j:
                        rows.append(k)
                        cols.append(b_index[i, j])
                        vals.append(-scale)
                    elif i > j:
                        rows.append(k)
                        cols.append(b_index[j, i])
                        vals.append(scale)
                k += 1
        cols = np.asarray(cols) + self.offsets[v]
        return sp.csc_matrix((vals, (rows, cols)), shape=(k, self.size))

    def unpack(self, x, v):
        n = self.dims[v]
        off = self.offsets[v]
        n_a = n * (n + 1) // 2
        A = np.zeros((n, n))
        A[self.triu[n]] = x[off:off + n_a]
        A = A + np.triu(A, 1).T
        B = np.zeros((n, n))
        B[self.triu1[n]] = x[off + n_a:off + n * n]
        B = B - B.T
        return A + 1j * B


def solve_conic(problem, tol=1e-8, inaccurate_tol=1e-5, max_iter=200, backend="cvxopt",
                fallback=True, verbose=False):
    """Maximize the problem's objective.

    Returns a :class:`SolverResult` whose ``values`` are the complex
    Hermitian matrices in variable order. Status is ``optimal`` at full
    accuracy, ``inaccurate`` when only the reduced tolerance
    ``inaccurate_tol`` is met, ``infeasible`` when infeasibility is
    certified and ``failure`` otherwise. With ``fallback`` a failed cvxopt
    solve is retried with Clarabel.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    scaled = problem.normalized()
    if backend == "cvxopt":
        result = _solve_cvxopt(scaled, tol, inaccurate_tol, max_iter, verbose)
        if result.status == FAILURE and fallback:
            result = _solve_clarabel(scaled, tol, inaccurate_tol, max_iter, verbose)
    else:
        result = _solve_clarabel(scaled, tol, inaccurate_tol, max_iter, verbose)
    if result.ok:
        result.objective = problem.objective_value(result.values)
        if not np.isfinite(result.objective):
            result.status = FAILURE
    return result


def _dual_data(problem):
    """Dual of the problem in cvxopt form.

    With multipliers lam (log terms), nu >= 0 (inequalities) and mu
    (equalities), the dual minimizes

        sum_l (lam_l alpha_l - ln lam_l - 1) + beta + nu.gamma + mu.eps

    subject to Z_v = -(B_v + sum lam A_lv + sum nu G_iv + sum mu E_ev) >= 0
    for every matrix block v; alpha, gamma, eps are the functionals'
    constants and beta the linear objective constant.
    """
    ineq, eq = [], []
    for expr, sense in problem.constraints:
        if sense == "==":
            eq.append(expr)
        elif sense == ">=":
            ineq.append(expr)
        else:
            ineq.append(expr.scaled(-1.0))
    funcs = problem.log_terms + ineq + eq
    n_l, n_i = len(problem.log_terms), len(ineq)
    n_x = len(funcs)

    G_l = np.zeros((n_i, n_x))
    G_l[np.arange(n_i), n_l + np.arange(n_i)] = -1.0
    blocks, h = [G_l], [np.zeros(n_i)]
    for v, n in enumerate(problem.var_dims):
        size = 4 * n * n
        cols = np.zeros((size, n_x))
        for i, fn in enumerate(funcs):
            if v in fn.terms:
                cols[:, i] = real_embedding(fn.terms[v]).ravel(order="F")
        blocks.append(cols)
        B = problem.linear.terms.get(v)
        h.append(np.zeros(size) if B is None else -real_embedding(B).ravel(order="F"))
    G = np.vstack(blocks)
    dims = {"l": n_i, "q": [], "s": [2 * n for n in problem.var_dims]}
    alpha = np.array([t.const for t in problem.log_terms])
    lin = np.array([e.const for e in ineq + eq])
    return G, np.concatenate(h), dims, alpha, lin, n_l, n_i


def _unpack_dual_psd(z, problem, offset):
    values = []
    for n in problem.var_dims:
        Z = z[offset:offset + 4 * n * n].reshape(2 * n, 2 * n, order="F")
        offset += 4 * n * n
        # X_hat = 2 Z; X = A + jB from its [[A, -B], [B, A]] structure
        values.append((Z[:n, :n] + Z[n:, n:]) + 1j * (Z[n:, :n] - Z[:n, n:]))
    return values


def _solve_cvxopt(problem, tol, inaccurate_tol, max_iter, verbose):
    from cvxopt import matrix, solvers, spdiag

    G, h, dims, alpha, lin, n_l, n_i = _dual_data(problem)
    n_x = G.shape[1]
    beta = problem.linear.const
    options = {"show_progress": verbose, "abstol": tol, "reltol": tol,
               "feastol": tol, "maxiters": max_iter}

    def F(x=None, z=None):
        if x is None:
            x0 = np.zeros(n_x)
            x0[:n_l] = 1.0
            return 0, matrix(x0)
        x = np.array(x).ravel()
        lam = x[:n_l]
        if np.any(lam <= 0):
            return None
        f = np.sum(lam * alpha - np.log(lam) - 1.0) + lin @ x[n_l:] + beta
        Df = matrix(np.concatenate([alpha - 1.0 / lam, lin])[None, :])
        if z is None:
            return matrix(f), Df
        hess = np.zeros(n_x)
        hess[:n_l] = z[0] / lam ** 2
        return matrix(f), Df, spdiag(matrix(hess))

    try:
        if n_l == 0:
            sol = solvers.conelp(matrix(lin), matrix(G), matrix(h), dims, options=options)
            z_key = "z"
        else:
            sol = solvers.cp(F, matrix(G), matrix(h), dims, options=options)
            z_key = "zl"
    except (ArithmeticError, ValueError) as exc:
        return SolverResult(FAILURE, [], float("nan"), 0, {"error": str(exc)})

    residuals = {
        "primal": _as_float(sol.get("dual infeasibility")),
        "dual": _as_float(sol.get("primal infeasibility")),
        "gap_abs": _as_float(sol.get("gap")),
        "gap_rel": _as_float(sol.get("relative gap")),
    }
    iterations = int(sol.get("iterations") or 0)
    raw = sol["status"]
    if raw == "dual infeasible":
        return SolverResult(INFEASIBLE, [], float("nan"), iterations, residuals)
    if raw == "primal infeasible":
        return SolverResult(FAILURE, [], float("nan"), iterations, residuals)
    if raw == "optimal":
        status = OPTIMAL
    elif all(np.isfinite(v) and v <= inaccurate_tol for v in
             (residuals["primal"], residuals["dual"], min(residuals["gap_abs"], residuals["gap_rel"]))):
        status = INACCURATE
    elif n_l > 0 and _certify_infeasible(problem, options):
        return SolverResult(INFEASIBLE, [], float("nan"), iterations, residuals)
    else:
        return SolverResult(FAILURE, [], float("nan"), iterations, residuals)
    z = np.array(sol[z_key]).ravel()
    values = _unpack_dual_psd(z, problem, n_i)
    return SolverResult(status, values, float("nan"), iterations, residuals)


def _certify_infeasible(problem, options):
    from cvxopt import matrix, solvers

    feas = ConicProblem(list(problem.var_names), list(problem.var_dims),
                        constraints=list(problem.constraints))
    G, h, dims, _, lin, _, _ = _dual_data(feas)
    try:
        sol = solvers.conelp(matrix(lin), matrix(G), matrix(h), dims, options=options)
    except (ArithmeticError, ValueError):
        return False
    return sol["status"] == "dual infeasible"


def _as_float(value):
    return float("nan") if value is None else float(value)


def _solve_clarabel(problem, tol, inaccurate_tol, max_iter, verbose):
    layout = _Layout(problem.var_dims)
    n_x = layout.size
    n_t = len(problem.log_terms)
    n = n_x + n_t

    def pad(row):
        return np.concatenate([row, np.zeros(n_t)])

    eq_rows, eq_b, ineq_rows, ineq_b = [], [], [], []
    for expr, sense in problem.constraints:
        row = pad(layout.trace_row(expr))
        if sense == "==":
            eq_rows.append(row)
            eq_b.append(-expr.const)
        elif sense == ">=":
            ineq_rows.append(-row)
            ineq_b.append(expr.const)
        else:
            ineq_rows.append(row)
            ineq_b.append(-expr.const)

    blocks, b, cones = [], [], []
    if eq_rows:
        blocks.append(sp.csc_matrix(np.vstack(eq_rows)))
        b.extend(eq_b)
        cones.append(clarabel.ZeroConeT(len(eq_rows)))
    if ineq_rows:
        blocks.append(sp.csc_matrix(np.vstack(ineq_rows)))
        b.extend(ineq_b)
        cones.append(clarabel.NonnegativeConeT(len(ineq_rows)))
    for i, term in enumerate(problem.log_terms):
        rows = np.zeros((3, n))
        rows[0, n_x + i] = -1.0
        rows[2] = -pad(layout.trace_row(term))
        blocks.append(sp.csc_matrix(rows))
        b.extend([0.0, 1.0, term.const])
        cones.append(clarabel.ExponentialConeT())
    for v, dim in enumerate(problem.var_dims):
        M = layout.svec_map(v)
        blocks.append(sp.hstack([-M, sp.csc_matrix((M.shape[0], n_t))]).tocsc())
        b.extend([0.0] * M.shape[0])
        cones.append(clarabel.PSDTriangleConeT(2 * dim))

    A = sp.vstack(blocks).tocsc()
    q = -pad(layout.trace_row(problem.linear))
    q[n_x:] = -1.0
    P = sp.csc_matrix((n, n))

    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.reduced_tol_gap_abs = inaccurate_tol
    settings.reduced_tol_gap_rel = inaccurate_tol
    settings.reduced_tol_feas = inaccurate_tol
    settings.presolve_enable = False
    settings.chordal_decomposition_enable = False
    settings.direct_solve_method = "faer"

    solver = clarabel.DefaultSolver(P, q, A, np.asarray(b, dtype=float), cones, settings)
    sol = solver.solve()
    status = _map_status(sol.status)
    info = solver.info if hasattr(solver, "info") else None
    residuals = {"primal": float(sol.r_prim), "dual": float(sol.r_dual)}
    if info is not None:
        residuals["gap_rel"] = float(info.gap_rel)
        residuals["gap_abs"] = float(info.gap_abs)

    if status in (OPTIMAL, INACCURATE):
        x = np.asarray(sol.x)
        values = [layout.unpack(x, v) for v in range(len(problem.var_dims))]
    else:
        values = []
    return SolverResult(status, values, float("nan"), int(sol.iterations), residuals)


def _map_status(status):
    name = str(status).split(".")[-1]
    if name == "Solved":
        return OPTIMAL
    if name == "AlmostSolved":
        return INACCURATE
    if name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return INFEASIBLE
    return FAILURE
