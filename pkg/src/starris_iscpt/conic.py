"""Solver-agnostic description and solution of complex semidefinite programs.

A ConicProgram collects Hermitian PSD matrix variables, real scalar
variables, affine Hermitian LMI blocks and affine linear constraints, with a
linear objective maximized.  Solving lowers the program to a real cone LP:
every complex Hermitian block is embedded as a real symmetric block of twice
the dimension and handed to CVXOPT's conelp.  An exact block-compression
presolve shrinks LMIs whose coefficient matrices act as a scalar on a common
invariant complement (the dominant case when the RIS matrix handed to the
active subproblem is rank one).  Every solution reported optimal is
re-audited against the original program outside the solver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ScalarVar",
    "MatrixVar",
    "LmiBlock",
    "LinearConstraint",
    "ConicProgram",
    "SolveSettings",
    "SolveResult",
    "Lowering",
    "embed_hermitian",
    "herm_basis",
    "herm_to_components",
    "components_to_herm",
    "dominant_eigenvector",
    "eigenvalue_ratio",
    "lower_program",
    "solve_lowered",
    "solve",
    "audit_solution",
    "dump_sdpa",
]

_HERM_TOL = 1e-9


# ---------------------------------------------------------------------------
# Hermitian parametrization helpers
# ---------------------------------------------------------------------------

_basis_cache = {}


def herm_basis(m):
    """Orthonormal (Frobenius) basis of m x m Hermitian matrices.

    Order: the m diagonal units E_aa, then for each pair a < b (row-major)
    the real part element (E_ab + E_ba)/sqrt(2) followed by the imaginary
    part element (jE_ab - jE_ba)/sqrt(2).  Length m^2.
    """
    if m in _basis_cache:
        return _basis_cache[m]
    basis = []
    for a in range(m):
        B = np.zeros((m, m), dtype=complex)
        B[a, a] = 1.0
        basis.append(B)
    s = 1.0 / np.sqrt(2.0)
    for a in range(m):
        for b in range(a + 1, m):
            B = np.zeros((m, m), dtype=complex)
            B[a, b] = s
            B[b, a] = s
            basis.append(B)
            B = np.zeros((m, m), dtype=complex)
            B[a, b] = 1j * s
            B[b, a] = -1j * s
            basis.append(B)
    _basis_cache[m] = basis
    return basis


def herm_to_components(X):
    """Real coordinate vector of a Hermitian matrix in the herm_basis order."""
    m = X.shape[0]
    comps = np.empty(m * m)
    comps[:m] = np.real(np.diag(X))
    k = m
    s = np.sqrt(2.0)
    for a in range(m):
        for b in range(a + 1, m):
            comps[k] = s * X[a, b].real
            comps[k + 1] = s * X[a, b].imag
            k += 2
    return comps


def components_to_herm(comps, m):
    """Inverse of herm_to_components."""
    X = np.zeros((m, m), dtype=complex)
    X[np.arange(m), np.arange(m)] = comps[:m]
    k = m
    s = 1.0 / np.sqrt(2.0)
    for a in range(m):
        for b in range(a + 1, m):
            val = s * (comps[k] + 1j * comps[k + 1])
            X[a, b] = val
            X[b, a] = np.conj(val)
            k += 2
    return X


def embed_hermitian(H):
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian H.

    The embedding is PSD exactly when H is, and carries the spectrum of H
    with every eigenvalue doubled in multiplicity.
    """
    H = np.asarray(H)
    scale = max(1.0, np.abs(H).max()) if H.size else 1.0
    if np.abs(H - H.conj().T).max() > _HERM_TOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def _sym(H):
    return 0.5 * (H + H.conj().T)


def dominant_eigenvector(H, tie_tol=1e-12):
    """Unit dominant eigenvector with a deterministic convention.

    Among eigenvectors of the (numerically) largest eigenvalue the one with
    the lexicographically largest magnitude pattern is chosen, and the first
    entry above 1e-12 of the vector's norm is rotated to the nonnegative
    real axis, so the result is a pure function of the matrix.
    """
    w, V = np.linalg.eigh(_sym(np.asarray(H, dtype=complex)))
    top = w[-1]
    cand = [V[:, i] for i in range(len(w)) if w[i] >= top - tie_tol * max(1.0, abs(top))]
    if len(cand) > 1:
        cand.sort(key=lambda v: tuple(np.round(-np.abs(v), 12)))
    v = cand[0]
    nz = np.nonzero(np.abs(v) > 1e-12 * np.linalg.norm(v))[0]
    if nz.size:
        v = v * np.exp(-1j * np.angle(v[nz[0]]))
    return v


def eigenvalue_ratio(H):
    """lambda_2 / lambda_1 of a Hermitian PSD matrix (0 for rank <= 1)."""
    w = np.linalg.eigvalsh(_sym(np.asarray(H, dtype=complex)))
    if w[-1] <= 0:
        return 1.0
    if len(w) < 2:
        return 0.0
    return float(max(0.0, w[-2]) / w[-1])


# ---------------------------------------------------------------------------
# Program description
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarVar:
    name: str
    nonneg: bool = False


@dataclass(frozen=True)
class MatrixVar:
    """Hermitian matrix variable; constrained PSD unless psd=False."""

    name: str
    dim: int
    psd: bool = True


@dataclass
class LmiBlock:
    """Affine Hermitian expression required PSD.

    value(x) = constant + sum_s x_s * scalar_coeffs[s]
                        + sum_X sum_i comp_i(X) * matrix_coeffs[X][i]
    where comp_i are the herm_basis coordinates of matrix variable X.
    """

    name: str
    dim: int
    constant: np.ndarray
    scalar_coeffs: dict = field(default_factory=dict)
    matrix_coeffs: dict = field(default_factory=dict)

    def evaluate(self, values):
        V = self.constant.astype(complex).copy()
        for s, C in self.scalar_coeffs.items():
            V += values[s] * C
        for x, tensor in self.matrix_coeffs.items():
            comps = herm_to_components(values[x])
            V += np.tensordot(comps, tensor, axes=(0, 0))
        return V


@dataclass
class LinearConstraint:
    """sum_s a_s x_s + sum_X tr(C_X X) (sense) rhs, with C_X Hermitian."""

    name: str
    scalar_coeffs: dict
    matrix_coeffs: dict
    rhs: float
    sense: str  # "<=", ">=", "=="

    def evaluate(self, values):
        v = 0.0
        for s, a in self.scalar_coeffs.items():
            v += a * values[s]
        for x, C in self.matrix_coeffs.items():
            v += float(np.real(np.trace(C @ values[x])))
        return v


@dataclass
class ConicProgram:
    """Immutable-once-built description of one SDP (objective sense: max)."""

    scalar_vars: list = field(default_factory=list)
    matrix_vars: list = field(default_factory=list)
    lmi_blocks: list = field(default_factory=list)
    linear_constraints: list = field(default_factory=list)
    objective_scalar: dict = field(default_factory=dict)
    objective_matrix: dict = field(default_factory=dict)

    # -- builder helpers ----------------------------------------------------
    def add_scalar(self, name, nonneg=False):
        self.scalar_vars.append(ScalarVar(name, nonneg))
        return name

    def add_matrix(self, name, dim, psd=True):
        self.matrix_vars.append(MatrixVar(name, dim, psd))
        return name

    def add_lmi(self, block):
        self.lmi_blocks.append(block)

    def add_linear(self, name, scalar_coeffs, matrix_coeffs, rhs, sense):
        self.linear_constraints.append(
            LinearConstraint(name, dict(scalar_coeffs), dict(matrix_coeffs), rhs, sense)
        )

    def set_objective(self, scalar_terms=None, matrix_terms=None):
        self.objective_scalar = dict(scalar_terms or {})
        self.objective_matrix = dict(matrix_terms or {})

    def with_objective(self, scalar_terms=None, matrix_terms=None):
        prog = replace(self)
        prog.objective_scalar = dict(scalar_terms or {})
        prog.objective_matrix = dict(matrix_terms or {})
        return prog

    # -- introspection ------------------------------------------------------
    def var_names(self):
        return [v.name for v in self.scalar_vars] + [v.name for v in self.matrix_vars]

    def validate(self):
        names = set(self.var_names())
        if len(names) != len(self.scalar_vars) + len(self.matrix_vars):
            raise ValueError("duplicate variable names")
        dims = {v.name: v.dim for v in self.matrix_vars}
        for blk in self.lmi_blocks:
            for s in blk.scalar_coeffs:
                if s not in names:
                    raise ValueError(f"LMI {blk.name} references unknown scalar {s}")
            for x, tensor in blk.matrix_coeffs.items():
                if x not in dims:
                    raise ValueError(f"LMI {blk.name} references unknown matrix {x}")
                if tensor.shape != (dims[x] ** 2, blk.dim, blk.dim):
                    raise ValueError(f"LMI {blk.name}: coefficient tensor shape mismatch")
        for con in self.linear_constraints:
            for s in con.scalar_coeffs:
                if s not in names:
                    raise ValueError(f"constraint {con.name} references unknown scalar {s}")
            for x in con.matrix_coeffs:
                if x not in dims:
                    raise ValueError(f"constraint {con.name} references unknown matrix {x}")

    def objective_value(self, values):
        v = 0.0
        for s, a in self.objective_scalar.items():
            v += a * values[s]
        for x, C in self.objective_matrix.items():
            v += float(np.real(np.trace(C @ values[x])))
        return v


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------


@dataclass
class SolveSettings:
    abstol: float = 1e-7
    reltol: float = 1e-6
    feastol: float = 1e-7
    max_iters: int = 100
    presolve: bool = True
    audit: bool = True
    audit_tol: float = 1e-6
    refinement: int = 1
    retries: int = 2  # re-solve with 10x looser tolerances on breakdown


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | numerical_failure | max_iterations
    values: dict | None
    objective: float | None
    solve_time: float = 0.0
    solver_status: str = ""
    audit_report: dict | None = None

    @property
    def ok(self):
        return self.status == "optimal"


class _VarIndex:
    """Maps program variables onto a flat real vector."""

    def __init__(self, prog):
        self.offsets = {}
        self.sizes = {}
        self.dims = {}
        n = 0
        for v in prog.scalar_vars:
            self.offsets[v.name] = n
            self.sizes[v.name] = 1
            n += 1
        for v in prog.matrix_vars:
            self.offsets[v.name] = n
            self.sizes[v.name] = v.dim * v.dim
            self.dims[v.name] = v.dim
            n += v.dim * v.dim
        self.total = n

    def extract(self, x, prog):
        values = {}
        for v in prog.scalar_vars:
            values[v.name] = float(x[self.offsets[v.name]])
        for v in prog.matrix_vars:
            o = self.offsets[v.name]
            values[v.name] = components_to_herm(x[o:o + v.dim * v.dim], v.dim)
        return values


def _collect_block_coeffs(blk, index):
    """Yield (flat var index, Hermitian coefficient matrix) for one LMI."""
    for s, C in blk.scalar_coeffs.items():
        yield index.offsets[s], C
    for x, tensor in blk.matrix_coeffs.items():
        o = index.offsets[x]
        for i in range(tensor.shape[0]):
            yield o + i, tensor[i]


def _presolve_block(blk, index, tol=1e-11):
    """Exact compression of one LMI block.

    Finds a subspace V such that every coefficient matrix T (and the
    constant) satisfies T = P_V T P_V + alpha_T (I - P_V).  The block is then
    equivalent to its compression onto V plus the linear inequality
    sum alpha_i x_i + alpha_0 >= 0.  Returns None when no compression exists.
    """
    d = blk.dim
    mats = [(None, blk.constant)] + list(_collect_block_coeffs(blk, index))
    cols = []
    alphas = []
    for _, T in mats:
        diag = np.real(np.diag(T))
        # bulk scalar: the most frequent diagonal value, if it fills > d/2 slots
        vals, counts = np.unique(np.round(diag, 12), return_counts=True)
        alpha = float(vals[np.argmax(counts)]) if counts.max() > d // 2 else 0.0
        R = T - alpha * np.eye(d)
        alphas.append(alpha)
        norms = np.linalg.norm(R, axis=0)
        keep = norms > tol * max(1.0, norms.max())
        if keep.any():
            cols.append(R[:, keep])
    if not cols:
        return None
    pool = np.hstack(cols)
    # orthonormal basis of the joint column space (SVD handles rank safely)
    u, sv, _ = np.linalg.svd(pool, full_matrices=False)
    Vb = u[:, sv > tol * max(1.0, sv[0] if sv.size else 1.0)]
    v = Vb.shape[1]
    if v >= d - 1:
        return None
    # exact validation: T - alpha I must live entirely on V
    P = Vb @ Vb.conj().T
    Ic = np.eye(d)
    for (_, T), alpha in zip(mats, alphas):
        R = T - alpha * Ic
        resid = R - P @ R @ P
        if np.abs(resid).max() > 1e-9 * max(1.0, np.abs(T).max()):
            return None
    # compressed block + complement inequality
    comp = LmiBlock(blk.name + "/c", v, _sym(Vb.conj().T @ blk.constant @ Vb))
    comp._flat = []
    lin_scalar = {}
    a0 = alphas[0]
    for (pos, T), alpha in zip(mats[1:], alphas[1:]):
        comp._flat.append((pos, _sym(Vb.conj().T @ T @ Vb)))
        if alpha != 0.0:
            lin_scalar[pos] = lin_scalar.get(pos, 0.0) + alpha
    lin = (lin_scalar, a0) if (lin_scalar or a0 != 0.0) else None
    return comp, lin


def _lower(prog, index, presolve):
    """Lower a validated program to CVXOPT conelp data.

    Returns (c, G, h, dims, Aeq, beq).  G rows: 'l' block first, then one
    full-storage 's' block per PSD constraint (embedded real symmetric).
    """
    n = index.total
    rows_l = []
    h_l = []
    eq_rows = []
    eq_rhs = []

    for v in prog.scalar_vars:
        if v.nonneg:
            r = np.zeros(n)
            r[index.offsets[v.name]] = -1.0
            rows_l.append(r)
            h_l.append(0.0)

    for con in prog.linear_constraints:
        r = np.zeros(n)
        for s, a in con.scalar_coeffs.items():
            r[index.offsets[s]] = a
        for x, C in con.matrix_coeffs.items():
            o = index.offsets[x]
            r[o:o + index.sizes[x]] = herm_to_components(C)
        if con.sense == "==":
            eq_rows.append(r)
            eq_rhs.append(con.rhs)
        elif con.sense == "<=":
            rows_l.append(r)
            h_l.append(con.rhs)
        else:
            rows_l.append(-r)
            h_l.append(-con.rhs)

    # PSD blocks: variable cones plus LMIs (possibly compressed)
    blocks = []
    for v in prog.matrix_vars:
        if not v.psd:
            continue
        blk = LmiBlock(v.name + ">=0", v.dim, np.zeros((v.dim, v.dim), complex))
        blk._flat = [(index.offsets[v.name] + i, B) for i, B in enumerate(herm_basis(v.dim))]
        blocks.append(blk)
    for blk in prog.lmi_blocks:
        comp = _presolve_block(blk, index) if presolve else None
        if comp is not None:
            cblk, lin = comp
            blocks.append(cblk)
            if lin is not None:
                lin_scalar, a0 = lin
                r = np.zeros(n)
                for pos, a in lin_scalar.items():
                    r[pos] = -a
                rows_l.append(r)
                h_l.append(a0)
        else:
            flat = LmiBlock(blk.name, blk.dim, blk.constant)
            flat._flat = list(_collect_block_coeffs(blk, index))
            blocks.append(flat)

    s_dims = []
    G_parts = []
    h_parts = []
    for blk in blocks:
        de = 2 * blk.dim
        Gb = np.zeros((de * de, n))
        for pos, C in getattr(blk, "_flat", []):
            Gb[:, pos] -= embed_hermitian(_sym(C)).ravel(order="F")
        G_parts.append(Gb)
        h_parts.append(embed_hermitian(_sym(blk.constant)).ravel(order="F"))
        s_dims.append(de)

    if rows_l:
        G = np.vstack([np.asarray(rows_l)] + G_parts)
        h = np.concatenate([np.asarray(h_l)] + h_parts)
    else:
        G = np.vstack(G_parts)
        h = np.concatenate(h_parts)

    c = np.zeros(n)
    for s, a in prog.objective_scalar.items():
        c[index.offsets[s]] -= a  # conelp minimizes
    for x, C in prog.objective_matrix.items():
        o = index.offsets[x]
        c[o:o + index.sizes[x]] -= herm_to_components(C)

    dims = {"l": len(h_l), "q": [], "s": s_dims}
    Aeq = np.asarray(eq_rows) if eq_rows else None
    beq = np.asarray(eq_rhs) if eq_rows else None
    return c, G, h, dims, Aeq, beq


def audit_solution(prog, values, tol=1e-6):
    """Independent feasibility audit of a candidate solution.

    Re-evaluates every LMI block (minimum eigenvalue) and every linear
    constraint of the original program.  Violations are measured against
    `tol` scaled by the block magnitude.
    """
    worst_lmi = 0.0
    worst_lin = 0.0
    ok = True
    for blk in prog.lmi_blocks:
        V = blk.evaluate(values)
        lam = np.linalg.eigvalsh(_sym(V))[0]
        scale = max(1.0, np.abs(V).max())
        short = min(0.0, lam) / scale
        worst_lmi = min(worst_lmi, short)
        if short < -tol:
            ok = False
    for v in prog.matrix_vars:
        if v.psd:
            lam = np.linalg.eigvalsh(_sym(values[v.name]))[0]
            scale = max(1.0, np.abs(values[v.name]).max())
            short = min(0.0, lam) / scale
            worst_lmi = min(worst_lmi, short)
            if short < -tol:
                ok = False
    for v in prog.scalar_vars:
        if v.nonneg and values[v.name] < -tol:
            ok = False
            worst_lin = min(worst_lin, values[v.name])
    for con in prog.linear_constraints:
        g = con.evaluate(values)
        scale = max(1.0, abs(con.rhs))
        if con.sense == "<=":
            viol = (g - con.rhs) / scale
        elif con.sense == ">=":
            viol = (con.rhs - g) / scale
        else:
            viol = abs(g - con.rhs) / scale
        if viol > tol:
            ok = False
        worst_lin = min(worst_lin, -max(0.0, viol))
    return {"ok": ok, "worst_lmi_eig": worst_lmi, "worst_linear": worst_lin}


class Lowering:
    """A program lowered once to real cone-LP data, reusable across solves
    that only change the objective or append linear inequalities."""

    def __init__(self, prog, index, c, G, h, dims, Aeq, beq):
        self.prog = prog
        self.index = index
        self.c = c
        self.G = G
        self.h = h
        self.dims = dims
        self.Aeq = Aeq
        self.beq = beq
        self._cache = {}

    def objective_vector(self, scalar_terms, matrix_terms):
        c = np.zeros(self.index.total)
        for s, a in (scalar_terms or {}).items():
            c[self.index.offsets[s]] -= a  # conelp minimizes
        for x, C in (matrix_terms or {}).items():
            o = self.index.offsets[x]
            c[o:o + self.index.sizes[x]] -= herm_to_components(C)
        return c

    def inequality_row(self, scalar_coeffs, matrix_coeffs, rhs, sense):
        """Row in <= orientation for prepending to the 'l' cone."""
        r = np.zeros(self.index.total)
        for s, a in scalar_coeffs.items():
            r[self.index.offsets[s]] = a
        for x, C in matrix_coeffs.items():
            o = self.index.offsets[x]
            r[o:o + self.index.sizes[x]] = herm_to_components(C)
        if sense == ">=":
            return -r, -rhs
        if sense == "<=":
            return r, rhs
        raise ValueError("extra rows must be inequalities")

    def cvxopt_matrices(self):
        from cvxopt import matrix

        if "G" not in self._cache:
            self._cache["G"] = matrix(self.G)
            self._cache["h"] = matrix(self.h)
            if self.Aeq is not None:
                self._cache["A"] = matrix(self.Aeq)
                self._cache["b"] = matrix(self.beq)
        return self._cache


def lower_program(prog, presolve=True):
    prog.validate()
    index = _VarIndex(prog)
    c, G, h, dims, Aeq, beq = _lower(prog, index, presolve)
    return Lowering(prog, index, c, G, h, dims, Aeq, beq)


def _solve_once(low, c, Gm, hm, dims, settings, loosen, extra_audit=None):
    from cvxopt import matrix, solvers

    opts = {
        "show_progress": False,
        "maxiters": settings.max_iters,
        "abstol": settings.abstol * loosen,
        "reltol": settings.reltol * loosen,
        "feastol": settings.feastol * loosen,
        "refinement": settings.refinement,
    }
    args = [matrix(c), Gm, hm, dims]
    cache = low.cvxopt_matrices()
    if low.Aeq is not None:
        args += [cache["A"], cache["b"]]
    t0 = time.perf_counter()
    try:
        sol = solvers.conelp(*args, options=opts)
    except (ValueError, ArithmeticError, ZeroDivisionError) as exc:
        return SolveResult("numerical_failure", None, None,
                           time.perf_counter() - t0, f"exception: {exc}")
    dt = time.perf_counter() - t0

    st = sol["status"]
    if st == "primal infeasible":
        return SolveResult("infeasible", None, None, dt, st)
    if st == "dual infeasible":
        # objective unbounded over the feasible set; callers never build such
        # programs intentionally, so surface it as a numerical failure
        return SolveResult("numerical_failure", None, None, dt, st)
    if sol["x"] is None:
        return SolveResult("numerical_failure", None, None, dt, st)

    x = np.asarray(sol["x"]).ravel()
    values = low.index.extract(x, low.prog)
    objective = float(-c @ x)

    if st == "unknown":
        # accept a stalled-but-converged iterate when the solver's own gap
        # and residuals are small; the independent audit still gates it
        relgap = sol.get("relative gap")
        pres = sol.get("primal infeasibility")
        near = (relgap is not None and relgap < 1e-5
                and pres is not None and pres < 100 * settings.feastol * loosen)
        if not near:
            status = "max_iterations" if sol.get("iterations", 0) >= settings.max_iters \
                else "numerical_failure"
            return SolveResult(status, values, objective, dt, st)
        st = "unknown (near-optimal)"

    report = None
    if settings.audit:
        report = audit_solution(low.prog, values, settings.audit_tol)
        if report["ok"] and extra_audit is not None:
            report = extra_audit(values, report)
        if not report["ok"]:
            return SolveResult("numerical_failure", values, objective, dt,
                               st + " (audit failed)", report)
    return SolveResult("optimal", values, objective, dt, st, report)


def solve_lowered(low, settings=None, objective=None, extra_ineqs=None):
    """Solve a lowered program, optionally overriding the linear objective
    (scalar_terms, matrix_terms) or prepending linear inequality rows
    (scalar_coeffs, matrix_coeffs, rhs, sense)."""
    settings = settings or SolveSettings()
    c = low.c if objective is None else low.objective_vector(*objective)

    if extra_ineqs:
        from cvxopt import matrix

        rows, rhos = [], []
        for scal, mats, rhs, sense in extra_ineqs:
            r, b = low.inequality_row(scal, mats, rhs, sense)
            rows.append(r)
            rhos.append(b)
        G = np.vstack([np.asarray(rows), low.G])
        h = np.concatenate([np.asarray(rhos), low.h])
        dims = {"l": low.dims["l"] + len(rows), "q": [], "s": low.dims["s"]}
        Gm, hm = matrix(G), matrix(h)

        def extra_audit(values, report):
            worst = report.get("worst_linear", 0.0)
            ok = report["ok"]
            for scal, mats, rhs, sense in extra_ineqs:
                g = sum(a * values[s] for s, a in scal.items())
                g += sum(float(np.real(np.trace(C @ values[x]))) for x, C in mats.items())
                viol = (g - rhs) if sense == "<=" else (rhs - g)
                viol /= max(1.0, abs(rhs))
                if viol > settings.audit_tol:
                    ok = False
                worst = min(worst, -max(0.0, viol))
            return {**report, "ok": ok, "worst_linear": worst}
    else:
        cache = low.cvxopt_matrices()
        Gm, hm, dims = cache["G"], cache["h"], low.dims
        extra_audit = None

    total = 0.0
    result = None
    for attempt in range(settings.retries + 1):
        result = _solve_once(low, c, Gm, hm, dims, settings, 10.0 ** attempt,
                             extra_audit)
        total += result.solve_time
        if result.status in ("optimal", "infeasible"):
            break
    result.solve_time = total
    return result


def solve(prog, settings=None):
    """Solve a ConicProgram; objective sense is maximize.

    Infeasibility is reported from the solver certificate.  Numerical
    breakdowns trigger deterministic re-solves with tenfold-relaxed
    tolerances; a solution that fails the independent audit is demoted to
    numerical_failure rather than returned as optimal.
    """
    settings = settings or SolveSettings()
    return solve_lowered(lower_program(prog, settings.presolve), settings)


# ---------------------------------------------------------------------------
# Debug dump (SDPA sparse format on the real embedding)
# ---------------------------------------------------------------------------


def dump_sdpa(prog, path):
    """Write the real-embedded program in SDPA sparse format (.dat-s).

    Equalities are split into opposing inequalities; the 'l' rows form one
    diagonal block (negative size per SDPA convention).  Layout documented in
    the README.  Intended for debugging, not for round-tripping.
    """
    index = _VarIndex(prog)
    c, G, h, dims, Aeq, beq = _lower(prog, index, presolve=False)
    if Aeq is not None:
        G = np.vstack([G[:dims["l"]], Aeq, -Aeq, G[dims["l"]:]])
        h = np.concatenate([h[:dims["l"]], beq, -beq, h[dims["l"]:]])
        dims = {"l": dims["l"] + 2 * len(beq), "q": [], "s": dims["s"]}
    n = G.shape[1]
    blocks = ([-dims["l"]] if dims["l"] else []) + dims["s"]
    lines = [f"{n} = mDIM", f"{len(blocks)} = nBLOCK",
             " ".join(str(b) for b in blocks) + " = bLOCKsTRUCT",
             " ".join(f"{-v:.17g}" for v in c)]

    def emit(mat_idx, vec):
        off = 0
        bno = 0
        if dims["l"]:
            bno += 1
            for i, val in enumerate(vec[:dims["l"]]):
                if val != 0.0:
                    lines.append(f"{mat_idx} {bno} {i + 1} {i + 1} {val:.17g}")
            off = dims["l"]
        for d in dims["s"]:
            bno += 1
            M = vec[off:off + d * d].reshape(d, d, order="F")
            for i in range(d):
                for j in range(i, d):
                    if M[i, j] != 0.0:
                        lines.append(f"{mat_idx} {bno} {i + 1} {j + 1} {M[i, j]:.17g}")
            off += d * d

    emit(0, h)          # F0 = h  (SDPA: F(y) = sum y_i F_i - F0 >= 0; here h - Gx >= 0)
    for k in range(n):
        emit(k + 1, -G[:, k])
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
