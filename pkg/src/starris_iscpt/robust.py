"""Worst-case robustification of the design constraints.

Each semi-infinite constraint over a Frobenius ball of cascaded-channel
error is vectorized (trace -> Kronecker quadratic form) and converted by the
S-procedure into one linear matrix inequality of dimension MN+1 with a
nonnegative multiplier.  Four families exist: information-rate, per-ER
energy, eavesdropper-rate and sensing-gain.  A sampling oracle certifies
soundness of any solved design by re-evaluating the underlying quadratic
constraints on perturbed channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conic
from .channels import sample_uncertainty_batch
from .metrics import sinr_thresholds

__all__ = [
    "LmiFamily",
    "kron_quadratic_form",
    "build_s_matrices",
    "build_lmi",
    "quadratic_margins",
    "verify_s_procedure",
    "assemble_robust_program",
    "assemble_nominal_program",
    "enumerate_families",
]

KIND_IR = "ir_rate"
KIND_ENERGY = "energy"
KIND_EVE = "eve"
KIND_SENSING = "sensing"


def kron_quadratic_form(A, B, C, D):
    """vec(A)^H (D^T kron B) vec(C); equals tr(A^H B C D) for conformable
    shapes (A, C: n x m, B: n x n, D: m x m).  Column-major vectorization."""
    A, B, C, D = (np.asarray(X) for X in (A, B, C, D))
    if A.shape != C.shape or B.shape[0] != A.shape[0] or D.shape[0] != A.shape[1]:
        raise ValueError("non-conformable shapes")
    va = A.ravel(order="F")
    vc = C.ravel(order="F")
    return complex(va.conj() @ np.kron(D.T, B) @ vc)


def build_s_matrices(W_list, V, gamma, eta):
    """Numeric S matrices (transposed combinations of the lifted design).

    S1[k] scales user k's own beamformer by 1/Gamma against interference,
    S2 = S4 collect the full transmit covariance, S3[k] caps the power an
    eavesdropper can extract from stream k via 1/eta.
    """
    if gamma <= 0 or eta <= 0:
        raise ValueError("SINR targets must be positive (zero rate thresholds "
                         "are handled upstream)")
    W_list = [np.asarray(W) for W in W_list]
    V = np.asarray(V)
    total = sum(W_list) + V
    S1 = [(W_list[k] / gamma - (total - V - W_list[k]) - V).T for k in range(len(W_list))]
    S2 = total.T
    S3 = [((total - V - W_list[k]) + V - W_list[k] / eta).T for k in range(len(W_list))]
    S4 = total.T
    return S1, S2, S3, S4


def _corner_sign(kind):
    # signed constant added to the corner: -sigma_I^2, -xi, +sigma_e^2, -Lambda
    return {KIND_IR: -1.0, KIND_ENERGY: -1.0, KIND_EVE: +1.0, KIND_SENSING: -1.0}[kind]


def _s_coefficients(kind, k, n_users, gamma, eta, with_v):
    """Scalar weight of each design variable inside the family's S matrix."""
    coeffs = {}
    for j in range(n_users):
        if kind == KIND_IR:
            coeffs[f"W{j}"] = 1.0 / gamma if j == k else -1.0
        elif kind == KIND_EVE:
            coeffs[f"W{j}"] = -1.0 / eta if j == k else 1.0
        else:
            coeffs[f"W{j}"] = 1.0
    if with_v:
        coeffs["V"] = -1.0 if kind == KIND_IR else 1.0
    return coeffs


def _bordered_tensor_active(basis_stack, Q, h, coeff):
    """Coefficient tensor of one matrix variable in an active-mode LMI.

    Entry i is the bordered form of coeff * (basis_i^T kron Q) at the
    nominal vectorized estimate h.
    """
    m2 = basis_stack.shape[0]
    MN = Q.shape[0] * basis_stack.shape[1]
    K = coeff * np.einsum("iba,nm->ianbm", basis_stack, Q).reshape(m2, MN, MN)
    return _border_batch(K, h)


def _bordered_tensor_passive(S, basis_stack, h):
    """Coefficient tensor of a RIS matrix variable: bordered S kron basis_i."""
    n2 = basis_stack.shape[0]
    MN = S.shape[0] * basis_stack.shape[1]
    K = np.einsum("ab,inm->ianbm", S, basis_stack).reshape(n2, MN, MN)
    return _border_batch(K, h)


def _border_batch(K, h):
    n, MN, _ = K.shape
    out = np.zeros((n, MN + 1, MN + 1), dtype=complex)
    cols = K @ h
    out[:, :MN, :MN] = K
    out[:, :MN, MN] = cols
    out[:, MN, :MN] = cols.conj()
    out[:, MN, MN] = np.real(np.einsum("n,in->i", h.conj(), cols))
    return out


def build_lmi(kind, estimate, q_l, s_matrix, delta, offset, multiplier):
    """One S-procedure LMI block of dimension MN + 1.

    Exactly one of q_l / s_matrix is symbolic: pass q_l as an ndarray and
    s_matrix as a dict {var name: scalar weight} for the active subproblem,
    or s_matrix as an ndarray (already transposed) and q_l as a variable
    name for the passive one.  `offset` is the family's constant
    (sigma_I^2, sigma_e^2, Lambda) or a scalar-variable name (the auxiliary
    objective for the energy family); `multiplier` names the nonnegative
    S-procedure certificate variable.
    """
    if delta < 0:
        raise ValueError("uncertainty radius must be nonnegative")
    estimate = np.asarray(estimate)
    N, M = estimate.shape
    MN = N * M
    h = estimate.ravel(order="F")
    sign = _corner_sign(kind)

    const = np.zeros((MN + 1, MN + 1), dtype=complex)
    blk = conic.LmiBlock(f"{kind}", MN + 1, const)

    tau_coeff = np.zeros((MN + 1, MN + 1), dtype=complex)
    tau_coeff[:MN, :MN] = np.eye(MN)
    tau_coeff[MN, MN] = -delta * delta
    blk.scalar_coeffs[multiplier] = tau_coeff

    if isinstance(offset, str):
        c = np.zeros((MN + 1, MN + 1), dtype=complex)
        c[MN, MN] = sign
        blk.scalar_coeffs[offset] = c
    else:
        const[MN, MN] = sign * offset

    if isinstance(s_matrix, dict):
        Q = np.asarray(q_l)
        basis = np.stack(conic.herm_basis(M))
        for var, coeff in s_matrix.items():
            blk.matrix_coeffs[var] = _bordered_tensor_active(basis, Q, h, coeff)
    else:
        S = np.asarray(s_matrix)
        basis = np.stack(conic.herm_basis(N))
        blk.matrix_coeffs[q_l] = _bordered_tensor_passive(S, basis, h)
    return blk


@dataclass(frozen=True)
class LmiFamily:
    """Descriptor of one robust constraint: which node, which side, which
    multiplier, the ball radius and the corner offset."""

    kind: str
    user: int | None
    er: int | None
    target: int | None
    side: str
    multiplier: str
    delta: float
    offset: float | str

    def label(self):
        parts = [self.kind]
        if self.user is not None:
            parts.append(f"k{self.user}")
        if self.er is not None:
            parts.append(f"e{self.er}")
        if self.target is not None:
            parts.append(f"t{self.target}")
        return "_".join(parts)


def enumerate_families(channels, thresholds):
    """All robust constraints of one scenario, one per node (its own side)."""
    fams = []
    for k in range(channels.n_ir):
        fams.append(LmiFamily(KIND_IR, k, None, None, channels.side_ir[k],
                              f"tau_ir{k}", float(channels.delta_ir[k]),
                              thresholds.noise_ir))
    for e in range(channels.n_er):
        fams.append(LmiFamily(KIND_ENERGY, None, e, None, channels.side_er[e],
                              f"tau_en{e}", float(channels.delta_er[e]), "xi"))
    for e in range(channels.n_er):
        for k in range(channels.n_ir):
            fams.append(LmiFamily(KIND_EVE, k, e, None, channels.side_er[e],
                                  f"tau_eve{e}_{k}", float(channels.delta_er[e]),
                                  thresholds.noise_er))
    for t in range(channels.n_tar):
        fams.append(LmiFamily(KIND_SENSING, None, None, t, channels.side_tar[t],
                              f"tau_sen{t}", float(channels.delta_tar[t]),
                              thresholds.lambda_gain))
    return fams


def _family_estimate(fam, channels):
    if fam.kind == KIND_IR:
        return channels.H_hat[fam.user]
    if fam.kind in (KIND_ENERGY, KIND_EVE):
        return channels.F_hat[fam.er]
    return channels.Ht_hat[fam.target]


def _family_s_numeric(fam, W_list, V, gamma, eta):
    S1, S2, S3, S4 = build_s_matrices(W_list, V, gamma, eta)
    if fam.kind == KIND_IR:
        return S1[fam.user]
    if fam.kind == KIND_ENERGY:
        return S2
    if fam.kind == KIND_EVE:
        return S3[fam.user]
    return S4


def assemble_robust_program(channels, thresholds, fixed_star=None, fixed_design=None,
                            fixed_beta=None, with_v=True, tau_cap=1e8):
    """Robust subproblem as a ConicProgram (objective: maximize xi).

    Exactly one of fixed_star / fixed_design must be given.  With fixed_star
    the program optimizes the BS side ({W_k}, V, xi, multipliers) under the
    power budget; with fixed_design it optimizes the RIS side (Q_t, Q_r, xi,
    multipliers) under per-element energy conservation (or pinned
    amplitudes `fixed_beta` = {'t': beta_t, 'r': beta_r}).  Zero-radius
    multipliers are boxed at tau_cap: at delta = 0 the S-procedure supremum
    is attained only as tau diverges, and the cap keeps the program well
    posed at an objective cost below 1e-6 relative.  Returns
    (program, families).
    """
    if (fixed_star is None) == (fixed_design is None):
        raise ValueError("fix exactly one of the star coefficients or the design")
    gamma, eta = sinr_thresholds(thresholds.r_th, thresholds.r_eth)
    fams = enumerate_families(channels, thresholds)
    K = channels.n_ir
    N = channels.n_elements
    M = channels.n_antennas

    prog = conic.ConicProgram()
    prog.add_scalar("xi")
    for fam in fams:
        prog.add_scalar(fam.multiplier, nonneg=True)
        if fam.delta == 0.0:
            prog.add_linear(fam.multiplier + "_cap", {fam.multiplier: 1.0}, {},
                            tau_cap, "<=")

    if fixed_star is not None:  # active subproblem
        for k in range(K):
            prog.add_matrix(f"W{k}", M)
        if with_v:
            prog.add_matrix("V", M)
        eye = np.eye(M, dtype=complex)
        names = [f"W{k}" for k in range(K)] + (["V"] if with_v else [])
        prog.add_linear("power", {}, {n: eye for n in names}, thresholds.p_max, "<=")
        q_by_side = {s: fixed_star.lifted(s) for s in ("t", "r")}
        for fam in fams:
            coeffs = _s_coefficients(fam.kind, fam.user, K, gamma, eta, with_v)
            blk = build_lmi(fam.kind, _family_estimate(fam, channels),
                            q_by_side[fam.side], coeffs, fam.delta, fam.offset,
                            fam.multiplier)
            blk.name = fam.label()
            prog.add_lmi(blk)
    else:  # passive subproblem
        prog.add_matrix("Qt", N)
        prog.add_matrix("Qr", N)
        W_list = fixed_design.lifted()
        V = np.asarray(fixed_design.sensing_cov)
        if fixed_beta is None:
            for n in range(N):
                E = np.zeros((N, N), dtype=complex)
                E[n, n] = 1.0
                prog.add_linear(f"split{n}", {}, {"Qt": E, "Qr": E}, 1.0, "==")
        else:
            for side, qname in (("t", "Qt"), ("r", "Qr")):
                beta = np.asarray(fixed_beta[side], float)
                for n in range(N):
                    E = np.zeros((N, N), dtype=complex)
                    E[n, n] = 1.0
                    prog.add_linear(f"beta_{side}{n}", {}, {qname: E}, float(beta[n]), "==")
        for fam in fams:
            S = _family_s_numeric(fam, W_list, V, gamma, eta)
            blk = build_lmi(fam.kind, _family_estimate(fam, channels),
                            "Qt" if fam.side == "t" else "Qr", S, fam.delta,
                            fam.offset, fam.multiplier)
            blk.name = fam.label()
            prog.add_lmi(blk)

    prog.set_objective({"xi": 1.0})
    return prog, fams


def assemble_nominal_program(channels, thresholds, fixed_star=None, fixed_design=None,
                             fixed_beta=None, with_v=True):
    """Perfect-CSI subproblem built directly from the trace constraints.

    Independent of the LMI path: no multipliers, plain linear constraints at
    the nominal cascaded estimates.  Used as the zero-uncertainty oracle.
    """
    if (fixed_star is None) == (fixed_design is None):
        raise ValueError("fix exactly one of the star coefficients or the design")
    gamma, eta = sinr_thresholds(thresholds.r_th, thresholds.r_eth)
    fams = enumerate_families(channels, thresholds)
    K = channels.n_ir
    N = channels.n_elements
    M = channels.n_antennas

    prog = conic.ConicProgram()
    prog.add_scalar("xi")

    if fixed_star is not None:
        for k in range(K):
            prog.add_matrix(f"W{k}", M)
        if with_v:
            prog.add_matrix("V", M)
        eye = np.eye(M, dtype=complex)
        names = [f"W{k}" for k in range(K)] + (["V"] if with_v else [])
        prog.add_linear("power", {}, {n: eye for n in names}, thresholds.p_max, "<=")
        for fam in fams:
            H = _family_estimate(fam, channels)
            Q = fixed_star.lifted(fam.side)
            A = H.conj().T @ Q @ H  # tr(X H^H Q H) = tr((X A)) with A Hermitian
            A = 0.5 * (A + A.conj().T)
            coeffs = _s_coefficients(fam.kind, fam.user, K, gamma, eta, with_v)
            mats = {var: c * A for var, c in coeffs.items()}
            scal, rhs = _nominal_rhs(fam, thresholds)
            prog.add_linear(fam.label(), scal, mats, rhs, ">=")
    else:
        prog.add_matrix("Qt", N)
        prog.add_matrix("Qr", N)
        W_list = fixed_design.lifted()
        V = np.asarray(fixed_design.sensing_cov)
        if fixed_beta is None:
            for n in range(N):
                E = np.zeros((N, N), dtype=complex)
                E[n, n] = 1.0
                prog.add_linear(f"split{n}", {}, {"Qt": E, "Qr": E}, 1.0, "==")
        else:
            for side, qname in (("t", "Qt"), ("r", "Qr")):
                beta = np.asarray(fixed_beta[side], float)
                for n in range(N):
                    E = np.zeros((N, N), dtype=complex)
                    E[n, n] = 1.0
                    prog.add_linear(f"beta_{side}{n}", {}, {qname: E}, float(beta[n]), "==")
        for fam in fams:
            H = _family_estimate(fam, channels)
            X = _family_s_numeric(fam, W_list, V, gamma, eta).T  # un-transposed combo
            C = H @ X @ H.conj().T  # tr(X H^H Q H) = tr(Q H X H^H)
            C = 0.5 * (C + C.conj().T)
            qname = "Qt" if fam.side == "t" else "Qr"
            scal, rhs = _nominal_rhs(fam, thresholds)
            prog.add_linear(fam.label(), scal, {qname: C}, rhs, ">=")

    prog.set_objective({"xi": 1.0})
    return prog, fams


def _nominal_rhs(fam, thresholds):
    """Scalar terms and right-hand side of one nominal trace constraint."""
    if fam.kind == KIND_IR:
        return {}, thresholds.noise_ir
    if fam.kind == KIND_ENERGY:
        return {"xi": -1.0}, 0.0
    if fam.kind == KIND_EVE:
        return {}, -thresholds.noise_er
    return {}, thresholds.lambda_gain


def quadratic_margins(fam, S, Q, estimate, perturbations, offset_value):
    """Signed slack of the underlying quadratic constraint per perturbation.

    margin(D) = vec(H+D)^H (S kron Q) vec(H+D) - offset for the >=-type
    families; the eavesdropper family adds its noise term instead.
    """
    A = np.kron(S, Q)
    H = np.asarray(estimate)
    # per-sample column-major vectorization: vec(X) = ravel of X^T
    vecs = (H[None, :, :] + perturbations).transpose(0, 2, 1).reshape(
        perturbations.shape[0], -1)
    quad = np.real(np.einsum("ni,ij,nj->n", vecs.conj(), A, vecs, optimize=True))
    if fam.kind == KIND_EVE:
        return quad + offset_value
    return quad - offset_value


def verify_s_procedure(fam, channels, star, design, thresholds, xi, n_samples, rng,
                       margin_tol=1e-6):
    """Sampling soundness check of one solved robust constraint.

    Draws perturbations in the family's Frobenius ball (interior and
    boundary mixed), evaluates the underlying quadratic constraint at the
    perturbed channels and reports violations below -margin_tol (scaled).
    A feasible LMI solution must produce zero violations.
    """
    gamma, eta = sinr_thresholds(thresholds.r_th, thresholds.r_eth)
    S = _family_s_numeric(fam, design.lifted(), design.sensing_cov, gamma, eta)
    Q = star.lifted(fam.side)
    H = _family_estimate(fam, channels)
    if fam.delta == 0.0:
        perts = np.zeros((1,) + H.shape, dtype=complex)
    else:
        perts = sample_uncertainty_batch(fam.delta, H.shape, n_samples, rng)
    offset = xi if fam.offset == "xi" else fam.offset
    margins = quadratic_margins(fam, S, Q, H, perts, offset)
    tol = margin_tol * max(1.0, abs(offset))
    violations = int(np.sum(margins < -tol))
    return {
        "family": fam.label(),
        "n_samples": perts.shape[0],
        "violations": violations,
        "min_margin": float(margins.min()),
        "ok": violations == 0,
    }
