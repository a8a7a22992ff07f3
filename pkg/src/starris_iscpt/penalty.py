"""Passive beamforming by a penalized rank-one drive.

With the transmit design held fixed, the robust subproblem optimizes the two
lifted RIS coefficient matrices.  Rank one is encoded as a vanishing
nuclear-minus-spectral gap, added to the objective through a penalty weight
that grows geometrically; the concave spectral term is linearized at the
current iterate, which for PSD variables makes the whole penalty the linear
form tr(Q (I - kappa kappa^H)).  The loop stops when the linearized gap sum
falls below the prescribed tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conic
from .conic import dominant_eigenvector, eigenvalue_ratio
from .robust import assemble_robust_program

__all__ = [
    "PenaltyConfig",
    "PenaltyState",
    "PenaltyResult",
    "rank_gap",
    "surrogate",
    "solve_inner",
    "run_penalty",
    "extract_phi",
]


@dataclass
class PenaltyConfig:
    growth: float = 5.0  # alpha > 1
    gamma0_scale: float = 1e-3  # gamma(0) = scale * |relaxed objective|
    sigma: float = 1e-7  # stopping tolerance on the linearized gap sum
    max_outer: int = 25
    max_inner: int = 4
    inner_tol: float = 1e-5  # relative stall threshold for the inner ascent
    tau_cap: float = 1e9
    solver: conic.SolveSettings = field(default_factory=conic.SolveSettings)


@dataclass
class PenaltyState:
    """Expansion points and penalty weight of one outer iteration."""

    outer: int
    gamma: float
    growth: float
    expansion: dict  # side -> Q matrix the spectral term is linearized at
    sigma: float

    def kappas(self):
        return {s: dominant_eigenvector(Q) for s, Q in self.expansion.items()}


@dataclass
class PenaltyResult:
    q_t: np.ndarray | None
    q_r: np.ndarray | None
    xi: float | None
    converged: bool
    feasible: bool
    inner_solves: int
    trace: list = field(default_factory=list)
    status: str = ""


def rank_gap(Q):
    """Nuclear minus spectral norm: tr(Q) - lambda_max(Q) for PSD Q."""
    Q = np.asarray(Q)
    lam = np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))
    return float(np.sum(lam) - lam[-1])


def surrogate(Q, Q0):
    """Linearized rank gap ||Q||_* - [lambda_max(Q0) + tr(kk^H (Q - Q0))].

    Tight at Q = Q0 and an upper bound on rank_gap(Q) for every PSD Q (the
    spectral norm is convex, so its tangent minorizes it).
    """
    Q = np.asarray(Q)
    Q0 = np.asarray(Q0)
    k = dominant_eigenvector(Q0)
    lam0 = float(np.linalg.eigvalsh(0.5 * (Q0 + Q0.conj().T))[-1])
    nuclear = float(np.trace(Q).real)  # PSD: nuclear norm equals the trace
    linearized = lam0 + float(np.real(k.conj() @ (Q - Q0) @ k))
    return nuclear - linearized


def _penalty_objective_terms(gamma, kappas, n):
    terms = {}
    eye = np.eye(n, dtype=complex)
    for side, qname in (("t", "Qt"), ("r", "Qr")):
        k = kappas[side]
        terms[qname] = -gamma * (eye - np.outer(k, k.conj()))
    return terms


def solve_inner(channels, thresholds, design, state, cfg=None, fixed_beta=None,
                lowering=None):
    """One convex solve of the penalized passive subproblem.

    Maximizes xi - gamma * sum_l [tr(Q_l) - kappa_l^H Q_l kappa_l] subject
    to the robust constraint families, the PSD cones and the per-element
    amplitude coupling.  Returns (q_t, q_r, xi, penalized objective, result).
    A prebuilt `lowering` of the base program skips re-assembly; only the
    objective vector changes between inner solves.
    """
    cfg = cfg or PenaltyConfig()
    if lowering is None:
        prog, _ = assemble_robust_program(channels, thresholds, fixed_design=design,
                                          fixed_beta=fixed_beta, tau_cap=cfg.tau_cap)
        lowering = conic.lower_program(prog, cfg.solver.presolve)
    N = channels.n_elements
    objective = None
    if state.gamma > 0.0:
        terms = _penalty_objective_terms(state.gamma, state.kappas(), N)
        objective = ({"xi": 1.0}, terms)
    res = conic.solve_lowered(lowering, cfg.solver, objective=objective)
    if not res.ok:
        return None, None, None, None, res
    return (res.values["Qt"], res.values["Qr"], float(res.values["xi"]),
            float(res.objective), res)


def run_penalty(channels, thresholds, design, init_star=None, cfg=None, fixed_beta=None):
    """Two-tier penalty loop returning rank-one RIS coefficient matrices.

    The relaxed (gamma = 0) solve sets the penalty scale; the expansion
    point starts from `init_star` when given, else from the relaxed
    solution.  Outer iterations grow gamma geometrically and stop when the
    linearized gap sum drops to sigma; inner iterations repeat the convex
    solve until its penalized objective stalls.
    """
    cfg = cfg or PenaltyConfig()
    prog, _ = assemble_robust_program(channels, thresholds, fixed_design=design,
                                      fixed_beta=fixed_beta, tau_cap=cfg.tau_cap)
    lowering = conic.lower_program(prog, cfg.solver.presolve)
    state = PenaltyState(0, 0.0, cfg.growth, {}, cfg.sigma)
    qt, qr, xi, _, res = solve_inner(channels, thresholds, design, state, cfg,
                                     fixed_beta, lowering)
    solves = 1
    if qt is None:
        return PenaltyResult(None, None, None, False, False, solves,
                             status=f"relaxed solve: {res.status}")
    state.gamma = cfg.gamma0_scale * max(abs(xi), 1e-12)
    if init_star is not None:
        state.expansion = {"t": init_star.lifted("t"), "r": init_star.lifted("r")}
    else:
        state.expansion = {"t": qt, "r": qr}

    trace = [{"outer": 0, "gamma": 0.0, "xi": xi, "gap": None,
              "true_gap": rank_gap(qt) + rank_gap(qr), "inner": 1}]
    converged = False
    status = "outer cap"
    for outer in range(1, cfg.max_outer + 1):
        state.outer = outer
        prev_pen = -np.inf
        gap = None
        inner_used = 0
        pen_objs = []
        for _ in range(cfg.max_inner):
            expansion_used = dict(state.expansion)
            qt_new, qr_new, xi_new, pen_obj, res = solve_inner(
                channels, thresholds, design, state, cfg, fixed_beta, lowering)
            solves += 1
            inner_used += 1
            if qt_new is None:
                return PenaltyResult(qt, qr, xi, False, True, solves, trace,
                                     status=f"inner solve: {res.status}")
            qt, qr, xi = qt_new, qr_new, xi_new
            pen_objs.append(xi - state.gamma * (rank_gap(qt) + rank_gap(qr)))
            state.expansion = {"t": qt, "r": qr}
            gap = (surrogate(qt, expansion_used["t"])
                   + surrogate(qr, expansion_used["r"]))
            moved = max(np.linalg.norm(qt - expansion_used["t"]),
                        np.linalg.norm(qr - expansion_used["r"]))
            if moved <= 1e-7 * max(1.0, np.linalg.norm(qt)):
                break  # SCA fixed point: expansion no longer moves
            if pen_obj - prev_pen <= cfg.inner_tol * max(1.0, abs(pen_obj)):
                break
            prev_pen = pen_obj
        trace.append({"outer": outer, "gamma": state.gamma, "xi": xi, "gap": gap,
                      "true_gap": rank_gap(qt) + rank_gap(qr), "inner": inner_used,
                      "pen_objs": pen_objs})
        if gap is not None and gap <= cfg.sigma:
            converged = True
            status = "converged"
            break
        state.gamma *= cfg.growth
    return PenaltyResult(qt, qr, xi, converged, True, solves, trace, status)


def extract_phi(Q, ratio_tol=1e-3, amp_tol=1e-6):
    """Coefficient vector and amplitudes from a rank-one lifted RIS matrix.

    phi = sqrt(lambda_max) times the dominant eigenvector (global phase
    fixed), beta = diag(Q); consistency |phi_n|^2 = beta_n is enforced
    within amp_tol.
    """
    Q = np.asarray(Q)
    ratio = eigenvalue_ratio(Q)
    if ratio > ratio_tol:
        raise ValueError(f"not rank one: lambda2/lambda1 = {ratio:.3e}")
    lam = np.linalg.eigvalsh(0.5 * (Q + Q.conj().T))[-1]
    phi = np.sqrt(max(lam, 0.0)) * dominant_eigenvector(Q)
    beta = np.real(np.diag(Q))
    if np.max(np.abs(np.abs(phi) ** 2 - beta)) > amp_tol:
        raise ValueError("amplitude mismatch between phi and diag(Q)")
    return phi, beta
