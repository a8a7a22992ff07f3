"""Active beamforming by sequential rank-one constraint relaxation.

With the RIS coefficients held fixed, the robust subproblem is a semidefinite
program in the lifted beamformers.  The rank-one requirement is approached by
iterated convex solves carrying the eigenvector-energy cut
q^H W_k q >= u_k tr(W_k), with u_k driven from 0 to 1; infeasible steps halve
the drive increment.  Termination requires a feasible solve at u_k = 1 for
every user, which pins each W_k to its previous dominant eigenvector up to
solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conic
from .conic import dominant_eigenvector, eigenvalue_ratio
from .metrics import TransmitDesign
from .robust import assemble_robust_program

__all__ = [
    "SrocrConfig",
    "SrocrState",
    "SrocrResult",
    "solve_relaxed",
    "srocr_step",
    "run_srocr",
    "extract_rank_one",
]


@dataclass
class SrocrConfig:
    epsilon: float = 1e-4  # objective-change tolerance
    u_init: float = 0.0
    step_init: float = 0.1
    step_floor: float = 1e-8
    max_iters: int = 60
    tau_cap: float = 1e9
    solver: conic.SolveSettings = field(default_factory=conic.SolveSettings)


@dataclass
class SrocrState:
    """Carry-over between rank-relaxation iterations."""

    iteration: int
    u: np.ndarray  # relaxation levels, one per user, in [0, 1]
    step: np.ndarray  # drive increments, halved on infeasible steps
    eigvecs: list  # previous dominant eigenvectors q_k (unit norm)
    xi: float
    design: TransmitDesign

    def ratios(self):
        return np.array([eigenvalue_ratio(W) for W in self.design.lifted()])


@dataclass
class SrocrResult:
    design: TransmitDesign | None
    xi: float | None
    converged: bool
    feasible: bool
    iterations: int
    trace: list = field(default_factory=list)
    status: str = ""


def _design_from_values(values, n_users, with_v, m):
    Ws = tuple(values[f"W{k}"] for k in range(n_users))
    V = values["V"] if with_v else np.zeros((m, m), dtype=complex)
    return TransmitDesign(Ws, V)


def solve_relaxed(channels, thresholds, star, cfg=None, with_v=True):
    """Rank-free active subproblem; seeds the relaxation eigenvectors."""
    cfg = cfg or SrocrConfig()
    prog, _ = assemble_robust_program(channels, thresholds, fixed_star=star,
                                      with_v=with_v, tau_cap=cfg.tau_cap)
    res = conic.solve(prog, cfg.solver)
    if not res.ok:
        return None, None, res.status
    design = _design_from_values(res.values, channels.n_ir, with_v, channels.n_antennas)
    return design, float(res.values["xi"]), res.status


def _cut_matrix(q, u):
    """Hermitian C with tr(C W) = q^H W q - u tr(W)."""
    return np.outer(q, q.conj()) - u * np.eye(q.size)


def srocr_step(state, channels, thresholds, star, cfg=None, with_v=True,
               lowering=None):
    """One relaxation iteration per the feasibility-check / update rule.

    Solves the subproblem with the current cuts; on success adopts the new
    design and keeps the step sizes, otherwise halves them.  The relaxation
    levels are then refreshed from the (possibly unchanged) design.  A
    prebuilt `lowering` of the cut-free program skips re-assembly.
    """
    cfg = cfg or SrocrConfig()
    K = channels.n_ir
    if lowering is None:
        prog, _ = assemble_robust_program(channels, thresholds, fixed_star=star,
                                          with_v=with_v, tau_cap=cfg.tau_cap)
        lowering = conic.lower_program(prog, cfg.solver.presolve)
    cuts = [({}, {f"W{k}": _cut_matrix(state.eigvecs[k], state.u[k])}, 0.0, ">=")
            for k in range(K)]
    res = conic.solve_lowered(lowering, cfg.solver, extra_ineqs=cuts)

    u_used = state.u.copy()
    if res.ok:
        design = _design_from_values(res.values, K, with_v, channels.n_antennas)
        xi = float(res.values["xi"])
        step = state.step.copy()
    else:
        design = state.design
        xi = state.xi
        step = state.step / 2.0
        if np.any(step < cfg.step_floor):
            raise RuntimeError(
                "rank-one drive stalled: step size underflow below "
                f"{cfg.step_floor} (status {res.status})")

    Ws = design.lifted()
    ratios = np.array([_energy_ratio(W) for W in Ws])
    new_u = np.minimum(1.0, ratios + step)
    new_state = SrocrState(
        iteration=state.iteration + 1,
        u=new_u,
        step=step,
        eigvecs=[dominant_eigenvector(W) for W in Ws],
        xi=xi,
        design=design,
    )
    return new_state, res.ok, u_used


def _energy_ratio(W):
    tr = float(np.trace(W).real)
    if tr <= 0:
        return 1.0
    return float(np.linalg.eigvalsh(0.5 * (W + W.conj().T))[-1] / tr)


def run_srocr(channels, thresholds, star, cfg=None, with_v=True):
    """Drive the active subproblem to a rank-one design.

    Stops once every relaxation level used by a feasible solve equals one
    and the objective change stays within epsilon; hitting the iteration cap
    returns the best iterate flagged as non-converged.
    """
    cfg = cfg or SrocrConfig()
    prog, _ = assemble_robust_program(channels, thresholds, fixed_star=star,
                                      with_v=with_v, tau_cap=cfg.tau_cap)
    lowering = conic.lower_program(prog, cfg.solver.presolve)
    res0 = conic.solve_lowered(lowering, cfg.solver)
    if not res0.ok:
        return SrocrResult(None, None, False, False, 0, status=res0.status)
    design = _design_from_values(res0.values, channels.n_ir, with_v, channels.n_antennas)
    xi = float(res0.values["xi"])

    K = channels.n_ir
    state = SrocrState(
        iteration=0,
        u=np.full(K, cfg.u_init, dtype=float),
        step=np.full(K, cfg.step_init, dtype=float),
        eigvecs=[dominant_eigenvector(W) for W in design.lifted()],
        xi=xi,
        design=design,
    )
    trace = [_trace_row(state, True, state.u)]
    converged = False
    status = "iteration cap"
    for _ in range(cfg.max_iters):
        xi_prev = state.xi
        try:
            state, feasible, u_used = srocr_step(state, channels, thresholds, star,
                                                 cfg, with_v, lowering)
        except RuntimeError as exc:
            status = str(exc)
            break
        trace.append(_trace_row(state, feasible, u_used))
        if feasible and np.all(u_used >= 1.0) and abs(state.xi - xi_prev) <= cfg.epsilon:
            converged = True
            status = "converged"
            break
    return SrocrResult(state.design, state.xi, converged, True, state.iteration,
                       trace, status)


def _trace_row(state, feasible, u_used):
    return {
        "iteration": state.iteration,
        "u": u_used.copy(),
        "step": state.step.copy(),
        "xi": state.xi,
        "feasible": bool(feasible),
        "rank_ratios": state.ratios(),
    }


def extract_rank_one(W, ratio_tol=1e-3):
    """Beamforming vector from a (near) rank-one lifted matrix.

    Returns (w, residual_bound) with w = sqrt(lambda_max) times the dominant
    eigenvector under the global-phase convention, and the bound
    ||w w^H - W||_F <= sqrt(lambda_2 tr W) certified by the spectrum.
    """
    W = np.asarray(W)
    lam = np.linalg.eigvalsh(0.5 * (W + W.conj().T))
    if lam[-1] <= 0:
        raise ValueError("matrix has no positive eigenvalue")
    ratio = max(0.0, lam[-2]) / lam[-1] if len(lam) > 1 else 0.0
    if ratio > ratio_tol:
        raise ValueError(f"not rank one: lambda2/lambda1 = {ratio:.3e}")
    q = dominant_eigenvector(W)
    w = np.sqrt(lam[-1]) * q
    lam2 = max(0.0, lam[-2]) if len(lam) > 1 else 0.0
    bound = float(np.sqrt(lam2 * np.trace(W).real)) if len(lam) > 1 else 0.0
    return w, bound
