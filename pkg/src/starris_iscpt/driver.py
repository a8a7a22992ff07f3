"""Alternating optimization of the transmit design and the RIS coefficients,
plus the benchmark schemes.

One outer iteration solves the active subproblem (rank-one beamformers by
SROCR at fixed RIS matrices) and then the passive subproblem (rank-one RIS
matrices by the penalty drive at fixed beamformers), stopping once the
relative objective gain falls below the threshold.  Channels are normalized
to unit typical magnitude before optimization so every solver sees O(1)
data; reported powers are mapped back to watts.

Baselines: far-field-only (planar-wave surrogate channels, same optimizer),
conventional RIS (half the elements pinned to each side), SDR (no rank-one
drive, Gaussian randomization recovery) and no-sensing (zero sensing
covariance).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import penalty as pen_mod
from . import srocr as srocr_mod
from .channels import cascaded_channel, farfield_steering_at
from .conic import eigenvalue_ratio
from .metrics import (StarCoefficients, TransmitDesign, beampattern_gain, eve_rate,
                      harvested_power, ir_rate)
from .penalty import PenaltyConfig, extract_phi, rank_gap, run_penalty
from .srocr import SrocrConfig, extract_rank_one, run_srocr, solve_relaxed

__all__ = [
    "AoConfig",
    "IterationRecord",
    "RunTrace",
    "AoResult",
    "BASELINES",
    "run_ao",
    "run_baseline",
    "complexity_report",
    "evaluate_design",
    "normalize_scenario",
    "random_star_init",
    "cris_beta_pattern",
    "farfield_surrogate",
]

BASELINES = ("proposed", "far_field_only", "cris", "sdr", "no_sensing")


@dataclass
class AoConfig:
    delta0: float = 1e-3  # relative objective-gain stopping threshold
    r_max: int = 15
    srocr: SrocrConfig = field(default_factory=SrocrConfig)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    sdr_candidates: int = 100


@dataclass
class IterationRecord:
    index: int
    xi: float  # watts, physical scale
    harvested: np.ndarray  # per ER, watts
    rates: np.ndarray  # per IR, bit/s/Hz
    eve_rates: np.ndarray  # (E, K)
    gains: np.ndarray  # per target, watts
    rank_gaps_w: np.ndarray
    rank_gaps_q: np.ndarray
    i_sr: int
    i_in: int
    wall_time: float


@dataclass
class RunTrace:
    iterations: list = field(default_factory=list)
    converged: bool = False
    status: str = ""
    scale: float = 1.0

    @property
    def i_out(self):
        return len(self.iterations)

    def xi_sequence(self):
        return np.array([it.xi for it in self.iterations])


@dataclass
class AoResult:
    design: TransmitDesign | None  # vector beamformers + sensing covariance
    star: StarCoefficients | None
    lifted_design: TransmitDesign | None
    xi: float | None  # watts
    trace: RunTrace = field(default_factory=RunTrace)
    feasible: bool = False
    converged: bool = False
    status: str = ""

    @property
    def ok(self):
        return self.feasible and self.design is not None


def normalize_scenario(channels, thresholds):
    """Bring channel magnitudes to O(1) for the solvers.

    Returns (scaled channels, scaled thresholds, scale c); powers computed
    in the scaled system are c^2 times smaller than physical watts.
    """
    c = channels.typical_norm()
    if c <= 0:
        raise ValueError("degenerate channel set")
    return channels.scaled(1.0 / c), thresholds.scaled(1.0 / c), c


def random_star_init(n, rng, beta=None):
    """Random-phase equal-split coefficients (rank-one by construction)."""
    bt = np.full(n, 0.5) if beta is None else np.asarray(beta["t"], float)
    br = 1.0 - bt if beta is None else np.asarray(beta["r"], float)
    phi_t = np.sqrt(bt) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    phi_r = np.sqrt(br) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return StarCoefficients.from_phi(phi_t, phi_r)


def cris_beta_pattern(n):
    """Conventional-RIS split: even elements transmit-only, odd reflect-only."""
    bt = np.zeros(n)
    bt[0::2] = 1.0
    return {"t": bt, "r": 1.0 - bt}


def evaluate_design(design, star, channels, thresholds, power_scale=1.0):
    """Physical-layer summary of one design on one channel set.

    power_scale converts powers evaluated on a normalized channel set back
    to watts (the square of the normalization factor).
    """
    K, E, T = channels.n_ir, channels.n_er, channels.n_tar
    eff = thresholds.eh_efficiency
    harvested = np.array([
        harvested_power(e, design, star, channels, efficiency=eff[e % len(eff)])
        for e in range(E)]) * power_scale
    rates = np.array([ir_rate(k, design, star, channels, thresholds.noise_ir)
                      for k in range(K)])
    eves = np.array([[eve_rate(e, k, design, star, channels, thresholds.noise_er)
                      for k in range(K)] for e in range(E)])
    gains = np.array([beampattern_gain(t, design, star, channels)
                      for t in range(T)]) * power_scale
    return {
        "harvested": harvested,
        "total_harvested": float(harvested.sum()),
        "min_harvested": float(harvested.min()),
        "rates": rates,
        "eve_rates": eves,
        "gains": gains,
        "power": design.total_power(),
    }


def _record_iteration(idx, xi_phys, design, star, raw_q, cs, th, scale2, i_sr, i_in, dt):
    ev = evaluate_design(design, star, cs, th, power_scale=scale2)
    Ws = design.lifted()
    return IterationRecord(
        index=idx,
        xi=xi_phys,
        harvested=ev["harvested"],
        rates=ev["rates"],
        eve_rates=ev["eve_rates"],
        gains=ev["gains"],
        rank_gaps_w=np.array([rank_gap(W) for W in Ws]),
        rank_gaps_q=np.array([rank_gap(raw_q[0]), rank_gap(raw_q[1])]),
        i_sr=i_sr,
        i_in=i_in,
        wall_time=dt,
    )


def _finalize(design_lifted, star, trace, xi_phys, status, converged):
    try:
        ws = tuple(extract_rank_one(W)[0] for W in design_lifted.lifted())
        design_vec = TransmitDesign(ws, design_lifted.sensing_cov)
    except ValueError:
        design_vec = None
    return AoResult(design_vec, star, design_lifted, xi_phys, trace,
                    feasible=True, converged=converged, status=status)


def _active_stage(kind, csn, thn, star, cfg, rng):
    """Run the scheme's active subproblem; returns (design, xi, i_sr, ok, why)."""
    with_v = kind != "no_sensing"
    if kind == "sdr":
        design, xi, status = solve_relaxed(csn, thn, star, cfg.srocr, with_v=with_v)
        if design is None:
            return None, None, 1, False, status
        design, xi = _sdr_randomize(design, csn, thn, star, cfg, rng)
        return design, xi, 1, True, "sdr"
    res = run_srocr(csn, thn, star, cfg.srocr, with_v=with_v)
    if not res.feasible:
        return None, None, res.iterations or 1, False, res.status
    return res.design, res.xi, max(res.iterations, 1), True, res.status


def _sdr_randomize(design, csn, thn, star, cfg, rng):
    """Gaussian-randomization rank-one recovery for the SDR baseline.

    Per-user candidates drawn from CN(0, W_k) (plus the dominant
    eigenvector), rescaled to the lifted power tr(W_k); the best candidate
    set by worst-ER received power among those meeting the nominal rate,
    secrecy, sensing and power constraints.  Falls back to the eigenvector
    extraction when no candidate passes.
    """
    K = csn.n_ir
    E = csn.n_er
    Ws = design.lifted()
    powers = [max(np.trace(W).real, 0.0) for W in Ws]
    eigs = []
    roots = []
    for W in Ws:
        lam, U = np.linalg.eigh(0.5 * (W + W.conj().T))
        lam = np.maximum(lam, 0.0)
        roots.append(U @ np.diag(np.sqrt(lam)) @ U.conj().T)
        eigs.append(np.sqrt(lam[-1]) * U[:, -1])

    def scale_to(w, p):
        nrm = np.linalg.norm(w)
        return w * np.sqrt(p) / nrm if nrm > 0 else w

    candidates = [[scale_to(eigs[k], powers[k]) for k in range(K)]]
    M = Ws[0].shape[0]
    for _ in range(cfg.sdr_candidates):
        z = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / np.sqrt(2)
        candidates.append([scale_to(roots[k] @ z[k], powers[k]) for k in range(K)])

    best, best_score = None, -np.inf
    for cand in candidates:
        d = TransmitDesign(tuple(cand), design.sensing_cov)
        if d.total_power() > thn.p_max + 1e-9:
            continue
        rates = [ir_rate(k, d, star, csn, thn.noise_ir) for k in range(K)]
        if min(rates) < thn.r_th - 1e-9:
            continue
        eves = max(eve_rate(e, k, d, star, csn, thn.noise_er)
                   for e in range(E) for k in range(K))
        if eves > thn.r_eth + 1e-9:
            continue
        gains = [beampattern_gain(t, d, star, csn) for t in range(csn.n_tar)]
        if min(gains) < thn.lambda_gain - 1e-12:
            continue
        score = min(harvested_power(e, d, star, csn) for e in range(E))
        if score > best_score:
            best, best_score = d, score
    if best is None:
        best = TransmitDesign(tuple(candidates[0]), design.sensing_cov)
        best_score = min(harvested_power(e, best, star, csn) for e in range(E))
    lifted = TransmitDesign(tuple(np.outer(w, w.conj()) for w in best.beamformers),
                            best.sensing_cov)
    return lifted, float(best_score)


def run_ao(channels, thresholds, config=None, rng=None, scheme="proposed"):
    """Alternating active/passive optimization of one scenario.

    The scenario is rejected (feasible=False) when the very first active
    solve is infeasible; later solver failures return the best iterate
    flagged non-converged.  All reported powers are physical watts.
    """
    config = config or AoConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    if scheme not in BASELINES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "far_field_only":
        channels = farfield_surrogate(channels)

    csn, thn, scale = normalize_scenario(channels, thresholds)
    scale2 = scale * scale
    fixed_beta = cris_beta_pattern(csn.n_elements) if scheme == "cris" else None
    star = random_star_init(csn.n_elements, rng, beta=fixed_beta)
    pen_cfg = config.penalty

    trace = RunTrace(scale=scale)
    xi_prev = None
    best = None
    design = None
    for r in range(1, config.r_max + 1):
        t0 = time.perf_counter()
        design, xi_a, i_sr, ok, why = _active_stage(scheme, csn, thn, star, config, rng)
        if not ok:
            if r == 1:
                return AoResult(None, None, None, None, trace, feasible=False,
                                status=f"scenario rejected: first active solve {why}")
            trace.status = f"active stage failed at iteration {r}: {why}"
            break
        pen = run_penalty(csn, thn, design, init_star=star, cfg=pen_cfg,
                          fixed_beta=fixed_beta)
        if not pen.feasible or pen.q_t is None:
            trace.status = f"passive stage failed at iteration {r}: {pen.status}"
            break
        phi_t, _ = extract_phi(pen.q_t, ratio_tol=1.0)  # mid-run: best effort
        phi_r, _ = extract_phi(pen.q_r, ratio_tol=1.0)
        star = StarCoefficients.from_phi(phi_t, phi_r)
        xi = pen.xi
        dt = time.perf_counter() - t0
        trace.iterations.append(_record_iteration(
            r, xi * scale2, design, star, (pen.q_t, pen.q_r), csn, thn, scale2,
            i_sr, pen.inner_solves, dt))
        best = (design, star, xi)
        if xi_prev is not None and abs(xi - xi_prev) < config.delta0 * max(abs(xi_prev), 1e-30):
            trace.converged = True
            trace.status = f"converged at iteration {r}"
            break
        xi_prev = xi
    else:
        trace.status = trace.status or "iteration cap reached"

    if best is None:
        return AoResult(None, None, None, None, trace, feasible=False,
                        status=trace.status or "no feasible iterate")
    design, star, xi = best
    return _finalize(design, star, trace, xi * scale2, trace.status, trace.converged)


def run_baseline(kind, channels, thresholds, config=None, rng=None):
    """One benchmark scheme on the given scenario (see module docstring)."""
    return run_ao(channels, thresholds, config, rng, scheme=kind)


def farfield_surrogate(channels):
    """Channel set with every RIS-to-node link replaced by its planar-wave
    approximation: common magnitude from the node's distance, phases from
    the arrival direction only.  Error radii keep each node's relative
    level delta / ||H||_F."""
    if channels.geometry is None or channels.layout is None:
        raise ValueError("channel set carries no geometry; cannot build the "
                         "far-field surrogate")
    geo, lay = channels.geometry, channels.layout
    h_ir = np.array([farfield_steering_at(p, geo) for p in lay.ir_positions])
    g_er = np.array([farfield_steering_at(p, geo) for p in lay.er_positions])
    h_tar = np.array([farfield_steering_at(p, geo) for p in lay.target_positions])
    H_hat = np.array([cascaded_channel(h, channels.G) for h in h_ir])
    F_hat = np.array([cascaded_channel(g, channels.G) for g in g_er])
    Ht_hat = np.array([cascaded_channel(h, channels.G) for h in h_tar])

    def radii(old_d, old_H, new_H):
        out = []
        for d, Ho, Hn in zip(old_d, old_H, new_H):
            lvl = d / np.linalg.norm(Ho) if np.linalg.norm(Ho) > 0 else 0.0
            out.append(lvl * np.linalg.norm(Hn))
        return np.array(out)

    return replace(
        channels,
        h_ir=h_ir, g_er=g_er, h_tar=h_tar,
        H_hat=H_hat, F_hat=F_hat, Ht_hat=Ht_hat,
        delta_ir=radii(channels.delta_ir, channels.H_hat, H_hat),
        delta_er=radii(channels.delta_er, channels.F_hat, F_hat),
        delta_tar=radii(channels.delta_tar, channels.Ht_hat, Ht_hat),
    )


def complexity_report(trace, m, n, k, e, t):
    """Iteration counters plus the per-stage arithmetic-cost model.

    The cost model counts interior-point work per convex solve:
    (K+E+T)((MN)^3.5 + M^3.5) for one active iteration and
    (K+E+T)(MN)^3.5 + 2 N^3.5 for one passive inner iteration.
    """
    i_out = trace.i_out
    i_sr = sum(it.i_sr for it in trace.iterations)
    i_in = sum(it.i_in for it in trace.iterations)
    nodes = k + e + t
    active_cost = nodes * ((m * n) ** 3.5 + m ** 3.5)
    passive_cost = nodes * (m * n) ** 3.5 + 2 * n ** 3.5
    return {
        "i_out": i_out,
        "i_sr_total": i_sr,
        "i_in_total": i_in,
        "active_cost_per_iter": active_cost,
        "passive_cost_per_iter": passive_cost,
        "total_cost": i_sr * active_cost + i_in * passive_cost,
    }
