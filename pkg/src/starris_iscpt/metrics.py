"""Physical-layer figures of merit for a candidate design.

Rates, harvested power and sensing beampattern gain are evaluated from
either beamforming vectors w_k or their lifted outer products W_k; the two
forms agree to floating-point precision whenever W_k = w_k w_k^H.  Every
node is served by the transmission or reflection coefficient set of its own
side of the surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import dbm_to_watt

__all__ = [
    "Thresholds",
    "TransmitDesign",
    "StarCoefficients",
    "FeasibilityReport",
    "sinr_thresholds",
    "ir_rate",
    "eve_rate",
    "harvested_power",
    "beampattern_gain",
    "check_feasibility",
]


@dataclass(frozen=True)
class Thresholds:
    """Constraint levels of the design problem (linear units: W, bit/s/Hz)."""

    r_th: float = 2.0
    r_eth: float = 1.0
    lambda_gain: float = dbm_to_watt(-110.0) * 10 ** 0.1  # 1 dB above noise floor
    p_max: float = 10.0
    noise_ir: float = dbm_to_watt(-110.0)
    noise_er: float = dbm_to_watt(-110.0)
    eh_efficiency: tuple = (1.0, 1.0)

    def __post_init__(self):
        if min(self.r_th, self.r_eth) < 0:
            raise ValueError("rate thresholds must be nonnegative")
        if min(self.lambda_gain, self.p_max, self.noise_ir, self.noise_er) <= 0:
            raise ValueError("powers must be positive")
        if any(not 0 < e <= 1 for e in self.eh_efficiency):
            raise ValueError("harvest efficiencies must lie in (0, 1]")

    def scaled(self, factor):
        """Match a channel set scaled by `factor` (powers scale by factor^2)."""
        f2 = factor * factor
        return Thresholds(self.r_th, self.r_eth, self.lambda_gain * f2, self.p_max,
                          self.noise_ir * f2, self.noise_er * f2, self.eh_efficiency)


def sinr_thresholds(r_th, r_eth):
    """Target SINRs: Gamma = 2^r_th - 1 for IRs, eta = 2^r_eth - 1 for Eves."""
    if r_th < 0 or r_eth < 0:
        raise ValueError("rates must be nonnegative")
    return 2.0 ** r_th - 1.0, 2.0 ** r_eth - 1.0


@dataclass(frozen=True)
class TransmitDesign:
    """BS beamformers (vector or lifted form) plus the sensing covariance."""

    beamformers: tuple  # K entries, each (M,) vector or (M, M) PSD matrix
    sensing_cov: np.ndarray  # (M, M) PSD

    def __post_init__(self):
        object.__setattr__(self, "beamformers", tuple(np.asarray(w) for w in self.beamformers))
        object.__setattr__(self, "sensing_cov", np.asarray(self.sensing_cov))

    @property
    def n_users(self):
        return len(self.beamformers)

    @property
    def is_lifted(self):
        return self.beamformers[0].ndim == 2

    def lifted(self):
        """Beamformers as outer products (no-op when already lifted)."""
        if self.is_lifted:
            return list(self.beamformers)
        return [np.outer(w, w.conj()) for w in self.beamformers]

    def total_power(self):
        pw = sum(np.trace(W).real for W in self.lifted())
        return float(pw + np.trace(self.sensing_cov).real)

    def validate(self, p_max=None, tol=1e-9):
        for W in self.lifted() + [self.sensing_cov]:
            lam = np.linalg.eigvalsh(0.5 * (W + W.conj().T))[0]
            if lam < -tol * max(1.0, np.abs(W).max()):
                raise ValueError("lifted beamformers must be PSD")
        if p_max is not None and self.total_power() > p_max + 1e-6 * max(1.0, p_max):
            raise ValueError("power budget exceeded")


@dataclass(frozen=True)
class StarCoefficients:
    """Per-side transmission/reflection coefficients, vector or lifted."""

    phi_t: np.ndarray | None = None
    phi_r: np.ndarray | None = None
    q_t: np.ndarray | None = None
    q_r: np.ndarray | None = None

    @classmethod
    def from_phi(cls, phi_t, phi_r):
        return cls(phi_t=np.asarray(phi_t), phi_r=np.asarray(phi_r))

    @classmethod
    def from_lifted(cls, q_t, q_r):
        return cls(q_t=np.asarray(q_t), q_r=np.asarray(q_r))

    def lifted(self, side):
        q = self.q_t if side == "t" else self.q_r
        if q is not None:
            return q
        phi = self.phi_t if side == "t" else self.phi_r
        return np.outer(phi, phi.conj())

    def amplitude(self, side):
        """Per-element energy-split fractions beta of one side."""
        q = self.q_t if side == "t" else self.q_r
        if q is not None:
            return np.real(np.diag(q))
        phi = self.phi_t if side == "t" else self.phi_r
        return np.abs(phi) ** 2

    def conservation_residual(self):
        """max_n |beta_t + beta_r - 1|."""
        return float(np.max(np.abs(self.amplitude("t") + self.amplitude("r") - 1.0)))

    def validate(self, tol=1e-6):
        bt, br = self.amplitude("t"), self.amplitude("r")
        if np.min(bt) < -tol or np.min(br) < -tol:
            raise ValueError("amplitudes must be nonnegative")
        if np.max(np.abs(bt + br - 1.0)) > tol:
            raise ValueError("per-element energy conservation violated")
        if self.phi_t is not None and self.q_t is not None:
            if np.max(np.abs(np.abs(self.phi_t) ** 2 - np.real(np.diag(self.q_t)))) > 1e-8:
                raise ValueError("phi amplitudes inconsistent with lifted diagonal")


def _beam_powers(H, q_or_phi_side, design, star):
    """Per-stream received powers |phi^H H w_k|^2 and the sensing term.

    Lifted evaluation tr(W H^H Q H); collapses to the squared magnitudes
    when W and Q are rank one.
    """
    Q = star.lifted(q_or_phi_side)
    A = H.conj().T @ Q @ H  # M x M, PSD
    streams = [float(np.real(np.trace(W @ A))) for W in design.lifted()]
    sensing = float(np.real(np.trace(design.sensing_cov @ A)))
    return streams, sensing


def ir_rate(k, design, star, channels, noise, h_override=None):
    """Achievable rate of information receiver k in bit/s/Hz."""
    H = channels.H_hat[k] if h_override is None else h_override
    side = channels.side_ir[k]
    streams, sensing = _beam_powers(H, side, design, star)
    interference = sum(streams) - streams[k] + sensing + noise
    return float(np.log2(1.0 + streams[k] / interference))


def eve_rate(e, k, design, star, channels, noise, f_override=None):
    """Rate at which ER e can intercept the stream intended for IR k."""
    F = channels.F_hat[e] if f_override is None else f_override
    side = channels.side_er[e]
    streams, sensing = _beam_powers(F, side, design, star)
    interference = sum(streams) - streams[k] + sensing + noise
    return float(np.log2(1.0 + streams[k] / interference))


def harvested_power(e, design, star, channels, efficiency=1.0, f_override=None):
    """RF power collected by ER e (interference and noise all harvested)."""
    F = channels.F_hat[e] if f_override is None else f_override
    streams, sensing = _beam_powers(F, channels.side_er[e], design, star)
    return float(efficiency * (sum(streams) + sensing))


def beampattern_gain(t, design, star, channels, h_override=None):
    """Illumination power delivered at sensing target t."""
    H = channels.Ht_hat[t] if h_override is None else h_override
    streams, sensing = _beam_powers(H, channels.side_tar[t], design, star)
    return float(sum(streams) + sensing)


@dataclass
class FeasibilityReport:
    """Constraint margins at the nominal channels and under perturbations.

    Margins are signed with positive = satisfied; power and conservation are
    reported as raw numbers.
    """

    rate_margins: np.ndarray
    eve_margins: np.ndarray  # (E, K), r_eth - rate
    sensing_margins: np.ndarray
    power_used: float
    power_margin: float
    conservation_residual: float
    worst_sampled: dict = field(default_factory=dict)
    violations: int = 0

    @property
    def feasible(self):
        worst = min(self.rate_margins.min(), self.eve_margins.min(),
                    self.sensing_margins.min(), self.power_margin)
        return worst >= -1e-5 and self.conservation_residual <= 1e-6


def check_feasibility(design, star, channels, thresholds, n_samples=0, rng=None):
    """Evaluate every design constraint, optionally under sampled CSI error.

    With n_samples > 0, each cascaded channel is perturbed within its
    uncertainty ball and the worst margin over the batch is recorded;
    violations counts sampled margins below -1e-6 (relative to threshold
    scale).
    """
    from .channels import sample_uncertainty_batch

    K, E, T = channels.n_ir, channels.n_er, channels.n_tar
    s_i, s_e = thresholds.noise_ir, thresholds.noise_er

    rate_m = np.array([ir_rate(k, design, star, channels, s_i) - thresholds.r_th
                       for k in range(K)])
    eve_m = np.array([[thresholds.r_eth - eve_rate(e, k, design, star, channels, s_e)
                       for k in range(K)] for e in range(E)])
    sens_m = np.array([beampattern_gain(t, design, star, channels) - thresholds.lambda_gain
                       for t in range(T)])
    power = design.total_power()
    report = FeasibilityReport(
        rate_margins=rate_m,
        eve_margins=eve_m,
        sensing_margins=sens_m,
        power_used=power,
        power_margin=thresholds.p_max - power,
        conservation_residual=star.conservation_residual(),
    )

    if n_samples > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        worst = {"rate": np.inf, "eve": np.inf, "sensing": np.inf}
        viol = 0
        for k in range(K):
            D = sample_uncertainty_batch(channels.delta_ir[k], channels.H_hat[k].shape,
                                         n_samples, rng)
            for d in D:
                m = ir_rate(k, design, star, channels, s_i,
                            h_override=channels.H_hat[k] + d) - thresholds.r_th
                worst["rate"] = min(worst["rate"], m)
                viol += m < -1e-6
        for e in range(E):
            D = sample_uncertainty_batch(channels.delta_er[e], channels.F_hat[e].shape,
                                         n_samples, rng)
            for d in D:
                F = channels.F_hat[e] + d
                m = min(thresholds.r_eth
                        - eve_rate(e, k, design, star, channels, s_e, f_override=F)
                        for k in range(K))
                worst["eve"] = min(worst["eve"], m)
                viol += m < -1e-6
        for t in range(T):
            D = sample_uncertainty_batch(channels.delta_tar[t], channels.Ht_hat[t].shape,
                                         n_samples, rng)
            for d in D:
                m = beampattern_gain(t, design, star, channels,
                                     h_override=channels.Ht_hat[t] + d) - thresholds.lambda_gain
                worst["sensing"] = min(worst["sensing"], m)
                viol += m < -1e-6 * max(1.0, thresholds.lambda_gain)
        report.worst_sampled = worst
        report.violations = int(viol)
    return report
