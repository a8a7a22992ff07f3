import numpy as np
import pytest

from conftest import random_design, random_star, toy_channels, toy_thresholds
from starris_iscpt import metrics as mx
from starris_iscpt.metrics import StarCoefficients, TransmitDesign


def test_sinr_thresholds_paper_values():
    gamma, eta = mx.sinr_thresholds(2.0, 1.0)
    assert gamma == 3.0 and eta == 1.0
    assert mx.sinr_thresholds(0.0, 0.0) == (0.0, 0.0)
    with pytest.raises(ValueError):
        mx.sinr_thresholds(-1.0, 1.0)


def _single_user_setup(rng, n=4, m=3, signal_power=1e-2):
    """One IR whose received signal power equals exactly signal_power."""
    cs = toy_channels(rng, n=n, m=m, k=1, e=1, t=1)
    star = random_star(rng, n)
    side = cs.side_ir[0]
    eff = cs.H_hat[0].conj().T @ (star.phi_t if side == "t" else star.phi_r)
    w = eff / np.linalg.norm(eff) * np.sqrt(signal_power) / np.linalg.norm(eff)
    design = TransmitDesign((w,), np.zeros((m, m)))
    return cs, star, design


def test_ir_rate_unit_snr(rng):
    # |phi^H H w|^2 == noise -> exactly 1 bit/s/Hz
    noise = 1e-2
    cs, star, design = _single_user_setup(rng, signal_power=noise)
    assert abs(mx.ir_rate(0, design, star, cs, noise) - 1.0) < 1e-9


def test_ir_rate_zero_beamformer(rng):
    cs = toy_channels(rng, k=2)
    star = random_star(rng, 4)
    design = TransmitDesign((np.zeros(3), np.zeros(3)), np.zeros((3, 3)))
    assert mx.ir_rate(0, design, star, cs, 1e-2) == 0.0


def test_rate_lifted_equals_vector(rng):
    cs = toy_channels(rng, k=2, e=2)
    star = random_star(rng, 4)
    design = random_design(rng, 3, 2)
    lifted = TransmitDesign(tuple(np.outer(w, w.conj()) for w in design.beamformers),
                            design.sensing_cov)
    for k in range(2):
        a = mx.ir_rate(k, design, star, cs, 1e-2)
        b = mx.ir_rate(k, lifted, star, cs, 1e-2)
        assert abs(a - b) < 1e-10 * max(1, abs(a))
    for e in range(2):
        for k in range(2):
            a = mx.eve_rate(e, k, design, star, cs, 1e-2)
            b = mx.eve_rate(e, k, lifted, star, cs, 1e-2)
            assert abs(a - b) < 1e-10 * max(1, abs(a))
    a = mx.harvested_power(0, design, star, cs)
    b = mx.harvested_power(0, lifted, star, cs)
    assert abs(a - b) < 1e-10 * max(1, abs(a))


def test_eve_rate_orthogonal_beams(rng):
    cs = toy_channels(rng, k=1, e=1)
    star = random_star(rng, 4)
    side = cs.side_er[0]
    phi = star.phi_t if side == "t" else star.phi_r
    eff = cs.F_hat[0].conj().T @ phi  # effective eavesdropper channel
    w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    w -= eff * (eff.conj() @ w) / np.linalg.norm(eff) ** 2
    design = TransmitDesign((w,), np.zeros((3, 3)))
    assert mx.eve_rate(0, 0, design, star, cs, 1e-2) < 1e-12


def test_eve_rate_unit_snr(rng):
    noise = 1e-2
    cs = toy_channels(rng, k=1, e=1)
    star = random_star(rng, 4)
    side = cs.side_er[0]
    phi = star.phi_t if side == "t" else star.phi_r
    eff = cs.F_hat[0].conj().T @ phi
    w = eff / np.linalg.norm(eff) ** 2 * np.sqrt(noise)
    design = TransmitDesign((w,), np.zeros((3, 3)))
    assert abs(mx.eve_rate(0, 0, design, star, cs, noise) - 1.0) < 1e-9


def test_harvested_power_zero_design(rng):
    cs = toy_channels(rng)
    star = random_star(rng, 4)
    design = TransmitDesign((np.zeros(3), np.zeros(3)), np.zeros((3, 3)))
    assert mx.harvested_power(0, design, star, cs) == 0.0
    assert mx.beampattern_gain(0, design, star, cs) == 0.0


def test_harvested_power_single_beam(rng):
    cs = toy_channels(rng, k=1, e=1)
    star = random_star(rng, 4)
    phi = star.phi_t if cs.side_er[0] == "t" else star.phi_r
    w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    c = phi.conj() @ cs.F_hat[0] @ w
    design = TransmitDesign((w,), np.zeros((3, 3)))
    got = mx.harvested_power(0, design, star, cs, efficiency=0.8)
    assert abs(got - 0.8 * abs(c) ** 2) < 1e-12 * max(1, abs(c) ** 2)


def test_harvested_power_monte_carlo_oracle(rng):
    # closed form vs sample average of |phi^H F x|^2 over symbols and the
    # sensing waveform
    cs = toy_channels(rng, k=2, e=1)
    star = random_star(rng, 4)
    design = random_design(rng, 3, 2)
    V = design.sensing_cov
    L = np.linalg.cholesky(V + 1e-15 * np.eye(3))
    phi = star.phi_t if cs.side_er[0] == "t" else star.phi_r
    eff = phi.conj() @ cs.F_hat[0]  # 1 x M
    n = 100_000
    s = (rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))) / np.sqrt(2)
    z = (rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))) / np.sqrt(2)
    X = s @ np.array(design.beamformers) + z @ L.T  # rows are w1 s1 + w2 s2 + L z
    est = np.mean(np.abs(X @ eff) ** 2)
    want = mx.harvested_power(0, design, star, cs)
    assert abs(est - want) / want < 0.01


def test_beampattern_constraint_boundary(rng):
    # W_k = 0, V chosen so that tr(H^H Q H V) equals the target exactly
    cs = toy_channels(rng, t=1)
    star = random_star(rng, 4)
    A = cs.Ht_hat[0].conj().T @ star.lifted(cs.side_tar[0]) @ cs.Ht_hat[0]
    lam_target = 5e-3
    V = np.eye(3) * lam_target / np.trace(A).real
    design = TransmitDesign((np.zeros(3),), V)
    assert abs(mx.beampattern_gain(0, design, star, cs) - lam_target) < 1e-15


def test_beampattern_monte_carlo_oracle(rng):
    cs = toy_channels(rng, k=1, t=1)
    star = random_star(rng, 4)
    design = random_design(rng, 3, 1)
    phi = star.phi_t if cs.side_tar[0] == "t" else star.phi_r
    eff = phi.conj() @ cs.Ht_hat[0]
    L = np.linalg.cholesky(design.sensing_cov + 1e-15 * np.eye(3))
    n = 100_000
    s = (rng.standard_normal((n, 1)) + 1j * rng.standard_normal((n, 1))) / np.sqrt(2)
    z = (rng.standard_normal((n, 3)) + 1j * rng.standard_normal((n, 3))) / np.sqrt(2)
    X = s @ np.array(design.beamformers) + z @ L.T
    est = np.mean(np.abs(X @ eff) ** 2)
    want = mx.beampattern_gain(0, design, star, cs)
    assert abs(est - want) / want < 0.01


def test_power_scale_covariance(rng):
    cs = toy_channels(rng, k=2)
    star = random_star(rng, 4)
    ws = [rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(2)]
    base = TransmitDesign(tuple(ws), np.zeros((3, 3)))
    scaled = TransmitDesign(tuple(3.0 * w for w in ws), np.zeros((3, 3)))
    assert abs(mx.harvested_power(0, scaled, star, cs)
               - 9.0 * mx.harvested_power(0, base, star, cs)) < 1e-12
    assert abs(mx.beampattern_gain(0, scaled, star, cs)
               - 9.0 * mx.beampattern_gain(0, base, star, cs)) < 1e-12


def test_rate_decreases_with_noise(rng):
    cs = toy_channels(rng, k=1)
    star = random_star(rng, 4)
    design = random_design(rng, 3, 1)
    assert mx.ir_rate(0, design, star, cs, 1e-3) > mx.ir_rate(0, design, star, cs, 1e-2)


def test_star_conservation_validation(rng):
    star = random_star(rng, 4)
    star.validate()
    bad = StarCoefficients.from_phi(star.phi_t, star.phi_t)
    with pytest.raises(ValueError):
        bad.validate()


def test_check_feasibility_report(rng):
    cs = toy_channels(rng, k=2, e=2, t=2)
    star = random_star(rng, 4)
    design = random_design(rng, 3, 2, power=5.0)
    th = toy_thresholds(p_max=10.0)
    rep = mx.check_feasibility(design, star, cs, th)
    assert abs(rep.power_used - design.total_power()) < 1e-12
    assert abs(rep.power_margin - (10.0 - design.total_power())) < 1e-12
    assert rep.conservation_residual < 1e-9
    assert rep.rate_margins.shape == (2,)
    assert rep.eve_margins.shape == (2, 2)


def test_check_feasibility_sampling(rng):
    cs = toy_channels(rng, k=1, e=1, t=1, rho=0.01)
    star = random_star(rng, 4)
    design = random_design(rng, 3, 1, power=5.0)
    th = toy_thresholds()
    rep = mx.check_feasibility(design, star, cs, th, n_samples=50, rng=rng)
    assert set(rep.worst_sampled) == {"rate", "eve", "sensing"}
    # sampled worst can only be no better than nominal
    assert rep.worst_sampled["rate"] <= rep.rate_margins.min() + 1e-12
