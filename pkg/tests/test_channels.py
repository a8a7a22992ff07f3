import numpy as np
import pytest

from starris_iscpt import channels as ch


def geo(n_y=2, n_z=2, ref=(0.0, 0.0, 0.0), d=0.03, lam=0.03, m=4):
    return ch.SystemGeometry(np.array([50.0, 0, 0]), np.array(ref), n_y, n_z, d, lam, m)


# ---------------------------------------------------------------- geometry


def test_element_position_reference():
    g = geo()
    assert np.allclose(ch.element_position(1, g), [0, 0, 0])


def test_element_position_row_then_column():
    g = geo(n_y=2)
    assert np.allclose(ch.element_position(2, g), [0, 0.03, 0])
    assert np.allclose(ch.element_position(3, g), [0, 0, 0.03])


def test_element_position_out_of_range():
    with pytest.raises(IndexError):
        ch.element_position(5, geo(n_y=2, n_z=2))


def test_element_positions_pairwise_distinct():
    g = geo(n_y=3, n_z=4)
    pos = ch.element_grid(g)
    d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
    np.fill_diagonal(d, 1.0)
    assert d.min() > 0


def test_element_grid_matches_scalar_indexing():
    g = geo(n_y=3, n_z=2)
    pos = ch.element_grid(g)
    for n in range(1, g.n_elements + 1):
        assert np.allclose(pos[n - 1], ch.element_position(n, g))


# ---------------------------------------------------------------- near field


def test_nearfield_single_element_magnitude():
    g = geo(n_y=1, n_z=1)
    b = ch.nearfield_steering([1.0, 0, 0], g)
    assert abs(abs(b[0]) - 0.03 / (4 * np.pi)) < 1e-12


def test_nearfield_phase_at_one_wavelength():
    g = geo(n_y=1, n_z=1)
    b = ch.nearfield_steering([0.03, 0, 0], g)
    assert abs(np.angle(b[0])) < 1e-10  # -2*pi == 0 mod 2*pi


def test_nearfield_matches_elementwise_oracle():
    g = geo(n_y=2, n_z=2)
    p = np.array([1.0, 0.5, 0.2])
    b = ch.nearfield_steering(p, g)
    for n in range(1, 5):
        r = np.linalg.norm(p - ch.element_position(n, g))
        want = g.wavelength / (4 * np.pi * r) * np.exp(-2j * np.pi * r / g.wavelength)
        assert abs(b[n - 1] - want) < 1e-15


def test_nearfield_magnitude_decay():
    g = geo(n_y=1, n_z=1)
    near = ch.nearfield_steering([0.4, 0, 0], g)
    far = ch.nearfield_steering([1.7, 0, 0], g)
    assert abs(near[0]) > abs(far[0])


def test_nearfield_rejects_element_hit():
    with pytest.raises(ValueError):
        ch.nearfield_steering([0.0, 0.0, 0.0], geo())


# ---------------------------------------------------------------- far field


def test_farfield_single_path_rank_and_norm():
    g = geo(n_y=2, n_z=2, m=4)
    paths = ch.FarFieldPathSet([0.0], [0.0], [0.0], 2e-7)
    G = ch.farfield_channel(paths, g)
    s = np.linalg.svd(G, compute_uv=False)
    assert s[1] < 1e-12 * s[0]
    assert abs(np.linalg.norm(G) ** 2 - 2e-7 * 4 * 4) < 1e-18


def test_farfield_duplicate_paths_scale():
    g = geo(n_y=2, n_z=2, m=4)
    one = ch.farfield_channel(ch.FarFieldPathSet([0.3], [0.2], [-0.1], 1e-6), g)
    two = ch.farfield_channel(
        ch.FarFieldPathSet([0.3, 0.3], [0.2, 0.2], [-0.1, -0.1], 1e-6), g)
    # duplicated identical path: prefactor sqrt(nu M N / L) halves per-term,
    # the sum doubles -> net factor 2/sqrt(2)
    assert np.abs(two - np.sqrt(2.0) * one).max() < 1e-12


def test_farfield_termwise_oracle(rng):
    g = geo(n_y=2, n_z=3, m=4)
    L = 4
    paths = ch.FarFieldPathSet(rng.uniform(-1.5, 1.5, L), rng.uniform(-1.5, 1.5, L),
                               rng.uniform(-1.5, 1.5, L), 3.1e-7)
    G = ch.farfield_channel(paths, g)
    acc = np.zeros_like(G)
    for l in range(L):
        a_r = ch.ris_steering(paths.ris_azimuths[l], paths.ris_elevations[l], g)
        a_b = ch.bs_steering(paths.bs_aods[l], 4)
        acc += np.sqrt(paths.pathloss * 4 * 6 / L) * np.outer(a_r, a_b.conj())
    assert np.abs(G - acc).max() < 1e-15
    assert abs(np.linalg.norm(G) ** 2 - np.linalg.norm(acc) ** 2) < 1e-18


def test_steering_vectors_unit_norm():
    g = geo(n_y=3, n_z=2, m=5)
    assert abs(np.linalg.norm(ch.bs_steering(0.7, 5)) - 1.0) < 1e-12
    assert abs(np.linalg.norm(ch.ris_steering(0.4, -0.2, g)) - 1.0) < 1e-12


# ---------------------------------------------------------------- path loss


def test_pathloss_reference():
    assert abs(ch.pathloss(1.0, -30.0, 1.0, 2.2) - 1e-3) < 1e-18


def test_pathloss_at_reference_distance():
    for a in (1.0, 2.2, 3.7):
        assert abs(ch.pathloss(2.5, -21.0, 2.5, a) - 10 ** (-2.1)) < 1e-15


def test_pathloss_fifty_meters():
    # direct scalar evaluation of the large-scale attenuation law
    want = 1e-3 * 50.0 ** (-2.2)
    got = ch.pathloss(50.0, -30.0, 1.0, 2.2)
    assert abs(got - want) < 1e-18
    assert abs(got - 1.83e-7) / want < 0.01


def test_pathloss_rejects_nonpositive():
    with pytest.raises(ValueError):
        ch.pathloss(0.0, -30.0, 1.0, 2.2)


# ---------------------------------------------------------------- cascading


def test_cascaded_identity(rng):
    G = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    assert np.array_equal(ch.cascaded_channel(np.ones(4), G), G)


def test_cascaded_unit_vector(rng):
    G = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    e1 = np.zeros(4)
    e1[0] = 1.0
    got = ch.cascaded_channel(e1, G)
    assert np.array_equal(got[0], G[0])
    assert np.abs(got[1:]).max() == 0


def test_cascaded_rowwise_oracle(rng):
    h = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    G = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
    got = ch.cascaded_channel(h, G)
    for n in range(5):
        assert np.abs(got[n] - h[n] * G[n]).max() < 1e-15


def test_cascaded_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        ch.cascaded_channel(np.ones(3), rng.standard_normal((4, 2)))


# ---------------------------------------------------------------- uncertainty


def test_error_bound_examples(rng):
    H = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    assert ch.error_bound_from_rho(0.0, H) == 0.0
    assert abs(ch.error_bound_from_rho(0.1, 2 * H / np.linalg.norm(H)) - 0.2) < 1e-12
    d = ch.error_bound_from_rho(0.02, H)
    assert abs(d / np.linalg.norm(H) - 0.02) < 1e-15
    with pytest.raises(ValueError):
        ch.error_bound_from_rho(-0.1, H)


def test_sample_uncertainty_zero_radius(rng):
    D = ch.sample_uncertainty(0.0, (4, 3), rng)
    assert np.abs(D).max() == 0.0


def test_sample_uncertainty_boundary(rng):
    D = ch.sample_uncertainty(1.0, (4, 3), rng, boundary_prob=1.0)
    assert abs(np.linalg.norm(D) - 1.0) < 1e-12


def test_sample_uncertainty_batch_inside(rng):
    D = ch.sample_uncertainty_batch(0.5, (4, 3), 1000, rng)
    norms = np.linalg.norm(D.reshape(1000, -1), axis=1)
    assert np.all(norms <= 0.5 + 1e-12)


def test_sample_uncertainty_ball_invariant(rng):
    # declared invariant: zero violations over >= 1e4 samples
    D = ch.sample_uncertainty_batch(0.37, (3, 2), 10_000, rng)
    norms = np.linalg.norm(D.reshape(10_000, -1), axis=1)
    assert int(np.sum(norms > 0.37 + 1e-12)) == 0


# ---------------------------------------------------------------- scenarios


def test_scenario_cascaded_consistency(rng):
    cfg = ch.ScenarioConfig(rho=0.0)
    cs = ch.build_scenario(cfg, rng)
    for k in range(cs.n_ir):
        want = ch.cascaded_channel(cs.h_ir[k], cs.G)
        assert np.abs(cs.H_hat[k] - want).max() < 1e-18
    assert np.all(cs.delta_ir == 0) and np.all(cs.delta_er == 0)


def test_scenario_sides_follow_geometry(rng):
    cfg = ch.ScenarioConfig()
    layout = ch.draw_layout(cfg, rng)
    for p, s in zip(layout.ir_positions, layout.ir_sides):
        assert ch.NodeLayout.side_of(p) == s
    for p, s in zip(layout.er_positions, layout.er_sides):
        assert ch.NodeLayout.side_of(p) == s


def test_scenario_scaling_consistency(rng):
    cfg = ch.ScenarioConfig(rho=0.1)
    cs = ch.build_scenario(cfg, rng)
    scaled = cs.scaled(10.0)
    assert np.abs(scaled.H_hat[0] - 10 * cs.H_hat[0]).max() == 0
    assert abs(scaled.delta_ir[0] - 10 * cs.delta_ir[0]) < 1e-18
    # cascaded consistency preserved under scaling
    want = ch.cascaded_channel(scaled.h_ir[0], scaled.G)
    assert np.abs(scaled.H_hat[0] - want).max() < 1e-20


def test_channelset_serialization_round_trip(tmp_path, rng):
    cfg = ch.ScenarioConfig(rho=0.02)
    cs = ch.build_scenario(cfg, rng)
    path = tmp_path / "cs.txt"
    ch.save_channelset(cs, path)
    back = ch.load_channelset(path)
    assert np.abs(back.G - cs.G).max() < 1e-15
    assert np.abs(back.H_hat - cs.H_hat).max() < 1e-15
    assert back.side_ir == cs.side_ir
    assert back.digest() == cs.digest()


def test_digest_sensitive_to_data(rng):
    cfg = ch.ScenarioConfig()
    a = ch.build_scenario(cfg, np.random.default_rng(1))
    b = ch.build_scenario(cfg, np.random.default_rng(2))
    assert a.digest() != b.digest()
