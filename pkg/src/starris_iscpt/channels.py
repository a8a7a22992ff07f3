"""Deployment geometry, near/far-field channels and the bounded cascaded
uncertainty model.

The STAR-RIS is a UPA on the YZ plane indexed row by row from the bottom;
receivers and targets sit on the XY plane.  The base station sees the RIS
through a far-field multipath channel; every RIS-to-node link is a pure
line-of-sight spherical wave.  Estimated cascaded channels equal the true
ones (worst-case design philosophy); perturbations exist only in the
verification oracle, bounded in Frobenius norm.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "SystemGeometry",
    "NodeLayout",
    "FarFieldPathSet",
    "ChannelSet",
    "ScenarioConfig",
    "element_position",
    "nearfield_steering",
    "farfield_steering_at",
    "bs_steering",
    "ris_steering",
    "farfield_channel",
    "pathloss",
    "cascaded_channel",
    "error_bound_from_rho",
    "sample_uncertainty",
    "sample_uncertainty_batch",
    "dbm_to_watt",
    "db_to_linear",
    "build_scenario",
    "save_channelset",
    "load_channelset",
]


def dbm_to_watt(x_dbm):
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def db_to_linear(x_db):
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class SystemGeometry:
    """Aperture and BS array constants."""

    bs_position: np.ndarray
    ris_reference: np.ndarray  # element-1 coordinate (0, y_ref, z_ref)
    n_y: int
    n_z: int
    element_spacing: float
    wavelength: float
    bs_antennas: int

    def __post_init__(self):
        if self.element_spacing <= 0 or self.wavelength <= 0:
            raise ValueError("spacing and wavelength must be positive")
        if self.n_y < 1 or self.n_z < 1 or self.bs_antennas < 1:
            raise ValueError("array sizes must be positive")
        object.__setattr__(self, "bs_position", np.asarray(self.bs_position, float))
        object.__setattr__(self, "ris_reference", np.asarray(self.ris_reference, float))

    @property
    def n_elements(self):
        return self.n_y * self.n_z

    @classmethod
    def centered(cls, bs_position, n_y, n_z, wavelength, bs_antennas, spacing=None):
        """Aperture centered on the origin of the YZ plane."""
        d = wavelength if spacing is None else spacing
        ref = np.array([0.0, -(n_y - 1) * d / 2.0, -(n_z - 1) * d / 2.0])
        return cls(np.asarray(bs_position, float), ref, n_y, n_z, d, wavelength, bs_antennas)


def element_position(n, geo):
    """Cartesian coordinate of element n (1-based, row-by-row from bottom)."""
    if not 1 <= n <= geo.n_elements:
        raise IndexError(f"element index {n} outside 1..{geo.n_elements}")
    iy = (n - 1) % geo.n_y
    iz = (n - 1) // geo.n_y
    return geo.ris_reference + np.array([0.0, iy * geo.element_spacing, iz * geo.element_spacing])


def element_grid(geo):
    """All N element positions, (N, 3)."""
    idx = np.arange(geo.n_elements)
    iy = idx % geo.n_y
    iz = idx // geo.n_y
    pos = np.tile(geo.ris_reference, (geo.n_elements, 1))
    pos[:, 1] += iy * geo.element_spacing
    pos[:, 2] += iz * geo.element_spacing
    return pos


@dataclass(frozen=True)
class NodeLayout:
    """Receiver and target placement with transmission/reflection labels."""

    ir_positions: np.ndarray  # (K, 3), z = 0
    er_positions: np.ndarray  # (E, 3)
    target_positions: np.ndarray  # (T, 3)
    ir_sides: tuple
    er_sides: tuple
    target_sides: tuple

    def __post_init__(self):
        for name in ("ir_positions", "er_positions", "target_positions"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), float)))
        for sides, pos in ((self.ir_sides, self.ir_positions),
                           (self.er_sides, self.er_positions),
                           (self.target_sides, self.target_positions)):
            if len(sides) != pos.shape[0]:
                raise ValueError("side labels must match node count")
            if any(s not in ("t", "r") for s in sides):
                raise ValueError("side labels must be 't' or 'r'")

    @staticmethod
    def side_of(position):
        """Reflection region shares the BS half-space x > 0."""
        return "r" if position[0] > 0 else "t"


@dataclass(frozen=True)
class FarFieldPathSet:
    """Angles and large-scale loss of the BS-to-RIS multipath channel."""

    bs_aods: np.ndarray
    ris_azimuths: np.ndarray
    ris_elevations: np.ndarray
    pathloss: float

    def __post_init__(self):
        for name in ("bs_aods", "ris_azimuths", "ris_elevations"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))
        L = self.bs_aods.size
        if self.ris_azimuths.size != L or self.ris_elevations.size != L:
            raise ValueError("angle lists must share length")
        if L < 1:
            raise ValueError("at least one path required")
        if self.pathloss <= 0:
            raise ValueError("pathloss must be positive")

    @property
    def n_paths(self):
        return self.bs_aods.size


def nearfield_steering(p, geo):
    """Spherical-wave LoS vector from the aperture to point p.

    Entry n carries magnitude lambda/(4 pi r_n) and phase -2 pi r_n / lambda
    with r_n the exact element-to-point distance.
    """
    p = np.asarray(p, float)
    r = np.linalg.norm(p[None, :] - element_grid(geo), axis=1)
    if np.any(r < 1e-12):
        raise ValueError("probe point coincides with an aperture element")
    lam = geo.wavelength
    return lam / (4.0 * np.pi * r) * np.exp(-2j * np.pi * r / lam)


def farfield_steering_at(p, geo):
    """Planar-wave surrogate of nearfield_steering for the same point.

    Common magnitude lambda/(4 pi d) at the point's distance d from the
    aperture origin, phases from projecting element offsets on the arrival
    direction.  Used by the far-field-only baseline.
    """
    p = np.asarray(p, float)
    d = np.linalg.norm(p)
    if d < 1e-12:
        raise ValueError("probe point at the aperture origin")
    u = p / d
    lam = geo.wavelength
    proj = element_grid(geo) @ u
    return lam / (4.0 * np.pi * d) * np.exp(-2j * np.pi * (d - proj) / lam)


def bs_steering(aod, m, spacing_over_lambda=0.5):
    """Unit-norm ULA steering vector at departure angle aod (radians)."""
    k = np.arange(m)
    return np.exp(-2j * np.pi * spacing_over_lambda * k * np.sin(aod)) / np.sqrt(m)


def ris_steering(azimuth, elevation, geo):
    """Unit-norm UPA steering vector for a planar arrival at the RIS."""
    idx = np.arange(geo.n_elements)
    iy = idx % geo.n_y
    iz = idx // geo.n_y
    c = geo.element_spacing / geo.wavelength
    phase = -2j * np.pi * c * (iy * np.sin(azimuth) * np.cos(elevation) + iz * np.sin(elevation))
    return np.exp(phase) / np.sqrt(geo.n_elements)


def farfield_channel(paths, geo):
    """Multipath BS-to-RIS matrix: sqrt(nu M N / L) sum_l a_ris a_bs^H."""
    M, N, L = geo.bs_antennas, geo.n_elements, paths.n_paths
    G = np.zeros((N, M), dtype=complex)
    for aod, az, el in zip(paths.bs_aods, paths.ris_azimuths, paths.ris_elevations):
        G += np.outer(ris_steering(az, el, geo), bs_steering(aod, M).conj())
    return np.sqrt(paths.pathloss * M * N / L) * G


def pathloss(d, c0_db, d0, alpha):
    """Large-scale attenuation 10^(c0/10) (d/d0)^-alpha."""
    if d <= 0 or d0 <= 0:
        raise ValueError("distances must be positive")
    return db_to_linear(c0_db) * (d / d0) ** (-alpha)


def cascaded_channel(h, G):
    """Composite BS -> RIS -> node channel diag(h) G."""
    h = np.asarray(h)
    G = np.asarray(G)
    if h.ndim != 1 or G.shape[0] != h.size:
        raise ValueError("dimension mismatch between steering vector and G")
    return h[:, None] * G


def error_bound_from_rho(rho, estimate):
    """Frobenius error radius delta = rho * ||estimate||_F."""
    if rho < 0:
        raise ValueError("relative error level must be nonnegative")
    return rho * np.linalg.norm(estimate)


def sample_uncertainty(delta, shape, rng, boundary_prob=0.5):
    """One perturbation with ||D||_F <= delta.

    With probability boundary_prob the sample sits exactly on the sphere
    ||D||_F = delta, else uniformly inside the ball.
    """
    return sample_uncertainty_batch(delta, shape, 1, rng, boundary_prob)[0]


def sample_uncertainty_batch(delta, shape, n, rng, boundary_prob=0.5):
    """(n, *shape) perturbations in the Frobenius ball of radius delta."""
    if delta < 0:
        raise ValueError("radius must be nonnegative")
    dim = int(np.prod(shape))
    if delta == 0.0:
        return np.zeros((n,) + tuple(shape), dtype=complex)
    Z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    radius = delta * rng.uniform(size=n) ** (1.0 / (2 * dim))
    on_boundary = rng.uniform(size=n) < boundary_prob
    radius[on_boundary] = delta
    return (radius[:, None] * Z).reshape((n,) + tuple(shape))


@dataclass(frozen=True)
class ChannelSet:
    """Every channel of one scenario plus the uncertainty radii.

    Cascaded estimates satisfy H_hat = diag(h) G exactly; the radii encode
    the assumed estimation quality (delta = rho ||H_hat||_F).
    """

    G: np.ndarray
    h_ir: np.ndarray  # (K, N)
    g_er: np.ndarray  # (E, N)
    h_tar: np.ndarray  # (T, N)
    H_hat: np.ndarray  # (K, N, M)
    F_hat: np.ndarray  # (E, N, M)
    Ht_hat: np.ndarray  # (T, N, M)
    delta_ir: np.ndarray
    delta_er: np.ndarray
    delta_tar: np.ndarray
    side_ir: tuple
    side_er: tuple
    side_tar: tuple
    # provenance (not serialized): lets baselines rebuild surrogate channels
    geometry: SystemGeometry | None = None
    layout: NodeLayout | None = None

    def __post_init__(self):
        if np.any(self.delta_ir < 0) or np.any(self.delta_er < 0) or np.any(self.delta_tar < 0):
            raise ValueError("uncertainty radii must be nonnegative")

    @property
    def n_ir(self):
        return self.H_hat.shape[0]

    @property
    def n_er(self):
        return self.F_hat.shape[0]

    @property
    def n_tar(self):
        return self.Ht_hat.shape[0]

    @property
    def n_elements(self):
        return self.G.shape[0]

    @property
    def n_antennas(self):
        return self.G.shape[1]

    def scaled(self, factor):
        """Scale every RIS-side channel (and radii) by `factor`.

        Used to bring solver data to unit magnitude; powers computed from a
        scaled set relate to physical watts through factor^-2.
        """
        return replace(
            self,
            h_ir=self.h_ir * factor,
            g_er=self.g_er * factor,
            h_tar=self.h_tar * factor,
            H_hat=self.H_hat * factor,
            F_hat=self.F_hat * factor,
            Ht_hat=self.Ht_hat * factor,
            delta_ir=self.delta_ir * factor,
            delta_er=self.delta_er * factor,
            delta_tar=self.delta_tar * factor,
        )

    def typical_norm(self):
        """RMS Frobenius norm over all cascaded estimates."""
        norms = [np.linalg.norm(H) for H in self.H_hat]
        norms += [np.linalg.norm(F) for F in self.F_hat]
        norms += [np.linalg.norm(H) for H in self.Ht_hat]
        return float(np.sqrt(np.mean(np.square(norms))))

    def digest(self):
        """Hex digest of the canonical text serialization."""
        buf = io.StringIO()
        _write_channelset(self, buf)
        return hashlib.sha256(buf.getvalue().encode()).hexdigest()


# ---------------------------------------------------------------------------
# Scenario generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioConfig:
    """All scalar system parameters of one simulated deployment."""

    bs_antennas: int = 4
    n_y: int = 2
    n_z: int = 4
    n_ir: int = 2
    n_er: int = 2
    n_tar: int = 2
    n_paths: int = 4
    carrier_ghz: float = 10.0
    bs_distance: float = 50.0
    pathloss_ref_db: float = -30.0
    pathloss_ref_dist: float = 1.0
    pathloss_exponent: float = 2.2
    # node placement: kept inside the aperture's radiating near field
    ir_radius: tuple = (0.25, 0.45)
    er_offset: float = 0.05
    target_radius: float = 0.35
    azimuth_span: float = np.pi / 3
    rho: float = 0.02

    @property
    def wavelength(self):
        return 0.3 / self.carrier_ghz  # c / f with c = 3e8 m/s

    @property
    def n_elements(self):
        return self.n_y * self.n_z

    def geometry(self):
        bs = np.array([self.bs_distance, 0.0, 0.0])
        return SystemGeometry.centered(bs, self.n_y, self.n_z, self.wavelength,
                                       self.bs_antennas)


def _place_node(rng, side, radius, span):
    """Random in-plane position at the given radius on one side of the RIS."""
    a = rng.uniform(-span, span)
    x = radius * np.cos(a)
    y = radius * np.sin(a)
    if side == "t":
        x = -x
    return np.array([x, y, 0.0])


def draw_layout(cfg, rng):
    """Random node placement; IRs/targets alternate sides, ERs shadow IRs."""
    ir_pos, ir_sides = [], []
    for k in range(cfg.n_ir):
        side = "r" if k % 2 == 0 else "t"
        r = rng.uniform(*cfg.ir_radius)
        ir_pos.append(_place_node(rng, side, r, cfg.azimuth_span))
        ir_sides.append(side)
    er_pos, er_sides = [], []
    for e in range(cfg.n_er):
        anchor = ir_pos[e % cfg.n_ir]
        side = ir_sides[e % cfg.n_ir]
        ang = rng.uniform(0, 2 * np.pi)
        off = cfg.er_offset * np.array([np.cos(ang), np.sin(ang), 0.0])
        p = anchor + off
        if NodeLayout.side_of(p) != side:  # keep the eavesdropper on its IR's side
            p = anchor - off
        er_pos.append(p)
        er_sides.append(side)
    t_pos, t_sides = [], []
    for t in range(cfg.n_tar):
        side = "r" if t % 2 == 0 else "t"
        t_pos.append(_place_node(rng, side, cfg.target_radius, cfg.azimuth_span))
        t_sides.append(side)
    return NodeLayout(np.array(ir_pos), np.array(er_pos), np.array(t_pos),
                      tuple(ir_sides), tuple(er_sides), tuple(t_sides))


def draw_paths(cfg, rng):
    nu = pathloss(cfg.bs_distance, cfg.pathloss_ref_db, cfg.pathloss_ref_dist,
                  cfg.pathloss_exponent)
    L = cfg.n_paths
    return FarFieldPathSet(
        bs_aods=rng.uniform(-np.pi / 2, np.pi / 2, L),
        ris_azimuths=rng.uniform(-np.pi / 2, np.pi / 2, L),
        ris_elevations=rng.uniform(-np.pi / 2, np.pi / 2, L),
        pathloss=nu,
    )


def build_scenario(cfg, rng, layout=None, paths=None):
    """Draw geometry, channels and cascaded estimates for one trial."""
    geo = cfg.geometry()
    layout = draw_layout(cfg, rng) if layout is None else layout
    paths = draw_paths(cfg, rng) if paths is None else paths
    G = farfield_channel(paths, geo)
    h_ir = np.array([nearfield_steering(p, geo) for p in layout.ir_positions])
    g_er = np.array([nearfield_steering(p, geo) for p in layout.er_positions])
    h_tar = np.array([nearfield_steering(p, geo) for p in layout.target_positions])
    H_hat = np.array([cascaded_channel(h, G) for h in h_ir])
    F_hat = np.array([cascaded_channel(g, G) for g in g_er])
    Ht_hat = np.array([cascaded_channel(h, G) for h in h_tar])
    return ChannelSet(
        G=G, h_ir=h_ir, g_er=g_er, h_tar=h_tar,
        H_hat=H_hat, F_hat=F_hat, Ht_hat=Ht_hat,
        delta_ir=np.array([error_bound_from_rho(cfg.rho, H) for H in H_hat]),
        delta_er=np.array([error_bound_from_rho(cfg.rho, F) for F in F_hat]),
        delta_tar=np.array([error_bound_from_rho(cfg.rho, H) for H in Ht_hat]),
        side_ir=layout.ir_sides, side_er=layout.er_sides, side_tar=layout.target_sides,
        geometry=geo, layout=layout,
    )


# ---------------------------------------------------------------------------
# Text serialization (regression fixtures)
# ---------------------------------------------------------------------------

_FMT = "%.17g"


def _write_matrix(fh, name, A):
    A = np.atleast_2d(A)
    fh.write(f"matrix {name} {A.shape[0]} {A.shape[1]}\n")
    for row in A:  # row-major, one "re im" pair per entry
        fh.write(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row) + "\n")


def _write_channelset(cs, fh):
    fh.write("channelset v1\n")
    fh.write(f"dims {cs.n_elements} {cs.n_antennas} {cs.n_ir} {cs.n_er} {cs.n_tar}\n")
    fh.write("sides " + " ".join(cs.side_ir) + " | " + " ".join(cs.side_er)
             + " | " + " ".join(cs.side_tar) + "\n")
    fh.write("delta_ir " + " ".join(_FMT % d for d in cs.delta_ir) + "\n")
    fh.write("delta_er " + " ".join(_FMT % d for d in cs.delta_er) + "\n")
    fh.write("delta_tar " + " ".join(_FMT % d for d in cs.delta_tar) + "\n")
    _write_matrix(fh, "G", cs.G)
    for k, h in enumerate(cs.h_ir):
        _write_matrix(fh, f"h_ir{k}", h[None, :])
    for e, g in enumerate(cs.g_er):
        _write_matrix(fh, f"g_er{e}", g[None, :])
    for t, h in enumerate(cs.h_tar):
        _write_matrix(fh, f"h_tar{t}", h[None, :])
    for k, H in enumerate(cs.H_hat):
        _write_matrix(fh, f"H_hat{k}", H)
    for e, F in enumerate(cs.F_hat):
        _write_matrix(fh, f"F_hat{e}", F)
    for t, H in enumerate(cs.Ht_hat):
        _write_matrix(fh, f"Ht_hat{t}", H)


def save_channelset(cs, path):
    """Plain-text serialization: per-entry real/imag pairs, row-major."""
    with open(path, "w") as fh:
        _write_channelset(cs, fh)


def _read_matrix(lines, i):
    head = lines[i].split()
    rows, cols = int(head[2]), int(head[3])
    A = np.empty((rows, cols), dtype=complex)
    for r in range(rows):
        vals = np.fromstring(lines[i + 1 + r], sep=" ")
        A[r] = vals[0::2] + 1j * vals[1::2]
    return head[1], A, i + 1 + rows


def load_channelset(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "channelset v1":
        raise ValueError("not a channelset file")
    N, M, K, E, T = (int(v) for v in lines[1].split()[1:])
    parts = " ".join(lines[2].split()[1:]).split("|")
    sides = [tuple(p.split()) for p in parts]
    deltas = [np.fromstring(" ".join(lines[3 + j].split()[1:]), sep=" ") for j in range(3)]
    mats = {}
    i = 6
    while i < len(lines):
        name, A, i = _read_matrix(lines, i)
        mats[name] = A
    return ChannelSet(
        G=mats["G"],
        h_ir=np.array([mats[f"h_ir{k}"][0] for k in range(K)]),
        g_er=np.array([mats[f"g_er{e}"][0] for e in range(E)]),
        h_tar=np.array([mats[f"h_tar{t}"][0] for t in range(T)]),
        H_hat=np.array([mats[f"H_hat{k}"] for k in range(K)]),
        F_hat=np.array([mats[f"F_hat{e}"] for e in range(E)]),
        Ht_hat=np.array([mats[f"Ht_hat{t}"] for t in range(T)]),
        delta_ir=deltas[0], delta_er=deltas[1], delta_tar=deltas[2],
        side_ir=sides[0], side_er=sides[1], side_tar=sides[2],
    )
