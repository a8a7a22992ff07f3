import numpy as np
import pytest

from starris_iscpt.channels import ChannelSet
from starris_iscpt.metrics import StarCoefficients, Thresholds, TransmitDesign


def toy_channels(rng, n=4, m=3, k=2, e=2, t=2, rho=0.05):
    """Unit-scale synthetic channel set (not drawn from any geometry)."""
    def mat(count):
        A = rng.standard_normal((count, n, m)) + 1j * rng.standard_normal((count, n, m))
        return A / np.sqrt(2 * n * m)

    def vec(count):
        v = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
        return v / np.sqrt(2 * n)

    H, F, Ht = mat(k), mat(e), mat(t)
    sides = lambda c: tuple("r" if i % 2 == 0 else "t" for i in range(c))
    return ChannelSet(
        G=rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)),
        h_ir=vec(k), g_er=vec(e), h_tar=vec(t),
        H_hat=H, F_hat=F, Ht_hat=Ht,
        delta_ir=rho * np.array([np.linalg.norm(x) for x in H]),
        delta_er=rho * np.array([np.linalg.norm(x) for x in F]),
        delta_tar=rho * np.array([np.linalg.norm(x) for x in Ht]),
        side_ir=sides(k), side_er=sides(e), side_tar=sides(t),
    )


def toy_thresholds(m=3, p_max=10.0, noise=1e-2, lam=1e-2, r_th=1.0, r_eth=1.0):
    return Thresholds(r_th=r_th, r_eth=r_eth, lambda_gain=lam, p_max=p_max,
                      noise_ir=noise, noise_er=noise, eh_efficiency=(1.0, 1.0))


def random_star(rng, n, beta_t=None):
    bt = rng.uniform(0.2, 0.8, n) if beta_t is None else np.asarray(beta_t, float)
    pt = np.sqrt(bt) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    pr = np.sqrt(1 - bt) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return StarCoefficients.from_phi(pt, pr)


def random_design(rng, m, k, power=None):
    ws = [rng.standard_normal(m) + 1j * rng.standard_normal(m) for _ in range(k)]
    A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    V = A @ A.conj().T / (4 * m)
    d = TransmitDesign(tuple(ws), V)
    if power is not None:
        d = TransmitDesign(tuple(np.sqrt(power / (2 * d.total_power())) * w for w in ws),
                           V * power / (2 * d.total_power()))
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
