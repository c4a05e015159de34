import numpy as np
import pytest

from tentkit.errors import CausalityViolation, NonPhysicalState
from tentkit.laws import (
    burgers_ginv,
    burgers_law,
    entropy_pair_burgers,
    euler_entropy,
    euler_flux,
    euler_ginv,
    euler_law,
    euler_pressure,
    euler_temperature,
    euler_wavespeed,
    law_by_name,
    mapped_entropy_pair,
    transport_law,
    wave_law,
)

D = 5
GAMMA = 1.4


def random_euler_states(rng, n):
    rho = rng.uniform(0.3, 3.0, n)
    v = rng.uniform(-2.0, 2.0, (2, n))
    T = rng.uniform(0.2, 4.0, n)
    E = rho * (D / 4.0 * T + 0.5 * (v[0] ** 2 + v[1] ** 2))
    return np.stack([rho, rho * v[0], rho * v[1], E])


# -- transport ---------------------------------------------------------------


def test_transport_basics():
    law = transport_law((1.0, 0.0))
    u = np.array([[0.5]])
    assert np.allclose(law.ginv(u, np.zeros((2, 1))), u)
    # grad phi = (0.5, 0) halves the mapped state
    gphi = np.array([[0.5], [0.0]])
    U = law.mapped(u, gphi)
    assert np.allclose(U, 0.5 * u)
    assert np.allclose(law.ginv(U, gphi), u)
    assert np.isclose(float(np.max(transport_law((1.0, 2.0)).max_wavespeed(
        np.zeros((2, 1)), 0.0, u))), np.sqrt(5.0))


def test_transport_causality_guard():
    law = transport_law((1.0, 0.0))
    with pytest.raises(CausalityViolation):
        law.ginv(np.array([[1.0]]), np.array([[1.0], [0.0]]))


# -- burgers -----------------------------------------------------------------


def test_burgers_ginv_values():
    assert np.isclose(burgers_ginv(0.3, 0.0), 0.3)
    # forward-map roundtrip: U = u - u^2 d / 2
    u, d = 0.5, 0.5
    U = u - 0.5 * u ** 2 * d
    assert np.isclose(U, 0.4375)
    assert np.isclose(burgers_ginv(U, d), u)
    with pytest.raises(CausalityViolation):
        burgers_ginv(0.5, 1.0)   # discriminant 0 -> |u d| = 1


def test_burgers_roundtrip_sweep():
    rng = np.random.default_rng(0)
    law = burgers_law()
    for _ in range(200):
        u = rng.uniform(-1.5, 1.5)
        # keep |u d| safely below 1
        d = rng.uniform(-0.9, 0.9) / max(abs(u), 1e-3)
        d = np.clip(d, -3, 3)
        gphi = np.array([[0.6 * d], [0.4 * d]])
        w = np.array([[u]])
        U = law.mapped(w, gphi)
        assert np.allclose(law.ginv(U, gphi), w, atol=1e-12)


def test_burgers_entropy_pair():
    E, F = entropy_pair_burgers(np.array(0.0))
    assert E == 0 and np.all(F == 0)
    E, F = entropy_pair_burgers(np.array(1.0))
    assert np.isclose(E, 0.5) and np.allclose(F, [1 / 3, 1 / 3])
    # smooth compatibility: dE/du * f'(u) = F'(u) for the square entropy
    u = 0.7
    assert np.isclose(u * u, u ** 2)  # F_j' = u^2, f' = u, E' = u


def test_burgers_wavespeeds():
    law = burgers_law()
    u = np.array([[0.8]])
    assert np.isclose(float(np.max(law.max_wavespeed(None, 0, u))),
                      np.sqrt(2) * 0.8)
    n = np.array([1.0, 0.0])
    assert np.isclose(float(np.max(law.normal_wavespeed(None, 0, u, n))), 0.8)


# -- wave --------------------------------------------------------------------


def test_wave_H_structure():
    law = wave_law()
    H = law.mapped_matrix(np.zeros(2))
    assert np.allclose(H, np.eye(3))
    s = 0.4
    H = law.mapped_matrix(np.array([s, 0.0]))
    w = np.sort(np.linalg.eigvalsh(H))
    assert np.allclose(w, [1 - s, 1, 1 + s], atol=1e-13)


def test_wave_mapped_consistent_with_generic():
    law = wave_law(alpha=np.array([[2.0, 0.3], [0.3, 1.0]]), beta_damp=0.2)
    rng = np.random.default_rng(2)
    u = rng.standard_normal((3, 5))
    gphi = 0.2 * rng.standard_normal((2, 5))
    U = law.mapped(u, gphi)
    for i in range(5):
        H = law.mapped_matrix(gphi[:, i])
        assert np.allclose(U[:, i], H @ u[:, i], atol=1e-13)
    assert np.allclose(law.ginv(U, gphi), u, atol=1e-12)


def test_wave_H_equals_mapped_jacobian_fd():
    law = wave_law(alpha=np.array([[1.5, 0.2], [0.2, 0.8]]))
    gphi = np.array([[0.1], [-0.3]])
    u0 = np.array([[0.3], [0.6], [-0.2]])
    J = law.mapped_jacobian(None, 0.0, u0, gphi)[:, :, 0]
    H = law.mapped_matrix(gphi[:, 0])
    assert np.allclose(J, H, atol=1e-13)
    # finite differences against the mapped relation
    eps = 1e-7
    for m in range(3):
        du = np.zeros((3, 1))
        du[m] = eps
        fd = (law.mapped(u0 + du, gphi) - law.mapped(u0 - du, gphi)) / (2 * eps)
        assert np.allclose(fd[:, 0], H[:, m], atol=1e-8)


def test_wave_H_positive_definite_on_pitched_slab():
    from tentkit.mapping import build_tent_map
    from tentkit.mesh import generate_structured_square
    from tentkit.tents import PitchParams, pitch_slab
    alpha = np.array([[1.3, 0.2], [0.2, 0.9]])
    law = wave_law(alpha=alpha)
    speed = np.sqrt(np.linalg.eigvalsh(alpha).max())
    mesh = generate_structured_square(2)
    params = PitchParams(mesh, t_slab=0.05, edge_speeds=speed)
    slab = pitch_slab(mesh, params)
    for tent in slab.tents[::7]:
        tmap = build_tent_map(tent)
        for that in (0.0, 0.5, 1.0):
            for gphi in tmap.grad_phi(that):
                H = law.mapped_matrix(gphi)
                assert np.linalg.eigvalsh(H).min() > 0
                assert np.linalg.det(H) > 0


# -- euler -------------------------------------------------------------------


def test_euler_rest_gas_flux():
    u = np.array([1.0, 0.0, 0.0, 2.5])
    assert np.isclose(euler_temperature(u), 2.0)
    assert np.isclose(euler_pressure(u), 1.0)
    f = euler_flux(u)
    assert np.allclose(f[0], 0.0)
    assert np.allclose(f[1], [1.0, 0.0])
    assert np.allclose(f[2], [0.0, 1.0])
    assert np.allclose(f[3], 0.0)


def test_euler_wind_tunnel_state():
    # P = 1 at rho = 1.4 with velocity (3, 0) gives E = 8.8
    rho, v1, P = 1.4, 3.0, 1.0
    T = 2.0 * P / rho
    E = rho * (D / 4.0 * T + 0.5 * v1 ** 2)
    assert np.isclose(E, 8.8)
    u = np.array([rho, rho * v1, 0.0, E])
    assert np.isclose(euler_pressure(u), 1.0)
    assert np.isclose(euler_wavespeed(u), 3.0 + np.sqrt(2.0))


def test_euler_flux_parity():
    rng = np.random.default_rng(4)
    u = random_euler_states(rng, 6)
    um = u.copy()
    um[1:3] *= -1.0
    f, fm = euler_flux(u), euler_flux(um)
    assert np.allclose(fm[0], -f[0])          # mass flux flips
    assert np.allclose(fm[3], -f[3])          # energy flux flips
    assert np.allclose(fm[1, 0], f[1, 0])     # normal momentum flux even
    assert np.allclose(fm[2, 1], f[2, 1])
    assert np.allclose(fm[1, 1], f[1, 1])
    assert np.allclose(fm[2, 0], f[2, 0])


def test_euler_flux_rejects_unphysical():
    with pytest.raises(NonPhysicalState):
        euler_flux(np.array([-1.0, 0.0, 0.0, 1.0]))
    with pytest.raises(NonPhysicalState):
        euler_flux(np.array([1.0, 3.0, 0.0, 1.0]))  # E < |m|^2/(2 rho)


def test_euler_ginv_identity_at_zero_gradient():
    rng = np.random.default_rng(8)
    u = random_euler_states(rng, 50)
    out = euler_ginv(u, np.zeros((2, 1)))
    assert np.array_equal(out, u)  # exact, not approximate


def test_euler_ginv_roundtrip():
    rng = np.random.default_rng(15)
    law = euler_law()
    u = random_euler_states(rng, 400)
    c = euler_wavespeed(u)
    scale = rng.uniform(0.0, 0.5, 400) / c
    theta = rng.uniform(0, 2 * np.pi, 400)
    gphi = np.stack([scale * np.cos(theta), scale * np.sin(theta)])
    U = law.mapped(u, gphi)
    back = law.ginv(U, gphi)
    assert np.max(np.abs(back - u) / np.maximum(1, np.abs(u))) < 1e-10


def test_euler_ginv_wind_tunnel_gradient():
    u = np.array([[1.4], [4.2], [0.0], [8.8]])
    gphi = np.array([[0.05], [0.0]])
    law = euler_law()
    U = law.mapped(u, gphi)
    back = law.ginv(U, gphi)
    assert np.allclose(back, u, atol=1e-12)
    assert back[0] > 0 and euler_temperature(back[:, 0]) > 0


def test_euler_ginv_causality_errors():
    u = np.array([[1.0], [0.0], [0.0], [2.5]])
    law = euler_law()
    # enormous gradient: radicand goes negative
    with pytest.raises(CausalityViolation):
        law.ginv(law.temporal(None, 0, u), np.array([[5.0], [0.0]]))


def test_euler_entropy_values():
    u = np.array([1.0, 0.0, 0.0, 1.25])   # T = 1
    ent, flux = euler_entropy(u)
    assert np.isclose(ent, 0.0) and np.allclose(flux, 0.0)
    # scaling: T = e^(2/d) makes ln T = 2/d and ent = rho(ln rho - 1)
    rho = 2.0
    T = np.exp(2.0 / D)
    u = np.array([rho, 0.0, 0.0, rho * D / 4.0 * T])
    ent, _ = euler_entropy(u)
    assert np.isclose(ent, rho * (np.log(rho) - 1.0))
    # flux parallel to momentum
    rng = np.random.default_rng(3)
    st = random_euler_states(rng, 5)
    _, flux = euler_entropy(st)
    cross = flux[0] * st[2] - flux[1] * st[1]
    assert np.allclose(cross, 0.0, atol=1e-12)


def test_euler_wavespeed_rest():
    u = np.array([1.0, 0.0, 0.0, 2.5])
    assert np.isclose(euler_wavespeed(u), np.sqrt(2.8))
    rng = np.random.default_rng(6)
    st = random_euler_states(rng, 20)
    assert np.all(euler_wavespeed(st) >= np.hypot(st[1], st[2]) / st[0])


def test_euler_flux_jacobian_fd():
    rng = np.random.default_rng(44)
    law = euler_law()
    u = random_euler_states(rng, 3)
    J = law.flux_jacobian(None, 0.0, u)
    eps = 1e-6
    for m in range(4):
        du = np.zeros_like(u)
        du[m] = eps
        fd = (euler_flux(u + du) - euler_flux(u - du)) / (2 * eps)
        assert np.allclose(J[:, m, :, :], fd, atol=2e-5)


def test_euler_entropy_grads_fd():
    rng = np.random.default_rng(45)
    law = euler_law()
    u = random_euler_states(rng, 3)
    dE = law.entropy_grad(u)
    dF = law.entropy_flux_grad(u)
    eps = 1e-6
    for m in range(4):
        du = np.zeros_like(u)
        du[m] = eps
        fdE = (law.entropy(u + du) - law.entropy(u - du)) / (2 * eps)
        fdF = (law.entropy_flux(u + du) - law.entropy_flux(u - du)) / (2 * eps)
        assert np.allclose(dE[m], fdE, atol=1e-5)
        assert np.allclose(dF[:, m], fdF, atol=1e-5)


def test_hyperbolicity_proxy():
    # det(D_u g) != 0 at random physical states for every law
    rng = np.random.default_rng(77)
    n = 10000
    st = random_euler_states(rng, n)
    law = euler_law()
    J = law.dg_du(None, 0.0, st)
    assert J.shape == (4, 4, n)
    dets = np.linalg.det(np.moveaxis(J.reshape(4, 4, -1), -1, 0))
    assert np.all(dets != 0)
    for law, L in ((transport_law(), 1), (burgers_law(), 1), (wave_law(), 3)):
        u = rng.standard_normal((L, n))
        J = law.dg_du(None, 0.0, u)
        dets = np.linalg.det(np.moveaxis(
            np.broadcast_to(J, (L, L, n)).reshape(L, L, -1), -1, 0))
        assert np.all(dets != 0)


def test_mapped_entropy_pair_values():
    law = burgers_law()
    w = np.array([[1.0]])
    ent_hat, flux_hat = mapped_entropy_pair(
        law, np.array([0.3, 0.1]), 0.2, w)
    assert np.isclose(ent_hat[0], 0.5 - (1.0 / 3.0) * 0.4)
    assert np.allclose(flux_hat[:, 0], [0.2 / 3.0, 0.2 / 3.0])
    # flat tent: pair reduces to (E, k F)
    ent_hat, flux_hat = mapped_entropy_pair(law, np.zeros(2), 0.7, w)
    assert np.isclose(ent_hat[0], 0.5)
    assert np.allclose(flux_hat[:, 0], 0.7 / 3.0)


def test_roundtrip_sweep_all_laws():
    rng = np.random.default_rng(123)
    n = 2500
    # transport
    law = transport_law((0.7, -0.2))
    u = rng.standard_normal((1, n))
    gphi = rng.uniform(-0.6, 0.6, (2, n))
    U = law.mapped(u, gphi)
    assert np.max(np.abs(law.ginv(U, gphi) - u)) < 1e-10
    # wave
    law = wave_law()
    u = rng.standard_normal((3, n))
    gphi = rng.uniform(-0.5, 0.5, (2, n))
    U = law.mapped(u, gphi)
    assert np.max(np.abs(law.ginv(U, gphi) - u)) < 1e-10


def test_law_by_name():
    assert law_by_name("euler").name == "euler"
    with pytest.raises(ValueError):
        law_by_name("maxwell")
