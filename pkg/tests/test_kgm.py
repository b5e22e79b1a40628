"""Semiclassical Klein-Gordon-Maxwell evolution and observables."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgmlimit.fields import Calculus, Grid, as_vector, norm
from kgmlimit.kgm import (NonFiniteError, StabilityError, kgm_evolve, kgm_init, kgm_observables, kgm_step,
                          split_identity_residuals, with_gauge)
from kgmlimit.manufactured import random_kgm_state, smooth_field, smooth_vector


def _vacuum(g, eps=0.1):
    c = Calculus(g)
    z = np.zeros(g.shape, complex)
    zv = np.zeros((3, *g.shape))
    return kgm_init(z, z, zv, zv, eps, c), c


def test_init_validation():
    g = Grid((4, 4, 1))
    c = Calculus(g)
    z = np.zeros(g.shape, complex)
    zv = np.zeros((3, *g.shape))
    with pytest.raises(ValueError):
        kgm_init(z, z, zv, zv, 0.0, c)
    with pytest.raises(Exception):
        kgm_init(z[:2], z, zv, zv, 0.1, c)
    bad = z.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(NonFiniteError):
        kgm_init(bad, z, zv, zv, 0.1, c)


def test_vacuum_stays_vacuum():
    s, c = _vacuum(Grid((8, 8, 1)))
    o = kgm_observables(s, c)
    assert o.energy == 0 and o.charge == 0 and o.gauss_residual == 0
    for _ in range(10):
        s = kgm_step(s, 0.01, c)
    assert not np.any(s.phi) and not np.any(s.pi) and not np.any(s.A) and not np.any(s.E)
    assert s.t == pytest.approx(0.1)


def test_injected_gauss_violation_is_measured():
    g = Grid((32, 1, 1))
    s, c = _vacuum(g)
    x = g.coords()[0]
    E = np.zeros((3, *g.shape))
    E[0] = np.sin(2 * np.pi * x)  # div E = 2 pi cos, charge 0
    s = kgm_init(s.phi, s.pi, s.A, E, s.eps, c)
    assert kgm_observables(s, c).gauss_residual == pytest.approx(2 * np.pi * np.sqrt(0.5), rel=1e-12)


def test_constant_phi_observables():
    g = Grid((4, 3, 2), (1.0, 2.0, 0.5))
    c = Calculus(g)
    a = 1.7
    zv = np.zeros((3, *g.shape))
    s = kgm_init(np.full(g.shape, a, complex), np.zeros(g.shape, complex), zv, zv, 0.2, c)
    o = kgm_observables(s, c)
    assert np.allclose(o.rho, a**2)
    assert np.max(np.abs(o.J.comps)) == 0
    assert o.energy == pytest.approx(0.5 * a**2 * g.volume)


def test_plane_wave_current():
    g = Grid((16, 1, 1))
    c = Calculus(g)
    eps, a = 0.1, 0.8
    k = np.array([2 * np.pi * eps * 3, 0.0, 0.0])  # winding 3 on the unit box
    lam = np.sqrt(1 + k @ k)
    x = g.coords()
    wave = np.exp(1j * np.tensordot(k, x, axes=1) / eps)
    zv = np.zeros((3, *g.shape))
    s = kgm_init(a * wave, -1j * a * lam * wave, zv, zv, eps, c)
    J = kgm_observables(s, c).J.comps
    assert np.allclose(J[1], a**2 * k[0], rtol=1e-12)
    assert np.allclose(J[0], -(a**2) * lam, rtol=1e-12)


def test_stability_rules():
    s, c = _vacuum(Grid((16, 1, 1)), eps=0.1)
    with pytest.raises(StabilityError):
        kgm_step(s, 0.021, c)  # 0.2 eps = 0.02
    g = Grid((64, 1, 1))
    s, c = _vacuum(g, eps=1.0)
    with pytest.raises(StabilityError):
        kgm_step(s, 0.6 / 64, c)
    kgm_step(s, 0.5 / 64, c)


def test_uncoupled_harmonic_oscillator_second_order():
    # constant Phi with frozen potentials solves eps^2 Phi'' = -Phi
    g = Grid((4, 1, 1))
    c = Calculus(g)
    eps, a, b = 0.5, 1.0 + 0.5j, 0.3 - 0.2j
    zv = np.zeros((3, *g.shape))
    T = 1.0
    errs = []
    for dt in (0.05, 0.025, 0.0125):
        s = kgm_init(np.full(g.shape, a), np.full(g.shape, b), zv, zv, eps, c)
        s = kgm_evolve(s, T, dt, c, stride=10**6, coupled=False)[-1]
        exact = a * np.cos(T / eps) + b * np.sin(T / eps)
        errs.append(np.max(np.abs(s.phi - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.1)


def test_evolve_rejects_bad_horizon_and_samples_ends():
    s, c = _vacuum(Grid((8, 1, 1)))
    with pytest.raises(ValueError):
        kgm_evolve(s, 0.105, 0.01, c)
    traj = kgm_evolve(s, 0.1, 0.01, c, stride=3)
    assert [round(x.t, 10) for x in traj] == [0.0, 0.03, 0.06, 0.09, 0.1]


def test_charge_conserved_to_roundoff_and_energy_second_order():
    g = Grid((32, 1, 1))
    c = Calculus(g)
    rng = np.random.default_rng(11)
    s0 = random_kgm_state(g, rng, eps=0.5)
    q0 = kgm_observables(s0, c).charge
    drifts = []
    for dt in (0.01, 0.005, 0.0025):
        traj = kgm_evolve(s0, 0.4, dt, c)
        obs = [kgm_observables(s, c) for s in traj]
        assert max(abs(o.charge - q0) for o in obs) <= 1e-12 * abs(q0)
        drifts.append(max(abs(o.energy - obs[0].energy) for o in obs))
    orders = np.log2(np.array(drifts[:-1]) / np.array(drifts[1:]))
    assert np.all(np.abs(orders - 2) < 0.3)


def test_gauss_constraint_preserved_spectral():
    # data with Gauss satisfied stay constrained to roundoff
    from kgmlimit.wkb import make_matched_pair, profile

    g = Grid((64, 1, 1))
    c = Calculus(g)
    u, rho = profile("sine-bump", g, velocity_wave=0.1)
    s = make_matched_pair(u, rho, [0.1], c).kgm_data_family[0][1]
    traj = kgm_evolve(s, 0.2, 0.005, c, stride=10)
    res = [kgm_observables(x, c).gauss_residual for x in traj]
    assert max(res) < 1e-11


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_gauge_invariance_of_observables(seed):
    # band-limited Phi and a small chi keep exp(-i chi/eps) Phi resolved, so
    # the spectral product rule holds to roundoff
    g = Grid((64, 1, 1))
    c = Calculus(g)
    rng = np.random.default_rng(seed)
    eps = 0.1
    phi = 2.0 + smooth_field(g, rng, amplitude=0.3) + 1j * smooth_field(g, rng, amplitude=0.3)
    pi = smooth_field(g, rng) + 1j * smooth_field(g, rng)
    s = kgm_init(phi, pi, smooth_vector(g, rng), smooth_vector(g, rng), eps, c)
    chi = 0.2 * eps * smooth_field(g, rng)
    a, b = kgm_observables(s, c), kgm_observables(with_gauge(s, chi, c), c)
    assert np.max(np.abs(a.rho - b.rho)) <= 1e-12 * np.max(a.rho)
    assert np.max(np.abs(a.J.comps - b.J.comps)) <= 1e-10 * np.max(np.abs(a.J.comps))
    assert b.energy == pytest.approx(a.energy, rel=1e-10)
    assert b.charge == pytest.approx(a.charge, rel=1e-10, abs=1e-12)


def test_split_identities_plane_wave():
    g = Grid((16, 8, 1))
    c = Calculus(g)
    eps, a = 0.1, 1.3
    k = np.array([2 * np.pi * eps * 2, 2 * np.pi * eps, 0.0])
    lam = np.sqrt(1 + k @ k)
    wave = np.exp(1j * np.tensordot(k, g.coords(), axes=1) / eps)
    zv = np.zeros((3, *g.shape))
    s = kgm_init(a * wave, -1j * a * lam * wave, zv, zv, eps, c)
    r1, r2 = split_identity_residuals(s, c)
    assert np.max(np.abs(r1)) <= 1e-10 and np.max(np.abs(r2)) <= 1e-10


def test_split_identities_constant_exact():
    g = Grid((4, 4, 1))
    c = Calculus(g)
    zv = np.zeros((3, *g.shape))
    s = kgm_init(np.full(g.shape, 2.0 + 0j), np.zeros(g.shape, complex), zv, zv, 0.3, c)
    r1, r2 = split_identity_residuals(s, c)
    assert not np.any(r1) and not np.any(r2)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_split_identities_random_algebraic(seed):
    g = Grid((10, 8, 6))
    c = Calculus(g)
    s = random_kgm_state(g, np.random.default_rng(seed))
    r1, r2 = split_identity_residuals(s, c)
    assert np.max(np.abs(r1)) <= 1e-9 and np.max(np.abs(r2)) <= 1e-9


def test_split_identity_derivative_mode_converges():
    # derivative mode differentiates sqrt(rho) with fd2 and differences in
    # time; its residual shrinks at second order under joint refinement
    errs = []
    for n in (16, 32, 64):
        g = Grid((n, 1, 1))
        c = Calculus(g, "fd2")
        x = g.coords()[0]
        eps = 0.5
        phi0 = (1.2 + 0.3 * np.sin(2 * np.pi * x)) * np.exp(1j * 0.4 * np.cos(2 * np.pi * x))
        zv = np.zeros((3, *g.shape))
        s = kgm_init(phi0, 0.2 * phi0 * 1j, zv, zv, eps, c)
        dt = 0.2 / n
        prev = s
        mid = kgm_step(prev, dt, c, coupled=False)
        nxt = kgm_step(mid, dt, c, coupled=False)
        r1, _ = split_identity_residuals(mid, c, mode="derivative", previous=prev, following=nxt)
        errs.append(np.max(np.abs(r1)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.7)


def test_split_identity_errors():
    g = Grid((4, 1, 1))
    c = Calculus(g)
    zv = np.zeros((3, *g.shape))
    z = np.zeros(g.shape, complex)
    s = kgm_init(z, z, zv, zv, 0.1, c)
    with pytest.raises(ValueError, match="floor"):
        split_identity_residuals(s, c, rho_floor=1.0)
    s = kgm_init(z + 1, z, zv, zv, 0.1, c)
    with pytest.raises(ValueError, match="neighbouring"):
        split_identity_residuals(s, c, mode="derivative")
    with pytest.raises(ValueError, match="mode"):
        split_identity_residuals(s, c, mode="bogus")


def test_magnetic_energy_enters_with_half():
    g = Grid((16, 1, 1))
    c = Calculus(g)
    x = g.coords()[0]
    A = np.zeros((3, *g.shape))
    A[1] = np.sin(2 * np.pi * x) / (2 * np.pi)  # B_z = -d_x A_y = -cos
    z = np.zeros(g.shape, complex)
    s = kgm_init(z, z, A, as_vector((0, 0, 0), g), 0.1, c)
    assert kgm_observables(s, c).energy == pytest.approx(0.25, rel=1e-12)
    assert norm(c.curl(A), g) == pytest.approx(np.sqrt(0.5))
