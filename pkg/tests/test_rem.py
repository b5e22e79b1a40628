"""Relativistic Euler-Maxwell evolution and diagnostics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import brentq

from kgmlimit.fields import Calculus, Grid, as_vector, norm
from kgmlimit.kgm import StabilityError
from kgmlimit.manufactured import random_rem_state
from kgmlimit.rem import (CharacteristicsError, RemSolver, ShockMonitorError, characteristics_density,
                          elliptic_spectrum, momentum_residual, periodic_trilinear, rem_evolve, rem_init,
                          rem_observables, rem_step, wave_residual)


def _zeros(g):
    return np.zeros((3, *g.shape))


def _uniform(g, rho=1.3):
    z = _zeros(g)
    return rem_init(z, np.full(g.shape, rho), z, z, g)


def test_init_rejects_negative_density_and_nonfinite():
    g = Grid((4, 1, 1))
    z = _zeros(g)
    rho = np.ones(g.shape)
    rho[0] = -1e-3
    with pytest.raises(ValueError, match="negative"):
        rem_init(z, rho, z, z, g)
    rho[0] = -1e-14  # roundoff is tolerated
    rem_init(z, rho, z, z, g)
    bad = z.copy()
    bad[0, 0] = np.inf
    with pytest.raises(Exception):
        rem_init(bad, np.ones(g.shape), z, z, g)


def test_observables_at_rest():
    g = Grid((4, 3, 2), (1.0, 2.0, 0.5))
    o = rem_observables(_uniform(g, 2.0), Calculus(g))
    assert o.energy == pytest.approx(2.0 * g.volume)
    assert o.charge == pytest.approx(2.0 * g.volume)
    assert o.gauss_residual == 0 and o.divB_residual == 0
    assert np.allclose(o.J.comps[0], -2.0) and not np.any(o.J.comps[1:])


def test_observables_without_matter():
    g = Grid((8, 1, 1))
    E = as_vector((1.0, 2.0, 0.0), g)
    B = as_vector((0.0, 0.0, 2.0), g)
    o = rem_observables(rem_init(_zeros(g), np.zeros(g.shape), E, B, g), Calculus(g))
    assert not np.any(o.J.comps)
    assert o.energy == pytest.approx(0.5 * (5.0 + 4.0))


def test_injected_divb_violation_is_measured():
    g = Grid((32, 1, 1))
    B = _zeros(g)
    B[0] = np.cos(2 * np.pi * g.coords()[0])
    s = rem_init(_zeros(g), np.ones(g.shape), _zeros(g), B, g)
    assert rem_observables(s, Calculus(g)).divB_residual == pytest.approx(2 * np.pi * np.sqrt(0.5), rel=1e-12)


def test_static_uniform_unchanged():
    g = Grid((8, 8, 1))
    s0 = _uniform(g)
    traj = rem_evolve(s0, 0.5, 0.05, RemSolver(Calculus(g)), stride=10)
    assert np.max(np.abs(traj[-1].rho - s0.rho)) < 1e-13
    assert np.max(np.abs(traj[-1].u)) < 1e-13
    assert np.max(np.abs(traj[-1].E)) < 1e-13


def test_cfl_and_shock_monitor():
    g = Grid((16, 1, 1))
    solver = RemSolver(Calculus(g))
    with pytest.raises(StabilityError):
        rem_step(_uniform(g), 0.04, solver)
    u = _zeros(g)
    u[0] = 3.0 * np.sin(2 * np.pi * g.coords()[0])
    s = rem_init(u, np.ones(g.shape), _zeros(g), _zeros(g), g)
    with pytest.raises(ShockMonitorError) as info:
        rem_step(s, 0.01, solver)
    assert info.value.location[0] in (0, 15)  # steepest where sin'(2 pi x) peaks


def _burgers_exact(x, t, amp):
    """u(t, x) for u_t + (u / sqrt(1 + u^2)) u_x = 0, u(0, x) = amp sin(2 pi x)."""
    u0 = lambda y: amp * np.sin(2 * np.pi * y)  # noqa: E731
    out = np.empty_like(x)
    for n, xx in enumerate(x):
        def f(y):
            v = u0(y) / np.sqrt(1 + u0(y) ** 2)
            return y + v * t - xx
        y = brentq(f, xx - 1.0, xx + 1.0)
        out[n] = u0(y)
    return out


def test_vacuum_advection_matches_characteristics():
    # breaking time is 1/(2 pi amp) for small amplitudes, so T = 0.2 is smooth
    g = Grid((128, 1, 1))
    solver = RemSolver(Calculus(g), filter_strength=0.0)
    amp = 0.3
    x = g.coords()[0]
    u = _zeros(g)
    u[0] = amp * np.sin(2 * np.pi * x)
    s = rem_init(u, np.zeros(g.shape), _zeros(g), _zeros(g), g)
    s = rem_evolve(s, 0.2, 0.002, solver, stride=100)[-1]
    exact = _burgers_exact(x[:, 0, 0], 0.2, amp)
    assert np.max(np.abs(s.u[0, :, 0, 0] - exact)) < 1e-6


def test_vacuum_maxwell_plane_wave():
    errs = []
    for dt in (0.0125, 0.00625, 0.003125):
        g = Grid((32, 1, 1))
        x = g.coords()[0]
        E, B = _zeros(g), _zeros(g)
        E[1] = np.cos(2 * np.pi * x)
        B[2] = np.cos(2 * np.pi * x)
        s = rem_init(_zeros(g), np.zeros(g.shape), E, B, g)
        s = rem_evolve(s, 0.4, dt, RemSolver(Calculus(g), filter_strength=0.0), stride=1000)[-1]
        errs.append(norm(s.E[1] - np.cos(2 * np.pi * (x - 0.4)), g))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.7)


def test_upwind_keeps_density_nonnegative():
    g = Grid((64, 1, 1))
    x = g.coords()[0]
    u = _zeros(g)
    u[0] = 0.5 + 0.3 * np.sin(2 * np.pi * x)
    rho = np.where(np.abs(x - 0.5) < 0.1, 1.0, 0.0)  # compact support, sharp edges
    s = rem_init(u, rho, _zeros(g), _zeros(g), g)
    solver = RemSolver(Calculus(g), scheme="upwind", shock_threshold=10.0)
    for st_ in rem_evolve(s, 0.2, 0.005, solver):
        assert np.min(st_.rho) >= 0.0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_normalization_and_constraints_stay_at_roundoff(seed):
    g = Grid((16, 12, 1))
    rng = np.random.default_rng(seed)
    s = random_rem_state(g, rng)
    s = rem_init(0.05 * s.u, s.rho, s.E, s.B, g)
    c = Calculus(g)
    o0 = rem_observables(s, c)
    s1 = rem_evolve(s, 0.05, 0.01, RemSolver(c, filter_strength=0.0, shock_threshold=5.0))[-1]
    o1 = rem_observables(s1, c)
    assert o1.normalization_residual <= 1e-12
    # div commutes with the unfiltered spectral scheme; the filter would damp div B itself
    assert abs(o1.divB_residual - o0.divB_residual) <= 1e-10 * max(1.0, o0.divB_residual)


def test_elliptic_spectrum_examples():
    g = Grid((2, 1, 1))
    lam = elliptic_spectrum(_uniform(g))
    assert np.allclose(lam, 1.0, atol=1e-15)
    u = as_vector((1.0, 1.0, 1.0), g)  # |u| = sqrt 3 so U^0 = 2
    lam = elliptic_spectrum(rem_init(u, np.ones(g.shape), _zeros(g), _zeros(g), g))
    assert np.allclose(lam[:, 0, 0, 0], (1.0, 1.0, 0.25), atol=1e-14)


@settings(max_examples=30)
@given(arrays(np.float64, (3, 4, 3, 1), elements=st.floats(-10, 10, allow_nan=False)))
def test_elliptic_spectrum_random(u):
    g = Grid((4, 3, 1))
    lam = elliptic_spectrum(rem_init(u, np.ones(g.shape), _zeros(g), _zeros(g), g))
    U0sq = 1 + np.sum(u**2, axis=0)
    assert np.max(np.abs(lam[0] - 1)) <= 1e-12
    assert np.max(np.abs(lam[1] - 1)) <= 1e-12
    assert np.max(np.abs(lam[2] - 1 / U0sq)) <= 1e-12


def test_trilinear_exact_on_nodes_and_linear_between():
    g = Grid((4, 4, 1))
    f = np.arange(16.0).reshape(4, 4, 1)
    X = g.coords()
    assert np.array_equal(periodic_trilinear(f, X, g), f)
    mid = np.array([0.125, 0.0, 0.0]).reshape(3, 1)
    assert periodic_trilinear(f, mid, g)[0] == pytest.approx(0.5 * (f[0, 0, 0] + f[1, 0, 0]))
    wrap = np.array([0.875, 0.0, 0.0]).reshape(3, 1)  # between the last node and the first
    assert periodic_trilinear(f, wrap, g)[0] == pytest.approx(0.5 * (f[3, 0, 0] + f[0, 0, 0]))


def test_characteristics_static():
    g = Grid((8, 1, 1))
    s = _uniform(g, 0.7)
    solver = RemSolver(Calculus(g))
    traj = rem_evolve(s, 0.1, 0.01, solver)
    assert np.max(np.abs(characteristics_density(s, traj, solver) - 0.7)) < 1e-14


def test_characteristics_translation_converges():
    # the mean current drives a uniform E against the neutralizing
    # background, so the bump is not rigidly translated; the flow-line
    # reconstruction still has to agree with the PDE density. Trilinear
    # sampling is only second order once the displacement spans many cells.
    gaps = []
    for n in (128, 256, 512):
        g = Grid((n, 1, 1))
        x = g.coords()[0]
        rho = 1.0 + 0.5 * np.sin(2 * np.pi * x)
        s = rem_init(as_vector((0.6, 0, 0), g), rho, _zeros(g), _zeros(g), g)
        solver = RemSolver(Calculus(g), filter_strength=0.0)
        dt = 0.25 / n
        traj = rem_evolve(s, 0.25, dt, solver)
        rec = characteristics_density(s, traj, solver)
        gaps.append(norm(rec - traj[-1].rho, g, "L1"))
    orders = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    assert np.all(orders > 1.8)


def test_characteristics_compression():
    g = Grid((128, 1, 1))
    x = g.coords()[0]
    u = _zeros(g)
    u[0] = -0.2 * np.sin(2 * np.pi * x)
    s = rem_init(u, np.ones(g.shape), _zeros(g), _zeros(g), g)
    solver = RemSolver(Calculus(g), filter_strength=0.0)
    traj = rem_evolve(s, 0.2, 0.002, solver)
    rec = characteristics_density(s, traj, solver)
    assert norm(rec - traj[-1].rho, g, "L1") < 1e-3
    with pytest.raises(CharacteristicsError):
        characteristics_density(s, traj, solver, max_factor=1.01)


def test_wave_residual_static_and_plane_wave():
    g = Grid((8, 1, 1))
    c = Calculus(g)
    traj = rem_evolve(_uniform(g), 0.03, 0.01, RemSolver(c))
    assert wave_residual(traj, c) < 1e-12
    with pytest.raises(ValueError):
        wave_residual(traj[:2], c)
    res = []
    for dt in (0.0125, 0.00625, 0.003125):
        g = Grid((32, 1, 1))
        c = Calculus(g)
        x = g.coords()[0]
        E, B = _zeros(g), _zeros(g)
        E[1] = np.cos(2 * np.pi * x)
        B[2] = np.cos(2 * np.pi * x)
        traj = rem_evolve(rem_init(_zeros(g), np.zeros(g.shape), E, B, g), 2 * dt, dt,
                          RemSolver(c, filter_strength=0.0))
        res.append(wave_residual(traj, c))
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.8)


def test_momentum_residual_decays():
    res = []
    for dt in (0.006, 0.003, 0.0015):
        g = Grid((64, 1, 1))
        c = Calculus(g)
        x = g.coords()[0]
        u = _zeros(g)
        u[0] = 0.2 * np.sin(2 * np.pi * x)
        E = _zeros(g)
        E[1] = 0.3
        B = as_vector((0, 0, 0.5), g)
        s = rem_init(u, 1.0 + 0.2 * np.cos(2 * np.pi * x), E, B, g)
        traj = rem_evolve(s, 2 * dt, dt, RemSolver(c, filter_strength=0.0))
        res.append(momentum_residual(traj, c))
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.8)
