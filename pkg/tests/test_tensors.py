"""Index gymnastics, Faraday packing, stress-energy tensors and gauge changes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kgmlimit.fields import Calculus, Grid, GridError, norm
from kgmlimit.manufactured import smooth_field, smooth_vector
from kgmlimit.tensors import (FourVectorField, StressTensorField, contract, divergence_residual,
                              em_stress, faraday_pack, faraday_scalar, faraday_unpack, four_velocity,
                              gauge_transform, mixed_em_stress, raise_lower, stress_energy_kgm,
                              stress_energy_rem)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
vec3 = arrays(np.float64, (3, 2, 1, 1), elements=finite)
vec4 = arrays(np.float64, (4, 3, 1, 1), elements=finite)


@given(vec4, st.booleans())
def test_raise_lower_is_involution(c, cov):
    v = FourVectorField(c, cov)
    w = raise_lower(raise_lower(v))
    assert w.covariant == cov
    assert w.comps.tobytes() == c.tobytes()


def test_contract_minkowski():
    U = four_velocity(np.array([3.0, 0.0, 4.0]).reshape(3, 1, 1, 1))
    assert contract(U, raise_lower(U)).item() == pytest.approx(-1.0)
    assert contract(U, U).item() == pytest.approx(-1.0)


@given(vec3, vec3)
def test_faraday_roundtrip_and_antisymmetry(E, B):
    F = faraday_pack(E, B)
    assert np.array_equal(F, -np.swapaxes(F, 0, 1))
    back = faraday_unpack(F)
    assert back.E.tobytes() == E.tobytes()
    assert back.B.tobytes() == B.tobytes()


def test_faraday_components_and_scalar():
    one = np.ones((1, 1, 1))
    z = np.zeros((3, 1, 1, 1))
    E = z.copy()
    E[0] = one
    assert faraday_scalar(faraday_pack(E, z)).item() == pytest.approx(-2.0)
    B = z.copy()
    B[2] = one
    F = faraday_pack(z, B)
    assert F[1, 2].item() == -1.0 and F[2, 1].item() == 1.0
    assert faraday_scalar(F).item() == pytest.approx(2.0)


def test_faraday_pack_shape_mismatch():
    with pytest.raises(GridError):
        faraday_pack(np.zeros((3, 2, 1, 1)), np.zeros((3, 1, 1, 1)))


def test_em_energy_density():
    E = np.array([1.0, 0, 0]).reshape(3, 1, 1, 1)
    B = np.array([0, 1.0, 0]).reshape(3, 1, 1, 1)
    T = em_stress(faraday_pack(E, B))
    assert T[0, 0].item() == pytest.approx(1.0)
    # Poynting flux -T_0i = (E x B)_i up to the sign of the lowered time index
    assert np.allclose(T[0, 1:].ravel(), [0, 0, -1.0])
    assert np.trace(T * np.array([-1, 1, 1, 1.0]).reshape(4, 1, 1, 1, 1)).item() == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=30)
@given(vec3, vec3, vec3, vec3)
def test_mixed_stress_is_polarization(E1, B1, E2, B2):
    F, G = faraday_pack(E1, B1), faraday_pack(E2, B2)
    lhs = em_stress(F + G)
    rhs = em_stress(F) + mixed_em_stress(F, G) + em_stress(G)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (1 + np.max(np.abs(lhs))))


def test_stress_tensor_storage_roundtrip():
    rng = np.random.default_rng(0)
    T = rng.normal(size=(4, 4, 2, 1, 1))
    T = T + np.swapaxes(T, 0, 1)
    S = StressTensorField.from_full(T)
    assert S.comps.shape[0] == 10
    assert np.array_equal(S.full(), T)
    assert np.array_equal(S.component(3, 1), T[1, 3])
    assert np.array_equal((S + S - S).comps, S.comps)


def test_vacuum_stress_is_zero():
    g = Grid((4, 4, 4))
    c = Calculus(g)
    z = np.zeros(g.shape, dtype=complex)
    zv = np.zeros((3, *g.shape))
    assert np.all(stress_energy_kgm(z, z, zv, zv, 0.1, c).comps == 0)
    assert np.all(stress_energy_rem(zv, np.zeros(g.shape), zv, zv).comps == 0)


def test_rem_stress_at_rest():
    g = Grid((2, 1, 1))
    zv = np.zeros((3, *g.shape))
    T = stress_energy_rem(zv, np.full(g.shape, 2.5), zv, zv)
    assert np.allclose(T.component(0, 0), 2.5)
    assert np.allclose(T.component(0, 1), 0.0)


def test_gauge_zero_and_constant():
    g = Grid((6, 5, 4))
    c = Calculus(g)
    rng = np.random.default_rng(2)
    phi = rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)
    A = rng.normal(size=(3, *g.shape))
    p0, A0 = gauge_transform(phi, A, np.zeros(g.shape), c)
    assert np.array_equal(p0, phi) and np.array_equal(A0, A)
    p1, A1 = gauge_transform(phi, A, np.full(g.shape, 0.7), c)
    assert np.allclose(A1, A, atol=1e-14)
    assert np.allclose(p1, np.exp(-0.7j) * phi)
    assert np.allclose(np.abs(p1), np.abs(phi), rtol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(("spectral", "fd2", "fd4")))
def test_gauge_preserves_curl(seed, backend):
    g = Grid((10, 8, 6))
    c = Calculus(g, backend)
    rng = np.random.default_rng(seed)
    A = smooth_vector(g, rng)
    chi = smooth_field(g, rng)
    _, A1 = gauge_transform(np.ones(g.shape, complex), A, chi, c)
    assert norm(c.curl(A1) - c.curl(A), g, "Linf") < 1e-10


def test_divergence_residual_needs_three_snapshots():
    g = Grid((4, 1, 1))
    S = StressTensorField(np.zeros((10, *g.shape)))
    with pytest.raises(ValueError):
        divergence_residual([S, S], 0.1, Calculus(g))


def test_divergence_residual_static_fields():
    # uniform static fields are an exact solution; a static magnetic sine
    # wave is not, and its divergence is -d_x (B^2/2) in the x component
    g = Grid((32, 1, 1))
    c = Calculus(g)
    zv = np.zeros((3, *g.shape))
    E = zv.copy()
    E[0] = 1.0
    T = stress_energy_rem(zv, np.ones(g.shape), E, zv)
    r = divergence_residual([T, T, T], 0.01, c)
    assert np.max(np.abs(r.comps)) < 1e-13
    B = zv.copy()
    x = g.coords()[0]
    B[2] = np.sin(2 * np.pi * x)
    T = stress_energy_rem(zv, np.zeros(g.shape), zv, B)
    r = divergence_residual([T, T, T], 0.01, c)
    expected = 2 * np.pi * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * x)
    assert np.max(np.abs(r.comps[1] - expected)) < 1e-12
