"""Minkowski tensor algebra on lattice fields.

Signature (-, +, +, +) with c = 1. Tensors are stored with their spacetime
indices leading, e.g. a covariant four-vector field has shape
``(4, Nx, Ny, Nz)`` and a rank-2 field has shape ``(4, 4, Nx, Ny, Nz)``.

The Faraday tensor uses F_{0i} = E_i and F_{ij} = -eps_{ijk} B_k, so that
F_{mu nu} F^{mu nu} = 2|B|^2 - 2|E|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Calculus, GridError

ETA = np.array([-1.0, 1.0, 1.0, 1.0])
"""Diagonal of the Minkowski metric (equal to its inverse)."""

_PAIRS = [(a, b) for a in range(4) for b in range(a, 4)]


def _eta(ndim: int) -> np.ndarray:
    return ETA.reshape((4,) + (1,) * ndim)


@dataclass(frozen=True)
class FourVectorField:
    """Time component ``comps[0]``, space components ``comps[1:]``."""

    comps: np.ndarray
    covariant: bool

    @property
    def time(self) -> np.ndarray:
        return self.comps[0]

    @property
    def space(self) -> np.ndarray:
        return self.comps[1:]

    @classmethod
    def from_parts(cls, time: np.ndarray, space: np.ndarray, covariant: bool) -> "FourVectorField":
        return cls(np.concatenate([time[None], space]), covariant)


def raise_lower(v: FourVectorField) -> FourVectorField:
    """Apply the metric: negate the time component and flip the index flag."""
    comps = v.comps.copy()
    comps[0] = -comps[0]
    return FourVectorField(comps, not v.covariant)


def contract(a: FourVectorField, b: FourVectorField) -> np.ndarray:
    """Cellwise a^alpha b_alpha; both arguments may be in either position."""
    if a.covariant != b.covariant:
        return np.sum(a.comps * b.comps, axis=0)
    return np.sum(_eta(a.comps.ndim - 1) * a.comps * b.comps, axis=0)


# Faraday tensor --------------------------------------------------------------

@dataclass(frozen=True)
class FaradayField:
    E: np.ndarray
    B: np.ndarray

    def pack(self) -> np.ndarray:
        return faraday_pack(self.E, self.B)


def faraday_pack(E: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Covariant F_{alpha beta}, shape ``(4, 4, *grid)``."""
    if E.shape != B.shape or E.shape[0] != 3:
        raise GridError(f"E {E.shape} and B {B.shape} must be matching 3-vector fields")
    F = np.zeros((4, 4) + E.shape[1:], dtype=E.dtype)
    for i in range(3):
        F[0, 1 + i] = E[i]
        F[1 + i, 0] = -E[i]
    F[1, 2], F[2, 1] = -B[2], B[2]
    F[1, 3], F[3, 1] = B[1], -B[1]
    F[2, 3], F[3, 2] = -B[0], B[0]
    return F


def faraday_unpack(F: np.ndarray) -> FaradayField:
    E = np.stack([F[0, 1], F[0, 2], F[0, 3]])
    B = np.stack([F[3, 2], F[1, 3], F[2, 1]])
    return FaradayField(E, B)


def raise_both(T: np.ndarray) -> np.ndarray:
    """Raise (or lower) both indices of a rank-2 tensor."""
    nd = T.ndim - 2
    e = ETA.reshape((4,) + (1,) * nd)
    return T * e[:, None] * e[None, :]


def faraday_scalar(F: np.ndarray) -> np.ndarray:
    """F_{mu nu} F^{mu nu}."""
    return np.sum(F * raise_both(F), axis=(0, 1))


def em_stress(F: np.ndarray) -> np.ndarray:
    """F_{alpha mu} F_beta^mu - 1/4 g_{alpha beta} F^2, full ``(4, 4, ...)`` array."""
    nd = F.ndim - 2
    e = ETA.reshape((4,) + (1,) * nd)
    T = np.einsum("am...,bm...,m...->ab...", F, F, np.broadcast_to(e, F.shape[1:]))
    q = 0.25 * faraday_scalar(F)
    for a in range(4):
        T[a, a] -= ETA[a] * q
    return T


def mixed_em_stress(F: np.ndarray, G: np.ndarray) -> np.ndarray:
    """F_{alpha mu} G_beta^mu + G_{alpha mu} F_beta^mu - 1/2 g F_{mu nu} G^{mu nu}.

    The bilinear polarization of :func:`em_stress`: em_stress(F + G) =
    em_stress(F) + mixed_em_stress(F, G) + em_stress(G).
    """
    nd = F.ndim - 2
    e = np.broadcast_to(ETA.reshape((4,) + (1,) * nd), F.shape[1:])
    T = np.einsum("am...,bm...,m...->ab...", F, G, e)
    T = T + np.einsum("am...,bm...,m...->ab...", G, F, e)
    q = 0.5 * np.sum(F * raise_both(G), axis=(0, 1))
    for a in range(4):
        T[a, a] -= ETA[a] * q
    return T


# symmetric rank-2 storage -------------------------------------------------

@dataclass(frozen=True)
class StressTensorField:
    """Ten independent components of a symmetric rank-2 covariant tensor."""

    comps: np.ndarray

    @classmethod
    def from_full(cls, T: np.ndarray) -> "StressTensorField":
        return cls(np.stack([T[a, b] for a, b in _PAIRS]))

    def full(self) -> np.ndarray:
        T = np.empty((4, 4) + self.comps.shape[1:], dtype=self.comps.dtype)
        for n, (a, b) in enumerate(_PAIRS):
            T[a, b] = self.comps[n]
            T[b, a] = self.comps[n]
        return T

    def component(self, a: int, b: int) -> np.ndarray:
        if a > b:
            a, b = b, a
        return self.comps[_PAIRS.index((a, b))]

    def __add__(self, other: "StressTensorField") -> "StressTensorField":
        return StressTensorField(self.comps + other.comps)

    def __sub__(self, other: "StressTensorField") -> "StressTensorField":
        return StressTensorField(self.comps - other.comps)


# gauge ---------------------------------------------------------------------

def gauge_transform(
    phi: np.ndarray, A: np.ndarray, chi: np.ndarray, calc: Calculus, eps: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """A' = A + grad chi, Phi' = exp(-i chi / eps) Phi.

    With the covariant derivative eps*d + iA the phase must carry 1/eps;
    ``eps = 1`` gives the unscaled transformation.
    """
    calc.grid.check(chi)
    return np.exp(-1j * chi / eps) * phi, A + calc.gradient(chi)


# stress-energy tensors -------------------------------------------------------

def kgm_covariant_derivative(phi: np.ndarray, pi: np.ndarray, A: np.ndarray, eps: float,
                             calc: Calculus) -> np.ndarray:
    """D_alpha Phi in temporal gauge: (Pi, eps d_i Phi + i A_i Phi)."""
    D = np.empty((4,) + phi.shape, dtype=complex)
    D[0] = pi
    for i in range(3):
        D[1 + i] = eps * calc.derivative(phi, i) + 1j * A[i] * phi
    return D


def matter_stress(D: np.ndarray, mass_density: np.ndarray) -> np.ndarray:
    """Re(D_a conj D_b) - 1/2 g_ab (conj(D_c) D^c + mass_density)."""
    T = np.real(D[:, None] * np.conj(D[None, :]))
    nd = D.ndim - 1
    lag = np.sum(_eta(nd) * np.abs(D) ** 2, axis=0) + mass_density
    for a in range(4):
        T[a, a] -= 0.5 * ETA[a] * lag
    return T


def stress_energy_kgm(phi: np.ndarray, pi: np.ndarray, A: np.ndarray, E: np.ndarray, eps: float,
                      calc: Calculus) -> StressTensorField:
    D = kgm_covariant_derivative(phi, pi, A, eps, calc)
    B = -calc.curl(A)
    T = matter_stress(D, np.abs(phi) ** 2) + em_stress(faraday_pack(E, B))
    return StressTensorField.from_full(T)


def four_velocity(u: np.ndarray) -> FourVectorField:
    """Covariant U_alpha = (-U^0, u) with U^0 = sqrt(1 + |u|^2)."""
    U0 = np.sqrt(1.0 + np.sum(u**2, axis=0))
    return FourVectorField.from_parts(-U0, u, covariant=True)


def stress_energy_rem(u: np.ndarray, rho: np.ndarray, E: np.ndarray, B: np.ndarray) -> StressTensorField:
    Ul = four_velocity(u).comps
    T = rho * Ul[:, None] * Ul[None, :] + em_stress(faraday_pack(E, B))
    return StressTensorField.from_full(T)


def divergence_residual(tensors: list[StressTensorField], dt: float, calc: Calculus,
                        source: np.ndarray | None = None) -> FourVectorField:
    """Centered-difference d_alpha T^alpha_beta at the middle snapshot.

    ``source`` (covariant, shape ``(4, *grid)``) is subtracted when the
    divergence is not expected to vanish, e.g. the force exerted by a
    neutralizing background.
    """
    if len(tensors) < 3:
        raise ValueError("divergence residual needs at least 3 snapshots")
    m = len(tensors) // 2
    prev, mid, nxt = tensors[m - 1].full(), tensors[m].full(), tensors[m + 1].full()
    # T^0_beta = -T_{0 beta}
    out = -(nxt[0] - prev[0]) / (2 * dt)
    for i in range(3):
        out = out + np.stack([calc.derivative(mid[1 + i, b], i) for b in range(4)])
    if source is not None:
        out = out - source
    return FourVectorField(out, covariant=True)
