"""Monokinetic WKB data: eikonal phases, matched initial pairs, residuals.

A matched pair shares A and E between the fluid state and every
semiclassical state, with Phi0 = exp(i omega/eps) sqrt(rho) and
Pi0 = exp(i omega/eps) (i U_0 sqrt(rho) + eps d_t sqrt(rho)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .fields import Calculus, Grid, as_vector, norm
from .kgm import KgmState, gauss_residual, kgm_init
from .rem import RemSolver, RemState, rem_init, rem_observables, velocity_time_derivative


class EikonalError(ValueError):
    """Velocity profile cannot be written as a snapped gradient plus potential."""


class ConstraintRepairError(ValueError):
    """Gauss repair did not reach its tolerance."""


# profiles ----------------------------------------------------------------------

def _profile_constant(grid: Grid, rho0: float = 1.0, velocity: Sequence[float] = (0, 0, 0),
                      **_: Any) -> tuple[np.ndarray, np.ndarray]:
    return as_vector(velocity, grid), np.full(grid.shape, float(rho0))


def _profile_sine_bump(grid: Grid, rho0: float = 1.0, amplitude: float = 0.5, mode: int = 1,
                       axis: int = 0, velocity: Sequence[float] = (0, 0, 0),
                       velocity_wave: float = 0.0, **_: Any) -> tuple[np.ndarray, np.ndarray]:
    """rho0 (1 + amplitude sin(k x)); ``velocity_wave`` adds a longitudinal u = w sin(k x)."""
    x = grid.coords()[axis]
    L = grid.extents[axis]
    wave = np.sin(2 * np.pi * mode * x / L)
    u = as_vector(velocity, grid)
    u[axis] = u[axis] + velocity_wave * wave
    return u, rho0 * (1.0 + amplitude * wave)


def _profile_gaussian(grid: Grid, rho0: float = 1.0, amplitude: float = 1.0, width: float = 0.1,
                      center: Sequence[float] | None = None, velocity: Sequence[float] = (0, 0, 0),
                      images: int = 2, **_: Any) -> tuple[np.ndarray, np.ndarray]:
    X = grid.coords()
    c = [0.5 * L for L in grid.extents] if center is None else list(center)
    bump = np.zeros(grid.shape)
    shifts = range(-images, images + 1)
    for sx in shifts:
        for sy in shifts:
            for sz in shifts:
                r2 = np.zeros(grid.shape)
                for ax, s in enumerate((sx, sy, sz)):
                    if grid.shape[ax] == 1:
                        if s:
                            break
                        continue
                    r2 += (X[ax] - c[ax] - s * grid.extents[ax]) ** 2
                else:
                    bump += np.exp(-r2 / (2 * width**2))
    return as_vector(velocity, grid), rho0 + amplitude * bump


PROFILES: dict[str, Callable[..., tuple[np.ndarray, np.ndarray]]] = {
    "constant": _profile_constant,
    "sine-bump": _profile_sine_bump,
    "gaussian-bump-periodicized": _profile_gaussian,
}


def profile(name: str, grid: Grid, **params: Any) -> tuple[np.ndarray, np.ndarray]:
    """Built-in (u, rho) profile by name."""
    try:
        fn = PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None
    return fn(grid, **params)


# phases -------------------------------------------------------------------------

@dataclass(frozen=True)
class Phase:
    """omega(t=0, x) = k . x + corr(x) and its time slope."""

    k: np.ndarray
    corr: np.ndarray
    omega_t: np.ndarray
    eps: float | None = None
    k_target: np.ndarray | None = None
    eikonal_residual: float = 0.0

    def spatial(self, grid: Grid) -> np.ndarray:
        X = grid.coords()
        return np.tensordot(self.k, X, axes=1) + self.corr


def snap_wavevector(k: np.ndarray, eps: float, grid: Grid) -> np.ndarray:
    """Nearest k with exp(i k.x/eps) periodic on the box."""
    L = np.array(grid.extents)
    q = 2 * np.pi * eps / L
    return np.round(np.asarray(k) / q) * q


def eikonal_phase(u: np.ndarray, A: np.ndarray, calc: Calculus, eps: float | None = None,
                  snap_tol: float = 1e-9, curl_tol: float = 1e-8) -> Phase:
    """Phase whose gradient is u - A and whose time slope is -U^0."""
    g = calc.grid
    v = u - A
    k = np.array([float(np.mean(v[i])) for i in range(3)])
    scale = max(1.0, norm(v, g, "Linf"))
    c = norm(calc.curl(v), g, "Linf")
    if c > curl_tol * scale:
        raise EikonalError(f"u - A is not a gradient: max|curl| = {c:.3e}")
    k_s = k if eps is None else snap_wavevector(k, eps, g)
    if np.max(np.abs(k_s - k)) > snap_tol:
        raise EikonalError(f"snapping k={k} to the eps={eps} lattice moves it to {k_s} "
                           f"(change {np.max(np.abs(k_s - k)):.3e} > tol {snap_tol:.1e})")
    corr = calc.gradient_potential(calc.divergence(v))
    Us = k_s.reshape(3, 1, 1, 1) + calc.gradient(corr) + A
    U0 = np.sqrt(1.0 + np.sum(Us**2, axis=0))
    res = float(np.max(np.abs(-(U0**2) + np.sum(Us**2, axis=0) + 1.0)))
    return Phase(k_s, corr, -U0, eps, k, res)


# Gauss repair ----------------------------------------------------------------------

def constraint_repair(E_guess: np.ndarray, charge: np.ndarray, calc: Calculus,
                      rtol: float = 1e-9) -> np.ndarray:
    """Keep the divergence-free part of ``E_guess`` and solve Gauss for the rest."""
    _, div_free = calc.helmholtz_decompose(E_guess)
    s = charge - np.mean(charge)
    E = div_free + calc.gradient(calc.gradient_potential(s))
    res = norm(calc.divergence(E) - s, calc.grid, "L2")
    ref = max(norm(s, calc.grid, "L2"), norm(E, calc.grid, "L2"), np.finfo(float).tiny)
    if res > rtol * ref:
        raise ConstraintRepairError(f"Gauss residual {res:.3e} after repair (relative {res / ref:.3e})")
    return E


def vector_potential_from_B(B: np.ndarray, calc: Calculus) -> np.ndarray:
    """A with -curl A = B for a zero-mean divergence-free B."""
    W = np.stack([calc.poisson_solve(B[i]) for i in range(3)])
    return calc.curl(W)


# matched pairs -----------------------------------------------------------------------

@dataclass(frozen=True)
class PreparationRow:
    eps: float
    H0: float
    H0_over_eps2: float
    gauss_kgm: float
    gauss_rem: float
    dist_sqrtrho_L2: float
    k: tuple[float, float, float]


@dataclass
class MatchedPair:
    rem_data: RemState
    kgm_data_family: list[tuple[float, KgmState]]
    preparation_report: list[PreparationRow] = field(default_factory=list)


def sqrt_rho_time_slope(state: RemState, solver: RemSolver) -> np.ndarray:
    """d_t sqrt(rho) at t=0 from the amplitude transport equation.

    2 U^a d_a Psi + (d_a U^a) Psi = 0 with Psi = sqrt(rho), solved for d_t Psi;
    d_t U^0 comes from the momentum equation.
    """
    calc = solver.calc
    U0 = state.U0
    psi = np.sqrt(np.maximum(state.rho, 0.0))
    du = velocity_time_derivative(state, solver)
    dU0 = np.sum(state.u * du, axis=0) / U0
    divU = dU0 + calc.divergence(state.u)
    adv = np.sum(state.u * calc.gradient(psi), axis=0)
    return (-adv - 0.5 * divU * psi) / U0


def make_matched_pair(u: np.ndarray, rho: np.ndarray, eps_list: Sequence[float], calc: Calculus,
                      A: np.ndarray | None = None, B: np.ndarray | None = None,
                      E_guess: np.ndarray | None = None, snap_tol: float = 1e-9) -> MatchedPair:
    """Well-prepared fluid data and one semiclassical state per eps."""
    from .modenergy import modulated_energy_report

    g = calc.grid
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f"eps list must be strictly decreasing, got {eps_list}")
    if np.min(rho) < 0:
        raise ValueError("density profile must be non-negative")
    zeros = np.zeros((3, *g.shape))
    if B is None:
        B = zeros if A is None else -calc.curl(A)
    if A is None:
        A = vector_potential_from_B(B, calc) if np.any(B) else zeros
    if norm(-calc.curl(A) - B, g, "Linf") > 1e-10 * max(1.0, norm(B, g, "Linf")):
        raise ValueError("supplied A and B are inconsistent (B must equal -curl A)")
    U0 = np.sqrt(1.0 + np.sum(u**2, axis=0))
    E = constraint_repair(zeros if E_guess is None else E_guess, rho * U0, calc)
    rem_data = rem_init(u, rho, E, B, g)
    solver = RemSolver(calc, filter_strength=0.0)
    psi = np.sqrt(rho)
    dpsi = sqrt_rho_time_slope(rem_data, solver)
    pair = MatchedPair(rem_data, [])
    gauss_rem = rem_observables(rem_data, calc).gauss_residual
    for eps in eps_list:
        ph = eikonal_phase(u, A, calc, eps, snap_tol=snap_tol)
        wave = np.exp(1j * ph.spatial(g) / eps)
        phi0 = wave * psi
        pi0 = wave * (1j * ph.omega_t * psi + eps * dpsi)
        st = kgm_init(phi0, pi0, A.copy(), E.copy(), eps, calc)
        rep = modulated_energy_report(st, rem_data, calc)
        pair.kgm_data_family.append((eps, st))
        pair.preparation_report.append(PreparationRow(
            eps=eps, H0=rep.H0, H0_over_eps2=rep.H0 / eps**2, gauss_kgm=gauss_residual(st, calc),
            gauss_rem=gauss_rem, dist_sqrtrho_L2=rep.dist_sqrtrho_L2, k=tuple(float(x) for x in ph.k)))
    return pair


# residuals of the semiclassical equations on a WKB ansatz -------------------------

@dataclass(frozen=True)
class WkbAnsatz:
    """Phase, amplitude and potential at t = 0, with the time slopes they need.

    The phase is omega = phase.k . x + phase.corr with d_t omega = phase.omega_t
    and d_tt omega = omega_tt; the potential is in temporal gauge with
    d_t A = E. Time derivatives of Psi and E default to zero (stationary).
    """

    phase: Phase
    psi: np.ndarray
    A: np.ndarray
    E: np.ndarray
    psi_t: np.ndarray | None = None
    psi_tt: np.ndarray | None = None
    omega_tt: np.ndarray | None = None
    E_t: np.ndarray | None = None


def _envelope_derivatives(ans: WkbAnsatz, eps: float, calc: Calculus) -> tuple[np.ndarray, np.ndarray]:
    """Covariant derivatives of the envelope: D_a Phi = exp(i omega/eps) * out[a]."""
    psi = ans.psi
    z = np.zeros_like(psi)
    psi_t = z if ans.psi_t is None else ans.psi_t
    psi_tt = z if ans.psi_tt is None else ans.psi_tt
    om_tt = np.zeros(psi.shape) if ans.omega_tt is None else ans.omega_tt
    U = np.empty((4,) + psi.shape)
    U[0] = ans.phase.omega_t
    U[1:] = ans.phase.k.reshape(3, 1, 1, 1) + calc.gradient(ans.phase.corr) + ans.A
    D = np.empty((4,) + psi.shape, dtype=complex)
    DD = np.empty((4,) + psi.shape, dtype=complex)
    D[0] = 1j * U[0] * psi + eps * psi_t
    DD[0] = 1j * U[0] * D[0] + eps * (1j * om_tt * psi + 1j * U[0] * psi_t + eps * psi_tt)
    for j in range(3):
        D[1 + j] = 1j * U[1 + j] * psi + eps * calc.derivative(psi, j)
        DD[1 + j] = 1j * U[1 + j] * D[1 + j] + eps * calc.derivative(D[1 + j], j)
    return D, DD


def wkb_residual(ans: WkbAnsatz, eps: float, calc: Calculus, coupled: bool = True) -> tuple[float, float]:
    """(maxwell_res, kg_res): L2 residuals of the semiclassical system on exp(i omega/eps) Psi.

    The Maxwell source is the exact semiclassical current of the ansatz with
    the neutralizing background removed from the charge. ``coupled=False``
    skips Maxwell and returns NaN for it.
    """
    g = calc.grid
    D, DD = _envelope_derivatives(ans, eps, calc)
    kg = -DD[0] + DD[1] + DD[2] + DD[3] - ans.psi
    kg_res = norm(kg, g, "L2")
    if not coupled:
        return float("nan"), kg_res
    J = -np.imag(ans.psi[None] * np.conj(D))  # covariant
    n = -J[0]
    B = -calc.curl(ans.A)
    E_t = np.zeros_like(ans.E) if ans.E_t is None else ans.E_t
    r0 = calc.divergence(ans.E) - (n - np.mean(n))
    rs = -E_t + calc.curl(B) - J[1:]
    mx = np.sqrt(norm(r0, g, "L2") ** 2 + norm(rs, g, "L2") ** 2)
    return float(mx), kg_res


def rest_frame_ansatz(calc: Calculus, amplitude: float, theta: np.ndarray) -> WkbAnsatz:
    """Psi = amplitude * exp(i theta(x)) at rest with zero fields.

    Uniform |Psi| makes the background-subtracted charge vanish, so F = 0
    solves the leading-order Maxwell system exactly, the phase -t solves
    the eikonal equation and a static Psi solves the transport equation.
    """
    g = calc.grid
    ph = Phase(np.zeros(3), np.zeros(g.shape), -np.ones(g.shape))
    zeros = np.zeros((3, *g.shape))
    return WkbAnsatz(ph, amplitude * np.exp(1j * theta), zeros, zeros)


def plane_wave_ansatz(calc: Calculus, k: Sequence[float], psi: np.ndarray) -> WkbAnsatz:
    """Free plane phase k.x - lambda t carrying an amplitude advected at k/lambda."""
    g = calc.grid
    k = np.asarray(k, dtype=float)
    lam = float(np.sqrt(1.0 + k @ k))
    v = k / lam
    adv = lambda f: sum(v[i] * calc.derivative(f, i) for i in range(3))  # noqa: E731
    psi_t = -adv(psi)
    psi_tt = adv(adv(psi))
    ph = Phase(k, np.zeros(g.shape), np.full(g.shape, -lam))
    zeros = np.zeros((3, *g.shape))
    return WkbAnsatz(ph, psi.astype(complex), zeros, zeros, psi_t, psi_tt)
