"""Semiclassical massive Klein-Gordon-Maxwell evolution in temporal gauge.

Unknowns: the complex field Phi, its momentum Pi = eps d_t Phi (equal to
D_0 Phi when A_0 = 0), the spatial potential A and the electric field E.
With F = dA and F_{0i} = E_i the evolution reads::

    eps d_t Phi = Pi
    eps d_t Pi  = sum_j D_j D_j Phi - Phi,       D_j = eps d_j + i A_j
    d_t A       = E
    d_t E       = curl B - J_space,              B = -curl A

and the Gauss constraint div E = J^0 - <J^0> is propagated, not imposed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .fields import Calculus, Grid, GridError, integrate, norm
from .snapshot import Kind, Snapshot, pack_components, unpack_components
from .tensors import FourVectorField, kgm_covariant_derivative

log = logging.getLogger(__name__)

C_CFL = 0.5
C_OSC = 0.2


class StabilityError(ValueError):
    """Time step violates a stability rule."""


class NonFiniteError(FloatingPointError):
    """Evolution produced NaN or infinite values."""


@dataclass(frozen=True)
class KgmState:
    phi: np.ndarray
    pi: np.ndarray
    A: np.ndarray
    E: np.ndarray
    eps: float
    t: float = 0.0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.phi.shape


@dataclass(frozen=True)
class KgmObservables:
    rho: np.ndarray
    J: FourVectorField
    energy: float
    charge: float
    gauss_residual: float


def kgm_init(phi0: np.ndarray, pi0: np.ndarray, A0: np.ndarray, E0: np.ndarray, eps: float,
             calc: Calculus, t: float = 0.0) -> KgmState:
    """Validate data and build a state. The Gauss residual is logged, not enforced."""
    g = calc.grid
    g.check(phi0)
    g.check(pi0)
    g.check(A0, 3)
    g.check(E0, 3)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    arrays = (phi0, pi0, A0, E0)
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NonFiniteError("initial data contains non-finite values")
    state = KgmState(phi0.astype(complex), pi0.astype(complex), A0.astype(float),
                     E0.astype(float), float(eps), float(t))
    log.debug("kgm_init: gauss residual %.3e", gauss_residual(state, calc))
    return state


def magnetic_field(state: KgmState, calc: Calculus) -> np.ndarray:
    return -calc.curl(state.A)


def covariant_derivative(state: KgmState, calc: Calculus) -> np.ndarray:
    """D_alpha Phi, shape ``(4, *grid)``."""
    return kgm_covariant_derivative(state.phi, state.pi, state.A, state.eps, calc)


def current(phi: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Covariant J_alpha = -Im(Phi conj(D_alpha Phi))."""
    return -np.imag(phi[None] * np.conj(D))


def charge_density(state: KgmState) -> np.ndarray:
    """J^0 = Im(Phi conj Pi)."""
    return np.imag(state.phi * np.conj(state.pi))


def gauss_residual(state: KgmState, calc: Calculus) -> float:
    n = charge_density(state)
    return norm(calc.divergence(state.E) - (n - np.mean(n)), calc.grid, "L2")


def kgm_observables(state: KgmState, calc: Calculus) -> KgmObservables:
    D = covariant_derivative(state, calc)
    J = current(state.phi, D)
    rho = np.abs(state.phi) ** 2
    B = magnetic_field(state, calc)
    dens = 0.5 * np.sum(np.abs(D) ** 2, axis=0) + 0.5 * rho + 0.5 * (
        np.sum(state.E**2, axis=0) + np.sum(B**2, axis=0))
    return KgmObservables(
        rho=rho,
        J=FourVectorField(J, covariant=True),
        energy=integrate(dens, calc.grid),
        charge=integrate(-J[0], calc.grid),
        gauss_residual=gauss_residual(state, calc),
    )


def _covariant_laplacian(phi: np.ndarray, A: np.ndarray, eps: float, calc: Calculus) -> np.ndarray:
    out = np.zeros_like(phi)
    for j in range(3):
        if calc.grid.shape[j] == 1:
            out += -(A[j] ** 2) * phi
            continue
        Dj = eps * calc.derivative(phi, j) + 1j * A[j] * phi
        out += eps * calc.derivative(Dj, j) + 1j * A[j] * Dj
    return out


def _spatial_current(phi: np.ndarray, A: np.ndarray, eps: float, calc: Calculus) -> np.ndarray:
    J = np.empty((3,) + phi.shape)
    for j in range(3):
        Dj = eps * calc.derivative(phi, j) + 1j * A[j] * phi
        J[j] = -np.imag(phi * np.conj(Dj))
    return J


def check_timestep(dt: float, eps: float, grid: Grid, c_cfl: float = C_CFL, c_osc: float = C_OSC) -> None:
    limit = min(c_cfl * grid.min_spacing, c_osc * eps)
    if not 0 < dt <= limit * (1 + 1e-12):
        raise StabilityError(
            f"dt={dt:.3e} violates dt <= min({c_cfl}*dx, {c_osc}*eps) = {limit:.3e}")


def kgm_step(state: KgmState, dt: float, calc: Calculus, coupled: bool = True,
             c_cfl: float = C_CFL, c_osc: float = C_OSC) -> KgmState:
    """One kick-drift-kick leapfrog step.

    Momenta (Pi, E) receive half kicks around a full drift of the positions
    (Phi, A), so the returned state is synchronized in time. Forces depend only on positions, so the map is symplectic and conserves
    the charge Im<Phi, Pi> exactly. With ``coupled=False`` A and E are frozen
    and only the Klein-Gordon part advances.
    """
    check_timestep(dt, state.eps, calc.grid, c_cfl, c_osc)
    eps = state.eps
    phi, pi, A, E = state.phi, state.pi, state.A, state.E

    def kicks(phi: np.ndarray, A: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        f_pi = (_covariant_laplacian(phi, A, eps, calc) - phi) / eps
        if not coupled:
            return f_pi, None
        f_E = -calc.curl(calc.curl(A)) - _spatial_current(phi, A, eps, calc)
        return f_pi, f_E

    f_pi, f_E = kicks(phi, A)
    pi = pi + 0.5 * dt * f_pi
    if coupled:
        E = E + 0.5 * dt * f_E
    phi = phi + dt * pi / eps
    if coupled:
        A = A + dt * E
    f_pi, f_E = kicks(phi, A)
    pi = pi + 0.5 * dt * f_pi
    if coupled:
        E = E + 0.5 * dt * f_E
    return KgmState(phi, pi, A, E, eps, state.t + dt)


def kgm_evolve(state: KgmState, T: float, dt: float, calc: Calculus, stride: int = 1,
               coupled: bool = True, **rules: float) -> list[KgmState]:
    """Trajectory sampled every ``stride`` steps, including both ends."""
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    traj = [state]
    for n in range(1, nsteps + 1):
        state = kgm_step(state, dt, calc, coupled, **rules)
        if not (np.all(np.isfinite(state.phi)) and np.all(np.isfinite(state.E))):
            raise NonFiniteError(f"non-finite values at step {n} (t={state.t:.6g})")
        if n % stride == 0 or n == nsteps:
            traj.append(state)
    return traj


def split_identity_residuals(state: KgmState, calc: Calculus, rho_floor: float | None = None,
                             mode: str = "algebraic", previous: KgmState | None = None,
                             following: KgmState | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise residuals of the two splitting identities.

    r1 = J^a J_a / rho - (-eps^2 d_a sqrt(rho) d^a sqrt(rho) + D_a Phi conj(D^a Phi))
    r2 = |J|^2 / rho - (-eps^2 |d sqrt(rho)|^2 + |D Phi|^2)   (Euclidean sums)

    In ``algebraic`` mode d sqrt(rho) = Re(conj(Phi) d Phi)/|Phi|, making both
    identities exact up to roundoff. In ``derivative`` mode the spatial
    gradient of sqrt(rho) is differentiated directly and its time slope is a
    centered difference of ``previous`` and ``following``. Residuals are
    normalised by the largest term and set to 0 on cells with rho below the
    floor (default 1e-12 max rho).
    """
    eps = state.eps
    D = covariant_derivative(state, calc)
    J = current(state.phi, D)
    rho = np.abs(state.phi) ** 2
    floor = 1e-12 * float(np.max(rho)) if rho_floor is None else rho_floor
    mask = rho >= floor
    if not np.any(mask):
        raise ValueError("all cells are below the density floor")
    mod = np.sqrt(rho)
    safe_mod = np.where(mask, mod, 1.0)
    dsq = np.empty((4,) + rho.shape)
    if mode == "algebraic":
        # eps * d_0 sqrt(rho) = Re(conj(Phi) Pi)/|Phi| since Pi = eps d_t Phi
        dsq[0] = np.real(np.conj(state.phi) * state.pi) / safe_mod / eps
        for i in range(3):
            dsq[1 + i] = np.real(np.conj(state.phi) * calc.derivative(state.phi, i)) / safe_mod
    elif mode == "derivative":
        if previous is None or following is None:
            raise ValueError("derivative mode needs neighbouring states for the time slope")
        dt2 = following.t - previous.t
        dsq[0] = (np.abs(following.phi) - np.abs(previous.phi)) / dt2
        for i in range(3):
            dsq[1 + i] = calc.derivative(mod, i)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    eta = np.array([-1.0, 1.0, 1.0, 1.0]).reshape(4, 1, 1, 1)
    safe_rho = np.where(mask, rho, 1.0)
    lhs1 = np.sum(eta * J**2, axis=0) / safe_rho
    rhs1 = -(eps**2) * np.sum(eta * dsq**2, axis=0) + np.sum(eta * np.abs(D) ** 2, axis=0)
    lhs2 = np.sum(J**2, axis=0) / safe_rho
    rhs2 = -(eps**2) * np.sum(dsq**2, axis=0) + np.sum(np.abs(D) ** 2, axis=0)
    scale = np.max(np.where(mask, lhs2 + eps**2 * np.sum(dsq**2, axis=0)
                            + np.sum(np.abs(D) ** 2, axis=0), 0.0))
    scale = scale if scale > 0 else 1.0
    r1 = np.where(mask, (lhs1 - rhs1) / scale, 0.0)
    r2 = np.where(mask, (lhs2 - rhs2) / scale, 0.0)
    return r1, r2


def with_gauge(state: KgmState, chi: np.ndarray, calc: Calculus) -> KgmState:
    """State after the time-independent gauge change chi."""
    from .tensors import gauge_transform

    phi, A = gauge_transform(state.phi, state.A, chi, calc, state.eps)
    pi = np.exp(-1j * chi / state.eps) * state.pi
    return replace(state, phi=phi, pi=pi, A=A)


def to_snapshot(state: KgmState, grid: Grid, name: str = "kgm") -> Snapshot:
    comps = [state.phi.real, state.phi.imag, state.pi.real, state.pi.imag,
             *state.A, *state.E]
    return Snapshot(Kind.KGM_STATE, grid, state.t, state.eps, name, pack_components(comps))


def from_snapshot(snap: Snapshot) -> KgmState:
    if snap.kind != Kind.KGM_STATE:
        raise GridError(f"snapshot kind {snap.kind.name} is not a kgm state")
    c = unpack_components(snap.data)
    return KgmState(_complex(c[0], c[1]), _complex(c[2], c[3]), np.stack(c[4:7]),
                    np.stack(c[7:10]), snap.eps, snap.time)


def _complex(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    z = np.empty(re.shape, dtype=complex)
    z.real = re
    z.imag = im
    return z
