"""Relativistic pressureless Euler-Maxwell evolution and its diagnostics.

The fluid carries the spatial velocity u = (U^1, U^2, U^3); U^0 is always
derived as sqrt(1 + |u|^2) so the normalization U^a U_a = -1 holds by
construction. The evolved variables are the lab-frame charge n = rho U^0,
u, E and B::

    d_t n = -div(rho u)
    d_t u = -v . grad u + E + v x B,          v = u / U^0
    d_t E = curl B - rho u
    d_t B = -curl E

with Gauss div E = n - <n> (uniform neutralizing background at rest).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .fields import Calculus, Grid, GridError, integrate, norm
from .kgm import NonFiniteError, StabilityError
from .snapshot import Kind, Snapshot, pack_components, unpack_components
from .tensors import ETA, FourVectorField, faraday_pack

Scheme = Literal["spectral", "upwind"]


class ShockMonitorError(RuntimeError):
    """Velocity gradients became unresolved (pressureless shock formation)."""

    def __init__(self, t: float, location: tuple[int, ...], value: float) -> None:
        super().__init__(f"shock monitor tripped at t={t:.6g}, cell {location}: "
                         f"max|grad u|*dx = {value:.3g}")
        self.t = t
        self.location = location
        self.value = value


class CharacteristicsError(RuntimeError):
    """Flow-line reconstruction left its reliable range."""


@dataclass(frozen=True)
class RemState:
    u: np.ndarray
    rho: np.ndarray
    E: np.ndarray
    B: np.ndarray
    t: float = 0.0

    @property
    def U0(self) -> np.ndarray:
        return np.sqrt(1.0 + np.sum(self.u**2, axis=0))


@dataclass(frozen=True)
class RemObservables:
    J: FourVectorField
    energy: float
    charge: float
    gauss_residual: float
    divB_residual: float
    normalization_residual: float


@dataclass(frozen=True)
class RemSolver:
    """Spatial discretization options for :func:`rem_step`."""

    calc: Calculus
    scheme: Scheme = "spectral"
    filter_strength: float = 36.0
    filter_order: int = 36
    shock_threshold: float = 0.5
    c_cfl: float = 0.5

    @property
    def grid(self) -> Grid:
        return self.calc.grid

    def filter_symbol(self) -> np.ndarray | None:
        if self.scheme != "spectral" or self.filter_strength <= 0:
            return None
        sig = np.ones(self.grid.shape)
        for k, n, h in zip(self.grid.wavenumbers(), self.grid.shape, self.grid.spacings):
            if n > 1:
                sig = sig * np.exp(-self.filter_strength * (np.abs(k) * h / np.pi) ** self.filter_order)
        return sig


def rem_init(u0: np.ndarray, rho0: np.ndarray, E0: np.ndarray, B0: np.ndarray, grid: Grid,
             t: float = 0.0) -> RemState:
    grid.check(u0, 3)
    grid.check(rho0)
    grid.check(E0, 3)
    grid.check(B0, 3)
    for a in (u0, rho0, E0, B0):
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("initial data contains non-finite values")
    top = float(np.max(np.abs(rho0))) if rho0.size else 0.0
    if np.min(rho0) < -1e-12 * top:
        raise ValueError(f"negative density {np.min(rho0):.3e}")
    return RemState(u0.astype(float), rho0.astype(float), E0.astype(float), B0.astype(float), float(t))


def rem_current(state: RemState) -> FourVectorField:
    """Covariant J_a = rho U_a."""
    J = np.empty((4,) + state.rho.shape)
    J[0] = -(state.rho * state.U0)
    J[1:] = state.rho * state.u
    return FourVectorField(J, covariant=True)


def rem_observables(state: RemState, calc: Calculus) -> RemObservables:
    g = calc.grid
    U0 = state.U0
    n = state.rho * U0
    em = 0.5 * (np.sum(state.E**2, axis=0) + np.sum(state.B**2, axis=0))
    norm_res = np.abs(-(U0**2) + np.sum(state.u**2, axis=0) + 1.0)
    return RemObservables(
        J=rem_current(state),
        energy=integrate(n * U0 + em, g),
        charge=integrate(n, g),
        gauss_residual=norm(calc.divergence(state.E) - (n - np.mean(n)), g, "L2"),
        divB_residual=norm(calc.divergence(state.B), g, "L2"),
        normalization_residual=float(np.max(norm_res)) if norm_res.size else 0.0,
    )


def max_grad_u(u: np.ndarray, calc: Calculus) -> tuple[float, tuple[int, ...]]:
    """Largest cellwise Frobenius norm of grad u, scaled by the spacing."""
    J = calc.jacobian(u)
    g = np.sqrt(np.sum(J**2, axis=(0, 1))) * calc.grid.min_spacing
    idx = np.unravel_index(int(np.argmax(g)), g.shape)
    return float(g[idx]), tuple(int(i) for i in idx)


# right-hand sides -------------------------------------------------------------

def _upwind_div(flux_vel: np.ndarray, q: np.ndarray, grid: Grid) -> np.ndarray:
    """Conservative first-order upwind divergence of q * flux_vel."""
    out = np.zeros_like(q)
    for ax, (n, h) in enumerate(zip(grid.shape, grid.spacings)):
        if n == 1:
            continue
        w = flux_vel[ax]
        wf = 0.5 * (w + np.roll(w, -1, axis=ax))
        F = np.where(wf > 0, wf * q, wf * np.roll(q, -1, axis=ax))
        out += (F - np.roll(F, 1, axis=ax)) / h
    return out


def _upwind_advect(v: np.ndarray, q: np.ndarray, grid: Grid) -> np.ndarray:
    """First-order upwind v . grad q."""
    out = np.zeros_like(q)
    for ax, (n, h) in enumerate(zip(grid.shape, grid.spacings)):
        if n == 1:
            continue
        back = (q - np.roll(q, 1, axis=ax)) / h
        fwd = (np.roll(q, -1, axis=ax) - q) / h
        out += np.where(v[ax] > 0, v[ax] * back, v[ax] * fwd)
    return out


def rem_rhs(n: np.ndarray, u: np.ndarray, E: np.ndarray, B: np.ndarray,
            solver: RemSolver) -> tuple[np.ndarray, ...]:
    calc = solver.calc
    U0 = np.sqrt(1.0 + np.sum(u**2, axis=0))
    v = u / U0
    flux = n * v  # = rho u
    if solver.scheme == "upwind":
        dn = -_upwind_div(v, n, calc.grid)
        adv = np.stack([_upwind_advect(v, u[i], calc.grid) for i in range(3)])
    else:
        dn = -calc.divergence(flux)
        adv = np.stack([np.sum(v * calc.gradient(u[i]), axis=0) for i in range(3)])
    du = -adv + E + np.cross(v, B, axis=0)
    dE = calc.curl(B) - flux
    dB = -calc.curl(E)
    return dn, du, dE, dB


def velocity_time_derivative(state: RemState, solver: RemSolver) -> np.ndarray:
    """d_t u from the momentum equation at the given state."""
    n = state.rho * state.U0
    return rem_rhs(n, state.u, state.E, state.B, solver)[1]


def rem_step(state: RemState, dt: float, solver: RemSolver) -> RemState:
    """RK4 step (spectral) or SSP-RK3 step (upwind, positivity preserving)."""
    g = solver.grid
    if not 0 < dt <= solver.c_cfl * g.min_spacing * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.3e} exceeds {solver.c_cfl}*dx={solver.c_cfl * g.min_spacing:.3e}")
    val, loc = max_grad_u(state.u, solver.calc)
    if val > solver.shock_threshold:
        raise ShockMonitorError(state.t, loc, val)
    y = (state.rho * state.U0, state.u, state.E, state.B)

    def f(y: tuple[np.ndarray, ...]) -> tuple[np.ndarray, ...]:
        return rem_rhs(*y, solver)

    def axpy(a: float, x: tuple[np.ndarray, ...], y: tuple[np.ndarray, ...]) -> tuple[np.ndarray, ...]:
        return tuple(yi + a * xi for xi, yi in zip(x, y))

    if solver.scheme == "upwind":
        y1 = axpy(dt, f(y), y)
        y2 = tuple(0.75 * a + 0.25 * b for a, b in zip(y, axpy(dt, f(y1), y1)))
        y3 = axpy(dt, f(y2), y2)
        new = tuple(a / 3.0 + 2.0 * b / 3.0 for a, b in zip(y, y3))
    else:
        k1 = f(y)
        k2 = f(axpy(0.5 * dt, k1, y))
        k3 = f(axpy(0.5 * dt, k2, y))
        k4 = f(axpy(dt, k3, y))
        new = tuple(yi + dt / 6.0 * (a + 2 * b + 2 * c + d) for yi, a, b, c, d in zip(y, k1, k2, k3, k4))
        sig = solver.filter_symbol()
        if sig is not None:
            calc = solver.calc

            def filt(q: np.ndarray) -> np.ndarray:
                return calc.ifft(calc.fft(q) * sig, True)

            n_, u_, E_, B_ = new
            new = (filt(n_), np.stack([filt(c) for c in u_]), np.stack([filt(c) for c in E_]),
                   np.stack([filt(c) for c in B_]))
    n, u, E, B = new
    U0 = np.sqrt(1.0 + np.sum(u**2, axis=0))
    return RemState(u, n / U0, E, B, state.t + dt)


def rem_evolve(state: RemState, T: float, dt: float, solver: RemSolver, stride: int = 1) -> list[RemState]:
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    traj = [state]
    for k in range(1, nsteps + 1):
        state = rem_step(state, dt, solver)
        if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.rho))):
            raise NonFiniteError(f"non-finite values at step {k} (t={state.t:.6g})")
        if k % stride == 0 or k == nsteps:
            traj.append(state)
    return traj


# diagnostics ----------------------------------------------------------------------

def _uniform_spacing(traj: list[RemState]) -> float:
    ts = np.array([s.t for s in traj])
    h = np.diff(ts)
    if len(h) == 0 or not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("trajectory snapshots must be uniformly spaced")
    return float(h[0])


def periodic_trilinear(f: np.ndarray, pts: np.ndarray, grid: Grid) -> np.ndarray:
    """Interpolate the periodic field ``f`` at physical points ``pts`` (shape ``(3, ...)``)."""
    idx, wts = [], []
    for ax in range(3):
        n, h = grid.shape[ax], grid.spacings[ax]
        s = pts[ax] / h
        i0 = np.floor(s)
        fr = s - i0
        i0 = i0.astype(int) % n
        idx.append((i0, (i0 + 1) % n))
        wts.append((1.0 - fr, fr))
    out = np.zeros(pts.shape[1:])
    for a in range(2):
        for b in range(2):
            for c in range(2):
                out += wts[0][a] * wts[1][b] * wts[2][c] * f[idx[0][a], idx[1][b], idx[2][c]]
    return out


def _flow_fields(state: RemState, solver: RemSolver) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate velocity u/U^0 and (div_a U^a)/U^0 at one snapshot."""
    U0 = state.U0
    du = velocity_time_derivative(state, solver)
    dU0 = np.sum(state.u * du, axis=0) / U0
    divU = dU0 + solver.calc.divergence(state.u)
    return state.u / U0, divU / U0


def characteristics_density(state0: RemState, traj: list[RemState], solver: RemSolver,
                            max_factor: float = 1e3) -> np.ndarray:
    """Density at the final time rebuilt along flow lines.

    Each grid point at the final time is traced back along dx/dt = u/U^0 with
    RK4 (trilinear interpolation in space, linear in time between
    snapshots); along the way the proper-time integral of div_a U^a is
    accumulated, and rho(T, x) = rho(0, y) exp(-int div U dtau).
    """
    h = _uniform_spacing(traj)
    g = solver.grid
    fields = [_flow_fields(s, solver) for s in traj]
    L = np.array(g.extents).reshape(3, 1, 1, 1)

    def sample(k: int, frac: float, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if frac == 0.0:
            v, s = fields[k]
        else:
            v = (1 - frac) * fields[k][0] + frac * fields[k + 1][0]
            s = (1 - frac) * fields[k][1] + frac * fields[k + 1][1]
        Xw = np.mod(X, L)
        vel = np.stack([periodic_trilinear(v[i], Xw, g) for i in range(3)])
        return vel, periodic_trilinear(s, Xw, g)

    X = g.coords().astype(float)
    I = np.zeros(g.shape)
    for k in range(len(traj) - 1, 0, -1):
        # integrate backwards from t_k to t_{k-1}; stage times expressed on [k-1, k]
        v1, s1 = sample(k, 0.0, X)
        v2, s2 = sample(k - 1, 0.5, X - 0.5 * h * v1)
        v3, s3 = sample(k - 1, 0.5, X - 0.5 * h * v2)
        v4, s4 = sample(k - 1, 0.0, X - h * v3)
        X = X - h / 6.0 * (v1 + 2 * v2 + 2 * v3 + v4)
        I = I + h / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4)
    factor = np.exp(-I)
    if np.any(factor > max_factor) or np.any(factor < 1.0 / max_factor):
        raise CharacteristicsError(
            f"compression factor range [{factor.min():.3g}, {factor.max():.3g}] beyond {max_factor:g}")
    rho0 = periodic_trilinear(state0.rho, np.mod(X, L), g)
    return rho0 * factor


def _faraday(state: RemState) -> np.ndarray:
    return faraday_pack(state.E, state.B)


def wave_residual(traj: list[RemState], calc: Calculus) -> float:
    """L2 norm of box F_ab - (d_a J_b - d_b J_a) at the middle snapshot."""
    if len(traj) < 3:
        raise ValueError("wave residual needs at least 3 snapshots")
    h = _uniform_spacing(traj)
    m = len(traj) // 2
    Fp, Fm, Fn = (_faraday(traj[i]) for i in (m - 1, m, m + 1))
    Jp, Jm, Jn = (rem_current(traj[i]).comps for i in (m - 1, m, m + 1))
    dJ = np.empty((4,) + Jm.shape)
    dJ[0] = (Jn - Jp) / (2 * h)
    for i in range(3):
        dJ[1 + i] = np.stack([calc.derivative(Jm[b], i) for b in range(4)])
    total = 0.0
    for a in range(4):
        for b in range(a + 1, 4):
            lap = sum(calc.derivative(calc.derivative(Fm[a, b], i), i) for i in range(3))
            box = -(Fn[a, b] - 2 * Fm[a, b] + Fp[a, b]) / h**2 + lap
            r = box - (dJ[a][b] - dJ[b][a])
            total += 2 * norm(r, calc.grid, "L2") ** 2
    return float(np.sqrt(total))


def momentum_residual(traj: list[RemState], calc: Calculus) -> float:
    """L2 norm of U^a d_a U_b - F_ab U^a at the middle snapshot (all b)."""
    if len(traj) < 3:
        raise ValueError("momentum residual needs at least 3 snapshots")
    h = _uniform_spacing(traj)
    m = len(traj) // 2
    Ul = [np.concatenate([-traj[i].U0[None], traj[i].u]) for i in (m - 1, m, m + 1)]
    Uc = Ul[1] * ETA.reshape(4, 1, 1, 1)  # contravariant at the middle
    F = _faraday(traj[m])
    total = 0.0
    for b in range(4):
        adv = Uc[0] * (Ul[2][b] - Ul[0][b]) / (2 * h)
        for i in range(3):
            adv = adv + Uc[1 + i] * calc.derivative(Ul[1][b], i)
        force = np.sum(F[:, b] * Uc, axis=0)
        total += norm(adv - force, calc.grid, "L2") ** 2
    return float(np.sqrt(total))


def elliptic_spectrum(state: RemState) -> np.ndarray:
    """Eigenvalues of delta_ij - u_i u_j/(U^0)^2 per cell, sorted descending; shape ``(3, *grid)``."""
    u = state.u
    U0sq = 1.0 + np.sum(u**2, axis=0)
    uc = np.moveaxis(u, 0, -1)
    M = np.eye(3) - uc[..., :, None] * uc[..., None, :] / U0sq[..., None, None]
    w = np.linalg.eigvalsh(M)[..., ::-1]
    return np.moveaxis(w, -1, 0)


def to_snapshot(state: RemState, grid: Grid, name: str = "rem") -> Snapshot:
    comps = [*state.u, state.rho, *state.E, *state.B]
    return Snapshot(Kind.REM_STATE, grid, state.t, 0.0, name, pack_components(comps))


def from_snapshot(snap: Snapshot) -> RemState:
    if snap.kind != Kind.REM_STATE:
        raise GridError(f"snapshot kind {snap.kind.name} is not a rem state")
    c = unpack_components(snap.data)
    return RemState(np.stack(c[0:3]), c[3], np.stack(c[4:7]), np.stack(c[7:10]), snap.time)
