"""Modulated stress-energy between a semiclassical state and a fluid state.

xi_a = (D_a - i U_a) Phi and Xi = F_eps - F measure the mismatch. The
modulated tensor

    h_ab = Re(xi_a conj xi_b) - 1/2 g_ab xi_c conj xi^c + Xi_am Xi_b^m - 1/4 g_ab Xi^2

and the remainder I_ab add up to T_kgm - T_rem. The modulated energy in the
frame of X is the integral of h_a0 X^a; for X = d_t it reduces to
H0 = int 1/2 |xi|^2 + 1/2 (|E_eps - E|^2 + |B_eps - B|^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Calculus, Grid, integrate, norm
from .kgm import KgmState, covariant_derivative, current
from .rem import RemSolver, RemState, rem_current, velocity_time_derivative
from .tensors import (ETA, FaradayField, FourVectorField, StressTensorField, em_stress,
                      faraday_pack, four_velocity, mixed_em_stress, stress_energy_kgm,
                      stress_energy_rem)


class AcceptabilityError(ValueError):
    """Vector field is not time-like future-directed with the stated margin."""


@dataclass(frozen=True)
class ModulatedFields:
    xi: FourVectorField
    Xi: FaradayField
    h: StressTensorField
    I: StressTensorField
    kinetic_density: np.ndarray
    em_density: np.ndarray
    grid: Grid
    t: float


@dataclass(frozen=True)
class AcceptableVectorField:
    """Contravariant X with |X| <= 1/nu, X^0 >= nu and -X.X >= nu in every cell."""

    X: FourVectorField
    nu: float

    def __post_init__(self) -> None:
        if self.X.covariant:
            raise AcceptabilityError("X must be given with a contravariant index")
        if not self.nu > 0:
            raise AcceptabilityError(f"nu must be positive, got {self.nu}")
        c = self.X.comps
        tol = 1e-12
        mag = np.sqrt(np.sum(c**2, axis=0))
        minkowski = c[0] ** 2 - np.sum(c[1:] ** 2, axis=0)
        if np.max(mag) > (1 + tol) / self.nu:
            raise AcceptabilityError(f"|X| reaches {np.max(mag):.4g} > 1/nu = {1 / self.nu:.4g}")
        if np.min(c[0]) < self.nu * (1 - tol):
            raise AcceptabilityError(f"X^0 drops to {np.min(c[0]):.4g} < nu = {self.nu:.4g}")
        if np.min(minkowski) < self.nu * (1 - tol):
            raise AcceptabilityError(f"-X.X drops to {np.min(minkowski):.4g} < nu = {self.nu:.4g}")


def time_vector(grid: Grid) -> AcceptableVectorField:
    c = np.zeros((4, *grid.shape))
    c[0] = 1.0
    return AcceptableVectorField(FourVectorField(c, covariant=False), 1.0)


def fluid_frame(rem: RemState) -> AcceptableVectorField:
    """U itself, with the largest nu it satisfies."""
    Uc = four_velocity(rem.u).comps * ETA.reshape(4, 1, 1, 1)
    mag = np.sqrt(np.sum(Uc**2, axis=0))
    nu = min(1.0, 1.0 / float(np.max(mag)))
    return AcceptableVectorField(FourVectorField(Uc, covariant=False), nu)


def _check_pair(kgm: KgmState, rem: RemState, time_tol: float) -> None:
    if kgm.phi.shape != rem.rho.shape:
        raise ValueError(f"grid mismatch: {kgm.phi.shape} vs {rem.rho.shape}")
    if abs(kgm.t - rem.t) > time_tol:
        raise ValueError(f"time mismatch: kgm t={kgm.t} vs rem t={rem.t}")


def modulated_fields(kgm: KgmState, rem: RemState, calc: Calculus, time_tol: float = 1e-9) -> ModulatedFields:
    _check_pair(kgm, rem, time_tol)
    phi = kgm.phi
    D = covariant_derivative(kgm, calc)
    Ul = four_velocity(rem.u).comps
    xi = D - 1j * Ul * phi[None]
    Beps = -calc.curl(kgm.A)
    dE, dB = kgm.E - rem.E, Beps - rem.B
    F = faraday_pack(rem.E, rem.B)
    Xi = faraday_pack(dE, dB)
    eta = ETA.reshape(4, 1, 1, 1)

    kin = 0.5 * np.sum(np.abs(xi) ** 2, axis=0)
    em = 0.5 * (np.sum(dE**2, axis=0) + np.sum(dB**2, axis=0))
    h = np.real(xi[:, None] * np.conj(xi[None, :]))
    lag = np.sum(eta * np.abs(xi) ** 2, axis=0)
    for a in range(4):
        h[a, a] -= 0.5 * ETA[a] * lag
    h = h + em_stress(Xi)
    h[0, 0] = kin + em

    J = current(phi, D)
    rho_eps = np.abs(phi) ** 2
    rho = rem.rho
    Uc = Ul * eta
    W = J - Ul * rho_eps[None]  # J_b - U_b |Phi|^2
    I = -Ul[:, None] * Ul[None, :] * (rho - rho_eps) + Ul[:, None] * W[None, :] + W[:, None] * Ul[None, :]
    I = I + mixed_em_stress(F, Xi)
    WU = np.sum(W * Uc, axis=0)
    for a in range(4):
        I[a, a] -= ETA[a] * WU
    return ModulatedFields(
        xi=FourVectorField(xi, covariant=True),
        Xi=FaradayField(dE, dB),
        h=StressTensorField.from_full(h),
        I=StressTensorField.from_full(I),
        kinetic_density=kin,
        em_density=em,
        grid=calc.grid,
        t=kgm.t,
    )


def decomposition_gap(mf: ModulatedFields, kgm: KgmState, rem: RemState, calc: Calculus) -> float:
    """max |h + I - (T_kgm - T_rem)| relative to the largest tensor entry."""
    Tk = stress_energy_kgm(kgm.phi, kgm.pi, kgm.A, kgm.E, kgm.eps, calc).comps
    Tr = stress_energy_rem(rem.u, rem.rho, rem.E, rem.B).comps
    gap = np.max(np.abs(mf.h.comps + mf.I.comps - (Tk - Tr)))
    scale = max(np.max(np.abs(Tk)), np.max(np.abs(Tr)), np.finfo(float).tiny)
    return float(gap / scale)


def flux_density(mf: ModulatedFields, X: AcceptableVectorField | None = None) -> np.ndarray:
    """eta(X) = h_{a0} X^a; exactly h_00 when X is d_t."""
    if X is None:
        return mf.h.component(0, 0)
    c = X.X.comps
    return sum(mf.h.component(a, 0) * c[a] for a in range(4))


def modulated_energy(mf: ModulatedFields, X: AcceptableVectorField | None = None) -> float:
    return integrate(flux_density(mf, X), mf.grid)


def energy_split(mf: ModulatedFields) -> tuple[float, float, float]:
    """(H0, K0, P0) with H0 = K0 + P0 evaluated as that sum."""
    K0 = integrate(mf.kinetic_density, mf.grid)
    P0 = integrate(mf.em_density, mf.grid)
    return K0 + P0, K0, P0


def sandwich_constants(X: AcceptableVectorField) -> tuple[float, float]:
    """Cellwise |h_{0i} X^i| <= |X_space| h_00 gives c1 = inf(X^0 - |X|), c2 = sup(X^0 + |X|)."""
    c = X.X.comps
    sp = np.sqrt(np.sum(c[1:] ** 2, axis=0))
    return float(np.min(c[0] - sp)), float(np.max(c[0] + sp))


def sandwich(mf: ModulatedFields, X: AcceptableVectorField, nu: float | None = None,
             rtol: float = 1e-12) -> tuple[float, float, bool]:
    """(c1, c2, holds) for c1 H0 <= H_X <= c2 H0; ``rtol`` absorbs summation roundoff."""
    if nu is not None and abs(nu - X.nu) > 1e-15 * max(1.0, nu):
        X = AcceptableVectorField(X.X, nu)
    c1, c2 = sandwich_constants(X)
    H0, _, _ = energy_split(mf)
    HX = modulated_energy(mf, X)
    slack = rtol * c2 * abs(H0)
    holds = (c1 * H0 <= HX + slack) and (HX <= c2 * H0 + slack)
    return c1, c2, bool(holds)


@dataclass(frozen=True)
class Distances:
    dist_J_L1: float
    dist_F_L2: float
    dist_rho_L1: float
    dist_sqrtrho_L2: float
    field_bound_holds: bool


def observable_distances(kgm: KgmState, rem: RemState, calc: Calculus,
                         mf: ModulatedFields | None = None) -> Distances:
    g = calc.grid
    mf = modulated_fields(kgm, rem, calc) if mf is None else mf
    D = covariant_derivative(kgm, calc)
    Jeps = current(kgm.phi, D)
    Jrem = rem_current(rem).comps
    rho_eps = np.abs(kgm.phi) ** 2
    dJ = float(np.sum(np.abs(Jeps - Jrem)) * g.cell_volume)
    H0, _, P0 = energy_split(mf)
    dF = float(np.sqrt(2.0 * P0))
    return Distances(
        dist_J_L1=dJ,
        dist_F_L2=dF,
        dist_rho_L1=norm(rho_eps - rem.rho, g, "L1"),
        dist_sqrtrho_L2=norm(np.abs(kgm.phi) - np.sqrt(rem.rho), g, "L2"),
        field_bound_holds=bool(dF <= np.sqrt(2.0 * H0)),
    )


@dataclass(frozen=True)
class ModulatedEnergyReport:
    t: float
    H0: float
    HU: float
    K0: float
    P0: float
    dist_J_L1: float
    dist_F_L2: float
    dist_rho_L1: float
    dist_sqrtrho_L2: float
    sandwich: tuple[float, float, bool]
    field_bound_holds: bool


def modulated_energy_report(kgm: KgmState, rem: RemState, calc: Calculus) -> ModulatedEnergyReport:
    mf = modulated_fields(kgm, rem, calc)
    H0, K0, P0 = energy_split(mf)
    U = fluid_frame(rem)
    c1, c2, holds = sandwich(mf, U)
    d = observable_distances(kgm, rem, calc, mf)
    return ModulatedEnergyReport(
        t=kgm.t, H0=H0, HU=modulated_energy(mf, U), K0=K0, P0=P0,
        dist_J_L1=d.dist_J_L1, dist_F_L2=d.dist_F_L2, dist_rho_L1=d.dist_rho_L1,
        dist_sqrtrho_L2=d.dist_sqrtrho_L2, sandwich=(c1, c2, holds),
        field_bound_holds=d.field_bound_holds,
    )


def h00_forms(kgm: KgmState, rem: RemState, calc: Calculus,
              rho_floor: float | None = None) -> tuple[float, float, float]:
    """Two expressions of int h_00 over cells with rho_eps above the floor.

    form1 = int 1/2 |xi|^2 + EM. form2 = int eps^2 |d sqrt(rho_eps)|^2 / 2
    + |J_eps - rho_eps U|^2 / (2 rho_eps) + EM, with spacetime Euclidean sums
    and the algebraic gradient Re(conj(Phi) d Phi)/|Phi|.
    """
    g = calc.grid
    mf = modulated_fields(kgm, rem, calc)
    rho = np.abs(kgm.phi) ** 2
    floor = 1e-12 * float(np.max(rho)) if rho_floor is None else rho_floor
    mask = rho >= floor
    if not np.any(mask):
        raise ValueError("all cells are below the density floor")
    mod = np.where(mask, np.sqrt(rho), 1.0)
    D = covariant_derivative(kgm, calc)
    # eps * d_a sqrt(rho) = Re(conj(Phi) D_a Phi)/|Phi| (the i A_a Phi part is imaginary)
    eds = np.real(np.conj(kgm.phi)[None] * D) / mod
    J = current(kgm.phi, D)
    Ul = four_velocity(rem.u).comps
    mis = np.sum((J - rho[None] * Ul) ** 2, axis=0) / np.where(mask, rho, 1.0)
    f2 = 0.5 * np.sum(eds**2, axis=0) + 0.5 * mis
    form1 = integrate(np.where(mask, mf.kinetic_density, 0.0) + mf.em_density, g)
    form2 = integrate(np.where(mask, f2, 0.0) + mf.em_density, g)
    gap = abs(form1 - form2) / max(abs(form1), abs(form2), np.finfo(float).tiny)
    return form1, form2, gap


# propagation budget ----------------------------------------------------------------

@dataclass(frozen=True)
class BudgetRow:
    t: float
    HU: float
    dHU_dt: float
    H1: float
    H21: float
    H22: float
    G: float
    closure_gap: float
    H1_bound: float


def _budget_terms(kgm: KgmState, rem: RemState, calc: Calculus, solver: RemSolver,
                  rho_floor: float | None) -> dict[str, float]:
    g = calc.grid
    mf = modulated_fields(kgm, rem, calc)
    U = fluid_frame(rem)
    HU = modulated_energy(mf, U)
    Uc = U.X.comps
    Ul = Uc * ETA.reshape(4, 1, 1, 1)
    du = velocity_time_derivative(rem, solver)
    dU = np.empty((4, 4) + g.shape)  # dU[a, b] = d_a U^b
    dU[0, 0] = np.sum(rem.u * du, axis=0) / Uc[0]
    dU[0, 1:] = du
    for i in range(3):
        dU[1 + i] = np.stack([calc.derivative(Uc[b], i) for b in range(4)])
    h = mf.h.full()
    up = ETA.reshape(4, 1, 1, 1, 1)  # raise the derivative index
    H1 = -integrate(np.sum(h * up * dU, axis=(0, 1)), g)
    divU = dU[0, 0] + dU[1, 1] + dU[2, 2] + dU[3, 3]

    D = covariant_derivative(kgm, calc)
    J = current(kgm.phi, D)
    rho = np.abs(kgm.phi) ** 2
    floor = 1e-12 * float(np.max(rho)) if rho_floor is None else rho_floor
    mask = rho >= floor
    srho = np.where(mask, rho, 1.0)
    eta = ETA.reshape(4, 1, 1, 1)
    W = J - Ul * rho
    WWu = np.sum(eta * W * (-W), axis=0)  # (J - U rho).(U rho - J)
    H21 = integrate(np.where(mask, divU * WWu / (2 * srho), 0.0), g)
    JJ = np.sum(eta * J * J, axis=0)
    H22 = integrate(np.where(mask, divU * (JJ / (2 * srho) + 0.5 * rho), 0.0), g)
    # eps^2 sqrt(rho) d_t sqrt(rho) = eps Re(conj(Phi) Pi)
    G = -integrate(divU * kgm.eps * np.real(np.conj(kgm.phi) * kgm.pi) / 2, g)
    gradU = np.sum(np.abs(dU), axis=(0, 1))
    c1, _ = sandwich_constants(U)
    H1_bound = 3.0 * float(np.max(gradU)) * HU / c1
    return dict(HU=HU, H1=H1, H21=H21, H22=H22, G=G, H1_bound=H1_bound)


def propagation_budget(kgm_traj: list[KgmState], rem_traj: list[RemState], calc: Calculus,
                       solver: RemSolver | None = None,
                       rho_floor: float | None = None) -> list[BudgetRow]:
    """Terms of dH_U/dt = H1 + H21 + H22 at interior snapshots.

    dH_U/dt is a centered difference of the sampled H_U, so the closure gap
    carries the O(dt^2) error of the sampling as well as of the schemes. The
    neutralizing background enters only the Gauss constraint and adds nothing.
    """
    if len(kgm_traj) < 3 or len(kgm_traj) != len(rem_traj):
        raise ValueError("propagation budget needs >= 3 synchronized snapshots")
    solver = RemSolver(calc, filter_strength=0.0) if solver is None else solver
    terms = [_budget_terms(k, r, calc, solver, rho_floor) for k, r in zip(kgm_traj, rem_traj)]
    ts = np.array([k.t for k in kgm_traj])
    rows = []
    for m in range(1, len(ts) - 1):
        dH = (terms[m + 1]["HU"] - terms[m - 1]["HU"]) / (ts[m + 1] - ts[m - 1])
        tm = terms[m]
        gap = abs(dH - (tm["H1"] + tm["H21"] + tm["H22"]))
        rows.append(BudgetRow(float(ts[m]), tm["HU"], float(dH), tm["H1"], tm["H21"], tm["H22"],
                              tm["G"], float(gap), tm["H1_bound"]))
    return rows


def random_acceptable(grid: Grid, rng: np.random.Generator, tilt: float = 0.6) -> AcceptableVectorField:
    """Smooth random X with X^0 in [1, 1.5] and |X_space| <= tilt < 1, plus the nu it attains."""
    from .manufactured import smooth_field

    def unit(f: np.ndarray) -> np.ndarray:
        span = float(np.max(np.abs(f)))
        return f / span if span > 0 else f

    c = np.empty((4, *grid.shape))
    c[0] = 1.25 + 0.25 * unit(smooth_field(grid, rng))
    space = np.stack([smooth_field(grid, rng) for _ in range(3)])
    mag = float(np.max(np.sqrt(np.sum(space**2, axis=0))))
    c[1:] = space * (tilt * rng.uniform(0.2, 1.0) / mag if mag > 0 else 0.0)
    nu = min(float(np.min(c[0])), float(np.min(c[0] ** 2 - np.sum(c[1:] ** 2, axis=0))),
             1.0 / float(np.max(np.sqrt(np.sum(c**2, axis=0)))))
    return AcceptableVectorField(FourVectorField(c, covariant=False), nu)
