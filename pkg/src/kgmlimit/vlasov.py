"""Monokinetic Vlasov-Maxwell weak formulation along REM trajectories.

A fluid state defines the measure mu = rho delta_{xi = U} (x) dx dt on phase
space. It is never gridded in momentum: every phase-space integral is pushed
forward analytically by substituting xi = U(t, x), which leaves a space-time
quadrature (grid sum in x, trapezoid in t).

The weak equations checked are, for test functions vanishing at both ends of
the time window,

    Maxwell:  -int F^{ab} d_a phi - int (rho U^b - nbar delta^b_0) phi = 0
    Vlasov:    int rho [U^a (d_a a)(t, x, U) + F_{ab} U^a (d a / d xi_b)(t, x, U)] = 0

with the test function a(t, x, xi) taking the covariant momentum xi_b.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .fields import Grid, integrate
from .rem import RemState
from .tensors import ETA, FourVectorField, faraday_pack, raise_both


class StrideError(ValueError):
    """Trajectory snapshots are not uniformly spaced in time."""


def _uniform_times(traj: Sequence[RemState], rtol: float = 1e-9) -> np.ndarray:
    if len(traj) < 2:
        raise StrideError("weak residuals need at least two snapshots")
    ts = np.array([s.t for s in traj])
    steps = np.diff(ts)
    if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > rtol * abs(steps[0]):
        raise StrideError(f"non-uniform output stride: steps range {steps.min():.6g}..{steps.max():.6g}")
    return ts


def _trapezoid_weights(ts: np.ndarray) -> np.ndarray:
    w = np.full(len(ts), ts[1] - ts[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True)
class MonokineticMeasure:
    """rho delta_{xi = U} over a REM trajectory."""

    traj: tuple[RemState, ...]
    grid: Grid

    def __init__(self, traj: Sequence[RemState], grid: Grid) -> None:
        object.__setattr__(self, "traj", tuple(traj))
        object.__setattr__(self, "grid", grid)

    @property
    def times(self) -> np.ndarray:
        return _uniform_times(self.traj)

    def momentum(self, k: int) -> np.ndarray:
        """Covariant xi_b = U_b at snapshot k."""
        s = self.traj[k]
        xi = np.empty((4,) + s.rho.shape)
        xi[0] = -s.U0
        xi[1:] = s.u
        return xi

    def shell_residual(self, floor: float = 0.0) -> float:
        """max |xi^a xi_a + 1| over cells with rho > floor, all snapshots."""
        worst = 0.0
        for k, s in enumerate(self.traj):
            xi = self.momentum(k)
            sq = np.sum(ETA.reshape(4, 1, 1, 1) * xi * xi, axis=0)
            mask = s.rho > floor
            if np.any(mask):
                worst = max(worst, float(np.max(np.abs(sq[mask] + 1.0))))
        return worst


def _time_poly(s: np.ndarray | float, a: int, b: int) -> tuple[float, float]:
    return s**a * (1 - s) ** b, a * s ** (a - 1) * (1 - s) ** b - b * s**a * (1 - s) ** (b - 1)


@dataclass(frozen=True)
class SpaceTimeTest:
    """phi(t, x) = p(s) cos(k.x + shift), p(s) = s^a (1 - s)^b, s = (t - t0)/(t1 - t0)."""

    a: int
    b: int
    k: tuple[float, float, float]
    shift: float
    t0: float
    t1: float

    def _s(self, t: float) -> float:
        return (t - self.t0) / (self.t1 - self.t0)

    def _arg(self, x: np.ndarray) -> np.ndarray:
        return sum(self.k[i] * x[i] for i in range(3)) + self.shift

    def value(self, t: float, x: np.ndarray) -> np.ndarray:
        p, _ = _time_poly(self._s(t), self.a, self.b)
        return p * np.cos(self._arg(x))

    def gradient(self, t: float, x: np.ndarray) -> np.ndarray:
        """(d_t phi, d_1 phi, d_2 phi, d_3 phi)."""
        p, dp = _time_poly(self._s(t), self.a, self.b)
        c, sn = np.cos(self._arg(x)), np.sin(self._arg(x))
        out = np.empty((4,) + c.shape)
        out[0] = dp / (self.t1 - self.t0) * c
        for i in range(3):
            out[1 + i] = -p * self.k[i] * sn
        return out


@dataclass(frozen=True)
class PhaseSpaceTest:
    """a(t, x, xi) = phi(t, x) q(xi) with q(xi) = c0 + c.xi + xi.Q xi, Q symmetric."""

    phi: SpaceTimeTest
    c0: float
    c: tuple[float, float, float, float]
    Q: tuple[tuple[float, ...], ...] = field(default=((0.0,) * 4,) * 4)

    def _q(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.c).reshape((4,) + (1,) * (xi.ndim - 1))
        Q = np.asarray(self.Q)
        Qxi = np.tensordot(Q, xi, axes=(1, 0))
        q = self.c0 + np.sum(c * xi, axis=0) + np.sum(xi * Qxi, axis=0)
        return q, c + 2 * Qxi

    def value(self, t: float, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        q, _ = self._q(xi)
        return self.phi.value(t, x) * q

    def gradient(self, t: float, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """(d_t a, d_i a) at fixed xi."""
        q, _ = self._q(xi)
        return self.phi.gradient(t, x) * q[None]

    def momentum_gradient(self, t: float, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """d a / d xi_b."""
        _, dq = self._q(xi)
        return self.phi.value(t, x)[None] * dq


@dataclass(frozen=True)
class TestFunctionBank:
    maxwell: tuple[SpaceTimeTest, ...]
    vlasov: tuple[PhaseSpaceTest, ...]


def default_bank(grid: Grid, t0: float, t1: float, count: int = 8, seed: int = 0) -> TestFunctionBank:
    """``count`` functions of each kind: low-order time weights, one cosine mode, quadratic q."""
    rng = np.random.default_rng(seed)
    L = np.array(grid.extents)
    active = [i for i in range(3) if grid.shape[i] > 1] or [0]
    sts = []
    for j in range(2 * count):
        a, b = 2 + j % 2, 2 + (j // 2) % 2
        m = np.zeros(3)
        for i in active:
            m[i] = rng.integers(0, 3)
        if not np.any(m):
            m[active[0]] = 1
        sts.append(SpaceTimeTest(a, b, tuple(2 * np.pi * m / L), float(rng.uniform(0, 2 * np.pi)), t0, t1))
    pst = []
    for j in range(count):
        Q = rng.normal(size=(4, 4)) * (j % 2)
        Q = 0.5 * (Q + Q.T)
        pst.append(PhaseSpaceTest(sts[count + j], float(rng.normal()),
                                  tuple(float(v) for v in rng.normal(size=4)),
                                  tuple(tuple(float(v) for v in row) for row in Q)))
    return TestFunctionBank(tuple(sts[:count]), tuple(pst))


def _faraday_up(s: RemState) -> np.ndarray:
    return raise_both(faraday_pack(s.E, s.B))


def weak_maxwell_residual(traj: Sequence[RemState], phi: SpaceTimeTest, grid: Grid,
                          per_component: bool = False) -> float | np.ndarray:
    ts = _uniform_times(traj)
    w = _trapezoid_weights(ts)
    x = grid.coords()
    nbar = float(np.mean(traj[0].rho * traj[0].U0))
    total = np.zeros(4)
    for wk, s in zip(w, traj):
        Fu = _faraday_up(s)
        dphi = phi.gradient(s.t, x)
        val = phi.value(s.t, x)
        J = moments_of(s)[0].comps
        for beta in range(4):
            src = J[beta] - (nbar if beta == 0 else 0.0)
            dens = -np.sum(Fu[:, beta] * dphi, axis=0) - src * val
            total[beta] += wk * integrate(dens, grid)
    res = np.abs(total)
    return res if per_component else float(np.max(res))


def weak_vlasov_residual(traj: Sequence[RemState], a: PhaseSpaceTest, grid: Grid) -> float:
    if not hasattr(a, "momentum_gradient"):
        raise TypeError("test function lacks a momentum-derivative evaluator")
    ts = _uniform_times(traj)
    w = _trapezoid_weights(ts)
    mu = MonokineticMeasure(traj, grid)
    x = grid.coords()
    total = 0.0
    for k, (wk, s) in enumerate(zip(w, traj)):
        xi = mu.momentum(k)
        Uup = xi * ETA.reshape(4, 1, 1, 1)
        F = faraday_pack(s.E, s.B)
        da = a.gradient(s.t, x, xi)
        dxa = a.momentum_gradient(s.t, x, xi)
        force = np.einsum("a...,ab...->b...", Uup, F)  # F_{ab} U^a
        dens = s.rho * (np.sum(Uup * da, axis=0) + np.sum(force * dxa, axis=0))
        total += wk * integrate(dens, grid)
    return abs(total)


def moments_of(state: RemState) -> tuple[FourVectorField, np.ndarray]:
    """Contravariant J^b = int xi^b dmu = rho U^b, and the density rho."""
    J = np.empty((4,) + state.rho.shape)
    J[0] = state.rho * state.U0
    J[1:] = state.rho * state.u
    return FourVectorField(J, covariant=False), state.rho


def moments(traj: Sequence[RemState]) -> tuple[list[FourVectorField], list[np.ndarray]]:
    out = [moments_of(s) for s in traj]
    return [m[0] for m in out], [m[1] for m in out]


@dataclass(frozen=True)
class ResidualRow:
    test_id: int
    kind: str
    residual: float
    grid: str
    dt: float


def residual_table(traj: Sequence[RemState], grid: Grid, bank: TestFunctionBank) -> list[ResidualRow]:
    ts = _uniform_times(traj)
    g = "x".join(str(n) for n in grid.shape)
    dt = float(ts[1] - ts[0])
    rows = [ResidualRow(i, "maxwell", float(weak_maxwell_residual(traj, p, grid)), g, dt)
            for i, p in enumerate(bank.maxwell)]
    rows += [ResidualRow(i, "vlasov", weak_vlasov_residual(traj, a, grid), g, dt)
             for i, a in enumerate(bank.vlasov)]
    return rows


def write_residual_csv(path: str | Path, rows: Sequence[ResidualRow]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["test_id", "kind", "residual", "grid", "dt"])
        for r in rows:
            wr.writerow([r.test_id, r.kind, repr(r.residual), r.grid, repr(r.dt)])
