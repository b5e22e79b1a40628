"""eps sweeps: matched data, lockstep evolution, per-stride reports, rate fit.

Output layout under ``cfg.out``::

    sweep.csv            one row per eps
    rates.json           fitted slope of sup_t H0 against eps
    manifest.json        conventions, backend, versions, wall time
    eps_<eps>/timeseries.csv
    eps_<eps>/{kgm,rem}_t0.snap, {kgm,rem}_tT.snap
"""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from ..fields import Calculus, Grid
from ..kgm import KgmState, kgm_observables, kgm_step
from ..kgm import to_snapshot as kgm_snapshot
from ..modenergy import modulated_energy_report
from ..rem import RemSolver, RemState, rem_observables, rem_step
from ..rem import to_snapshot as rem_snapshot
from ..snapshot import write_snapshot
from ..wkb import make_matched_pair, profile
from .config import RunConfig
from .rates import fit_rate

log = logging.getLogger(__name__)

TIMESERIES_COLUMNS = (
    "t", "H0", "HU", "K0", "P0", "energy_kgm", "energy_rem", "charge_kgm", "charge_rem",
    "gauss_kgm", "gauss_rem", "divB", "dist_J_L1", "dist_F_L2", "dist_rho_L1", "dist_sqrtrho_L2",
)
SWEEP_COLUMNS = (
    "eps", "sup_H0", "sup_H0_over_eps2", "dist_J_L1", "dist_F_L2", "dist_rho_L1",
    "dist_sqrtrho_L2", "status",
)
CONVENTIONS = {
    "signature": "(-,+,+,+), c = 1",
    "faraday": "F_0i = E_i, F_ij = -eps_ijk B_k",
    "potential": "temporal gauge, d_t A = E, B = -curl A",
    "gauss": "div E = charge - mean(charge); charge = Im(Phi conj Pi) or rho U^0",
    "current": "J_a = -Im(conj(Phi) D_a Phi), D_a = eps d_a - i A_a, D_0 Phi = Pi",
    "gauge": "Phi -> exp(-i chi / eps) Phi, A -> A + grad chi",
    "energy": "int T_00 with 1/2 on |E|^2 + |B|^2",
}


def grid_for(cfg: RunConfig, eps: float) -> Grid:
    """Base grid at eps_ref; the matched ladder scales active axes by eps_ref / eps."""
    if cfg.ladder == "fixed":
        return Grid(cfg.shape, cfg.extents)
    scale = cfg.eps_ref / eps
    shape = tuple(n if n == 1 else int(round(n * scale)) for n in cfg.shape)
    return Grid(shape, cfg.extents)


def dt_for(cfg: RunConfig, eps: float) -> float:
    if cfg.ladder == "fixed" and cfg.dt > 0:
        return cfg.dt
    return cfg.dt_per_eps * eps


def rem_solver(cfg: RunConfig, calc: Calculus) -> RemSolver:
    return RemSolver(calc, scheme=cfg.rem_scheme, filter_strength=cfg.filter_strength,  # type: ignore[arg-type]
                     filter_order=cfg.filter_order, shock_threshold=cfg.shock_threshold, c_cfl=cfg.c_cfl)


def matched_data(cfg: RunConfig, eps: float, calc: Calculus) -> tuple[KgmState, RemState]:
    u, rho = profile(cfg.profile, calc.grid, **cfg.profile_params)
    pair = make_matched_pair(u, rho, [eps], calc)
    return pair.kgm_data_family[0][1], pair.rem_data


def _steps(T: float, dt: float) -> int:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T} is not a positive multiple of dt={dt}")
    return n


def timeseries_row(k: KgmState, r: RemState, calc: Calculus) -> dict[str, float]:
    rep = modulated_energy_report(k, r, calc)
    ko = kgm_observables(k, calc)
    ro = rem_observables(r, calc)
    return dict(
        t=k.t, H0=rep.H0, HU=rep.HU, K0=rep.K0, P0=rep.P0,
        energy_kgm=ko.energy, energy_rem=ro.energy, charge_kgm=ko.charge, charge_rem=ro.charge,
        gauss_kgm=ko.gauss_residual, gauss_rem=ro.gauss_residual, divB=ro.divB_residual,
        dist_J_L1=rep.dist_J_L1, dist_F_L2=rep.dist_F_L2, dist_rho_L1=rep.dist_rho_L1,
        dist_sqrtrho_L2=rep.dist_sqrtrho_L2,
        field_bound=float(rep.field_bound_holds), sandwich=float(rep.sandwich[2]),
    )


def evolve_pair(k: KgmState, r: RemState, T: float, dt: float, stride: int, calc: Calculus,
                solver: RemSolver, cfg: RunConfig, record=timeseries_row) -> tuple[list[Any], KgmState, RemState]:
    """Advance both systems in lockstep, recording every ``stride`` steps and at T."""
    n = _steps(T, dt)
    rows = [record(k, r, calc)]
    for step in range(1, n + 1):
        k = kgm_step(k, dt, calc, c_cfl=cfg.c_cfl, c_osc=cfg.c_osc)
        r = rem_step(r, dt, solver)
        if not (np.all(np.isfinite(k.phi)) and np.all(np.isfinite(r.u))):
            raise FloatingPointError(f"non-finite values at step {step} (t={k.t:.6g})")
        if step % stride == 0 or step == n:
            rows.append(record(k, r, calc))
    return rows, k, r


def write_csv(path: Path, columns: tuple[str, ...], rows: list[dict[str, Any]]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(columns)
        for row in rows:
            wr.writerow([_fmt(row.get(c, "")) for c in columns])


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class SweepRow:
    eps: float
    status: str
    sup_H0: float = float("nan")
    final: dict[str, float] = field(default_factory=dict)
    timeseries: list[dict[str, float]] = field(default_factory=list)
    error: str = ""

    @property
    def sup_H0_over_eps2(self) -> float:
        return self.sup_H0 / self.eps**2

    def as_csv(self) -> dict[str, Any]:
        d = {"eps": self.eps, "sup_H0": self.sup_H0, "sup_H0_over_eps2": self.sup_H0_over_eps2,
             "status": self.status}
        for key in ("dist_J_L1", "dist_F_L2", "dist_rho_L1", "dist_sqrtrho_L2"):
            d[key] = self.final.get(key, float("nan"))
        return d


@dataclass
class SweepReport:
    rows: list[SweepRow]
    slope: float | None
    intercept: float | None
    residual: float | None
    manifest: dict[str, Any]

    @property
    def ok_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if r.status == "ok"]


def run_row(cfg: RunConfig, eps: float, outdir: Path | None) -> SweepRow:
    grid = grid_for(cfg, eps)
    calc = Calculus(grid, cfg.backend)  # type: ignore[arg-type]
    solver = rem_solver(cfg, calc)
    dt = dt_for(cfg, eps)
    try:
        k0, r0 = matched_data(cfg, eps, calc)
        rows, kT, rT = evolve_pair(k0, r0, cfg.T, dt, cfg.stride, calc, solver, cfg)
    except Exception as exc:  # any solver abort marks the row failed
        log.warning("eps=%g failed: %s", eps, exc)
        return SweepRow(eps, "failed", error=f"{type(exc).__name__}: {exc}")
    if outdir is not None:
        sub = outdir / f"eps_{eps:g}"
        sub.mkdir(parents=True, exist_ok=True)
        write_csv(sub / "timeseries.csv", TIMESERIES_COLUMNS, rows)
        write_snapshot(sub / "kgm_t0.snap", kgm_snapshot(k0, grid))
        write_snapshot(sub / "rem_t0.snap", rem_snapshot(r0, grid))
        write_snapshot(sub / "kgm_tT.snap", kgm_snapshot(kT, grid))
        write_snapshot(sub / "rem_tT.snap", rem_snapshot(rT, grid))
    return SweepRow(eps, "ok", sup_H0=max(r["H0"] for r in rows), final=rows[-1], timeseries=rows)


def run_sweep(cfg: RunConfig, write: bool = True) -> SweepReport:
    start = time.perf_counter()
    outdir = Path(cfg.out) if write else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for eps in cfg.eps:
        log.info("eps=%g: grid %s, dt=%g", eps, grid_for(cfg, eps).shape, dt_for(cfg, eps))
        rows.append(run_row(cfg, eps, outdir))
    ok = [r for r in rows if r.status == "ok"]
    slope = intercept = resid = None
    if len(ok) >= 3:
        slope, intercept, resid = fit_rate([r.eps for r in ok], [r.sup_H0 for r in ok])
    manifest = {
        "conventions": CONVENTIONS,
        "backend": cfg.backend,
        "ladder": cfg.ladder,
        "grids": {f"{e:g}": list(grid_for(cfg, e).shape) for e in cfg.eps},
        "dt": {f"{e:g}": dt_for(cfg, e) for e in cfg.eps},
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "failures": {f"{r.eps:g}": r.error for r in rows if r.status != "ok"},
        "wall_time_s": time.perf_counter() - start,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    report = SweepReport(rows, slope, intercept, resid, manifest)
    if outdir is not None:
        write_csv(outdir / "sweep.csv", SWEEP_COLUMNS, [r.as_csv() for r in rows])
        rates = {"slope": slope, "intercept": intercept, "residual": resid,
                 "rows_used": [r.eps for r in ok],
                 "note": None if slope is not None else "slope unavailable: fewer than 3 successful rows"}
        (outdir / "rates.json").write_text(json.dumps(rates, indent=2) + "\n")
        (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return report
