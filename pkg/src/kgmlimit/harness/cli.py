"""Command line entry point: ``kgmlimit <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from ..fields import Calculus, Grid
from ..kgm import kgm_observables, kgm_step
from ..kgm import to_snapshot as kgm_snapshot
from ..manufactured import identity_suite
from ..rem import rem_observables, rem_step
from ..rem import to_snapshot as rem_snapshot
from ..snapshot import write_snapshot
from ..vlasov import write_residual_csv
from ..wkb import make_matched_pair, profile
from .config import ConfigError, RunConfig, load_config
from .experiments import run_experiment, vlasov_check
from .sweep import dt_for, grid_for, matched_data, rem_solver, run_sweep, write_csv

log = logging.getLogger("kgmlimit")


def _eps_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad eps list {text!r}") from exc
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("eps values must be positive")
    return vals


def _grid(text: str) -> tuple[int, int, int]:
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected Nx,Ny,Nz") from exc
    if len(vals) != 3 or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"grid needs three positive integers, got {text!r}")
    return vals  # type: ignore[return-value]


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(out=args.out, eps=args.eps, shape=args.grid, backend=args.backend, seed=args.seed)


def _evolve_single(args: argparse.Namespace, which: str) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    eps = cfg.eps[0]
    grid = Grid(cfg.shape, cfg.extents) if cfg.ladder == "fixed" else grid_for(cfg, eps)
    calc = Calculus(grid, cfg.backend)  # type: ignore[arg-type]
    k, r = matched_data(cfg, eps, calc)
    dt = dt_for(cfg, eps)
    n = int(round(cfg.T / dt))
    solver = rem_solver(cfg, calc)
    rows = []
    for step in range(n + 1):
        if step:
            if which == "kgm":
                k = kgm_step(k, dt, calc, c_cfl=cfg.c_cfl, c_osc=cfg.c_osc)
            else:
                r = rem_step(r, dt, solver)
        if step % cfg.stride == 0 or step == n:
            if which == "kgm":
                o = kgm_observables(k, calc)
                rows.append(dict(t=k.t, energy=o.energy, charge=o.charge, gauss=o.gauss_residual))
                write_snapshot(out / f"kgm_{step:06d}.snap", kgm_snapshot(k, grid))
            else:
                o = rem_observables(r, calc)
                rows.append(dict(t=r.t, energy=o.energy, charge=o.charge, gauss=o.gauss_residual,
                                 divB=o.divB_residual))
                write_snapshot(out / f"rem_{step:06d}.snap", rem_snapshot(r, grid))
    cols = ("t", "energy", "charge", "gauss") + (("divB",) if which == "rem" else ())
    write_csv(out / f"{which}_timeseries.csv", cols, rows)
    first, last = rows[0], rows[-1]
    print(f"{which}: {n} steps of dt={dt:g} on {grid.shape}; relative energy drift "
          f"{abs(last['energy'] - first['energy']) / abs(first['energy']):.2e}; output in {out}")
    return 0


def cmd_make_data(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid(cfg.shape, cfg.extents)
    calc = Calculus(grid, cfg.backend)  # type: ignore[arg-type]
    u, rho = profile(cfg.profile, grid, **cfg.profile_params)
    pair = make_matched_pair(u, rho, cfg.eps, calc)
    write_snapshot(out / "rem_data.snap", rem_snapshot(pair.rem_data, grid, "rem_data"))
    for eps, state in pair.kgm_data_family:
        write_snapshot(out / f"kgm_eps_{eps:g}.snap", kgm_snapshot(state, grid, f"kgm_eps_{eps:g}"))
    cols = ("eps", "H0", "H0_over_eps2", "gauss_kgm", "gauss_rem", "dist_sqrtrho_L2")
    write_csv(out / "preparation.csv", cols, [{c: getattr(r, c) for c in cols} for r in pair.preparation_report])
    for r in pair.preparation_report:
        print(f"eps={r.eps:g}  H0/eps^2={r.H0_over_eps2:.6f}  gauss={r.gauss_kgm:.1e}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    rep = run_sweep(_config(args))
    for r in rep.rows:
        print(f"eps={r.eps:g}  {r.status}  sup H0={r.sup_H0:.4e}  sup H0/eps^2={r.sup_H0_over_eps2:.4f} {r.error}")
    print("slope: " + ("unavailable (fewer than 3 rows)" if rep.slope is None else f"{rep.slope:.4f}"))
    return 0 if all(r.status == "ok" for r in rep.rows) else 1


def cmd_check_identities(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if not args.config:
        cfg = cfg.with_overrides(shape=args.grid or (16, 16, 16))
    rows = identity_suite(Grid(cfg.shape, cfg.extents), cfg.samples, cfg.seed, cfg.backend)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = tuple(rows[0])
    write_csv(out / "identities.csv", cols, rows)
    limits = {"split_time": 1e-9, "split_space": 1e-9, "decomposition_gap": 1e-10, "h00_gap": 1e-9,
              "spectrum_gap": 1e-12}
    ok = True
    for key, lim in limits.items():
        worst = max(r[key] for r in rows)
        ok &= worst <= lim
        print(f"{'PASS' if worst <= lim else 'FAIL'}  {key:<18} max {worst:.2e} (limit {lim:.0e})")
    return 0 if ok else 1


def cmd_vlasov_check(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if not args.config:
        cfg = cfg.with_overrides(experiment="vlasov", shape=args.grid or (32, 1, 1), T=0.4, stride=2,
                                 refinements=4, profile_params={"velocity_wave": 0.2})
    res = vlasov_check(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_residual_csv(out / "vlasov_residuals.csv", res.details["table"])
    print(("PASS  " if res.passed else "FAIL  ") + res.summary)
    return 0 if res.passed else 1


def cmd_experiment(args: argparse.Namespace) -> int:
    res = run_experiment(_config(args))
    print(("PASS  " if res.passed else "FAIL  ") + f"{res.name}: {res.summary}")
    return 0 if res.passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--out", help="output directory (overrides [output] dir)")
    common.add_argument("--eps", type=_eps_list, help="comma separated eps values, decreasing")
    common.add_argument("--grid", type=_grid, help="cell counts Nx,Ny,Nz")
    common.add_argument("--backend", choices=("spectral", "fd2", "fd4"))
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="kgmlimit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, text in (
        ("make-data", cmd_make_data, "write a matched fluid / semiclassical pair"),
        ("simulate-kgm", lambda a: _evolve_single(a, "kgm"), "evolve the semiclassical system alone"),
        ("simulate-rem", lambda a: _evolve_single(a, "rem"), "evolve the fluid system alone"),
        ("sweep", cmd_sweep, "eps sweep with modulated-energy reports and rate fit"),
        ("check-identities", cmd_check_identities, "identity suite on random manufactured states"),
        ("vlasov-check", cmd_vlasov_check, "weak Vlasov-Maxwell residuals on fluid trajectories"),
        ("experiment", cmd_experiment, "run the experiment named in --config"),
    ):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.set_defaults(func=fn)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
