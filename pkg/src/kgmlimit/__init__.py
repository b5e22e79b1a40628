"""Semiclassical Klein-Gordon-Maxwell and relativistic Euler-Maxwell on a periodic lattice.

Modules:
    fields      lattice calculus (derivatives, Poisson, Helmholtz, norms)
    tensors     Minkowski algebra, Faraday packing, stress-energy tensors
    kgm         semiclassical Klein-Gordon-Maxwell evolution
    rem         pressureless relativistic Euler-Maxwell evolution
    wkb         matched initial data and WKB residuals
    modenergy   modulated stress-energy, coercivity and propagation budget
    vlasov      monokinetic Vlasov-Maxwell weak residuals
    snapshot    binary field snapshots
    harness     configs, sweeps, experiments and the CLI
"""

from .fields import Calculus, Grid
from .kgm import KgmState, kgm_evolve, kgm_init, kgm_observables, kgm_step
from .modenergy import modulated_energy_report, modulated_fields, propagation_budget
from .rem import RemSolver, RemState, rem_evolve, rem_init, rem_observables, rem_step
from .wkb import make_matched_pair, profile

__all__ = [
    "Calculus", "Grid", "KgmState", "RemSolver", "RemState", "kgm_evolve", "kgm_init", "kgm_observables",
    "kgm_step", "make_matched_pair", "modulated_energy_report", "modulated_fields", "profile",
    "propagation_budget", "rem_evolve", "rem_init", "rem_observables", "rem_step",
]
