"""Random smooth states for identity checks.

Fields are sums of a few random Fourier modes so that spectral derivatives
are exact and identities hold to roundoff rather than to truncation error.
"""

from __future__ import annotations

import numpy as np

from .fields import Calculus, Grid
from .kgm import KgmState
from .rem import RemState


def smooth_field(grid: Grid, rng: np.random.Generator, modes: int = 3, amplitude: float = 1.0) -> np.ndarray:
    x = grid.coords()
    L = np.array(grid.extents)
    active = [i for i in range(3) if grid.shape[i] > 1]
    kmax = [min(modes, (grid.shape[i] - 1) // 3) if i in active else 0 for i in range(3)]
    f = np.full(grid.shape, rng.normal() * amplitude)
    for _ in range(modes):
        m = [rng.integers(-kmax[i], kmax[i] + 1) if kmax[i] > 0 else 0 for i in range(3)]
        arg = sum(2 * np.pi * m[i] * x[i] / L[i] for i in range(3))
        f = f + amplitude * (rng.normal() * np.cos(arg) + rng.normal() * np.sin(arg)) / modes
    return f


def smooth_vector(grid: Grid, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    return np.stack([smooth_field(grid, rng, amplitude=amplitude) for _ in range(3)])


def random_kgm_state(grid: Grid, rng: np.random.Generator, eps: float | None = None) -> KgmState:
    """Nonvanishing Phi = r e^{i theta} with smooth r >= 0.5."""
    eps = float(rng.uniform(0.05, 1.0)) if eps is None else eps
    r = 0.5 + np.abs(smooth_field(grid, rng))
    theta = smooth_field(grid, rng, amplitude=2.0)
    phi = r * np.exp(1j * theta)
    pi = smooth_field(grid, rng) + 1j * smooth_field(grid, rng)
    return KgmState(phi, pi, smooth_vector(grid, rng), smooth_vector(grid, rng), eps, 0.0)


def random_rem_state(grid: Grid, rng: np.random.Generator) -> RemState:
    rho = 0.2 + np.abs(smooth_field(grid, rng))
    return RemState(smooth_vector(grid, rng), rho, smooth_vector(grid, rng), smooth_vector(grid, rng), 0.0)


def identity_suite(grid: Grid, count: int = 20, seed: int = 0,
                   backend: str = "spectral") -> list[dict[str, float]]:
    """Splitting, decomposition, h00 and spectrum residuals on ``count`` random state pairs."""
    from .kgm import split_identity_residuals
    from .modenergy import decomposition_gap, h00_forms, modulated_fields
    from .rem import elliptic_spectrum

    calc = Calculus(grid, backend)  # type: ignore[arg-type]
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        ks = random_kgm_state(grid, rng)
        rs = random_rem_state(grid, rng)
        r1, r2 = split_identity_residuals(ks, calc)
        mf = modulated_fields(ks, rs, calc)
        _, _, hgap = h00_forms(ks, rs, calc)
        lam = elliptic_spectrum(rs)
        want = np.stack([np.ones_like(rs.rho), np.ones_like(rs.rho), 1.0 / rs.U0**2])
        rows.append(dict(
            sample=i,
            split_time=float(np.max(np.abs(r1))),
            split_space=float(np.max(np.abs(r2))),
            decomposition_gap=decomposition_gap(mf, ks, rs, calc),
            h00_gap=hgap,
            spectrum_gap=float(np.max(np.abs(lam - want))),
        ))
    return rows
