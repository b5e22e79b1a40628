"""Calculus on a periodic uniform lattice.

Fields are plain numpy arrays. A scalar (real or complex) field has shape
``grid.shape``; a 3-vector field has shape ``(3, *grid.shape)``. All
derivative operators act through the discrete Fourier transform with a
backend-dependent symbol, so the centered finite-difference stencils of
order 2 and 4 are applied exactly (as circulant operators) and share all
plumbing with the spectral backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Sequence

import numpy as np
import scipy.fft as sfft

Backend = Literal["spectral", "fd2", "fd4"]
BACKENDS: tuple[str, ...] = ("spectral", "fd2", "fd4")
_AXES = (-3, -2, -1)


class GridError(ValueError):
    """Invalid grid description or field/grid mismatch."""


class PoissonError(ValueError):
    """Poisson source incompatible with periodicity."""


@dataclass(frozen=True)
class Grid:
    """Periodic lattice with ``shape`` cells covering a box of side ``extents``."""

    shape: tuple[int, int, int]
    extents: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        shape = tuple(int(n) for n in self.shape)
        extents = tuple(float(L) for L in self.extents)
        if len(shape) != 3 or len(extents) != 3:
            raise GridError("grid needs three dimensions and three extents")
        if any(n < 1 for n in shape):
            raise GridError(f"cell counts must be >= 1, got {shape}")
        if not all(np.isfinite(L) and L > 0 for L in extents):
            raise GridError(f"extents must be positive, got {extents}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "extents", extents)

    @property
    def spacings(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.extents, self.shape))  # type: ignore[return-value]

    @property
    def cell_volume(self) -> float:
        dx, dy, dz = self.spacings
        return dx * dy * dz

    @property
    def volume(self) -> float:
        Lx, Ly, Lz = self.extents
        return Lx * Ly * Lz

    @property
    def min_spacing(self) -> float:
        """Smallest spacing among axes that carry more than one cell."""
        active = [h for h, n in zip(self.spacings, self.shape) if n > 1]
        return min(active) if active else min(self.spacings)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coords(self) -> np.ndarray:
        """Cell positions as an array of shape ``(3, Nx, Ny, Nz)``."""
        axes = [np.arange(n) * h for n, h in zip(self.shape, self.spacings)]
        return np.array(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self) -> list[np.ndarray]:
        """Angular wavenumbers per axis, broadcastable against a field."""
        out = []
        for ax, (n, L) in enumerate(zip(self.shape, self.extents)):
            k = 2 * np.pi * sfft.fftfreq(n, d=L / n)
            sh = [1, 1, 1]
            sh[ax] = n
            out.append(k.reshape(sh))
        return out

    def check(self, f: np.ndarray, components: int | None = None) -> None:
        want = self.shape if components is None else (components, *self.shape)
        if f.shape != want:
            raise GridError(f"field shape {f.shape} does not match {want}")


class Calculus:
    """Derivative operators on ``grid`` for one backend.

    ``spectral`` is exact on resolved Fourier modes; the Nyquist mode of
    first derivatives is dropped so that they stay real and skew-adjoint.
    ``fd2``/``fd4`` are centered stencils of the stated order.
    """

    def __init__(self, grid: Grid, backend: Backend = "spectral") -> None:
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
        self.grid = grid
        self.backend = backend

    def __repr__(self) -> str:
        return f"Calculus({self.grid!r}, {self.backend!r})"

    @cached_property
    def _symbols(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        first, second = [], []
        for k, n, h in zip(self.grid.wavenumbers(), self.grid.shape, self.grid.spacings):
            th = k * h
            if self.backend == "spectral":
                d1 = 1j * k
                if n % 2 == 0:
                    d1 = np.where(np.isclose(np.abs(th), np.pi), 0.0, d1)
                d2 = -(k**2)
            elif self.backend == "fd2":
                d1 = 1j * np.sin(th) / h
                d2 = -(2.0 - 2.0 * np.cos(th)) / h**2
            else:
                d1 = 1j * (8.0 * np.sin(th) - np.sin(2 * th)) / (6.0 * h)
                d2 = (32.0 * np.cos(th) - 2.0 * np.cos(2 * th) - 30.0) / (12.0 * h**2)
            if n == 1:
                d1 = np.zeros_like(d1)
                d2 = np.zeros_like(d2)
            first.append(np.asarray(d1, dtype=complex))
            second.append(np.asarray(d2, dtype=float))
        return first, second

    @property
    def d1_symbols(self) -> list[np.ndarray]:
        return self._symbols[0]

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        s = self._symbols[1]
        return s[0] + s[1] + s[2]

    @cached_property
    def _grad_sq_symbol(self) -> np.ndarray:
        # symbol of divergence(gradient), i.e. the sum of squared first derivatives
        d = self.d1_symbols
        return (d[0] ** 2 + d[1] ** 2 + d[2] ** 2).real

    # transforms -----------------------------------------------------------
    @staticmethod
    def fft(f: np.ndarray) -> np.ndarray:
        return sfft.fftn(f, axes=_AXES)

    @staticmethod
    def ifft(fh: np.ndarray, real: bool) -> np.ndarray:
        out = sfft.ifftn(fh, axes=_AXES)
        return out.real if real else out

    # first-order operators ------------------------------------------------
    def derivative(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Partial derivative of a scalar or complex field along ``axis``."""
        if self.grid.shape[axis] == 1:
            return np.zeros_like(f)
        ax = axis - 3
        fh = sfft.fft(f, axis=ax)
        sym = self.d1_symbols[axis]
        out = sfft.ifft(fh * sym, axis=ax)
        return out.real if np.isrealobj(f) else out

    def gradient(self, f: np.ndarray) -> np.ndarray:
        return np.stack([self.derivative(f, a) for a in range(3)])

    def divergence(self, v: np.ndarray) -> np.ndarray:
        return self.derivative(v[0], 0) + self.derivative(v[1], 1) + self.derivative(v[2], 2)

    def curl(self, v: np.ndarray) -> np.ndarray:
        d = self.derivative
        return np.stack(
            [
                d(v[2], 1) - d(v[1], 2),
                d(v[0], 2) - d(v[2], 0),
                d(v[1], 0) - d(v[0], 1),
            ]
        )

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.ifft(self.fft(f) * self.laplacian_symbol, np.isrealobj(f))

    def jacobian(self, v: np.ndarray) -> np.ndarray:
        """``J[i, j] = d v_i / d x_j`` for a 3-vector field."""
        return np.stack([self.gradient(v[i]) for i in range(3)])

    # elliptic solves --------------------------------------------------------
    def poisson_solve(self, s: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
        """Zero-mean ``phi`` with ``laplacian(phi) = s``."""
        self.grid.check(s)
        mean = float(np.mean(s))
        scale = float(np.max(np.abs(s))) if s.size else 0.0
        if abs(mean) > rtol * max(scale, np.finfo(float).tiny):
            raise PoissonError(f"source has nonzero mean {mean:.3e} (scale {scale:.3e})")
        return self._inverse(s, self.laplacian_symbol)

    def gradient_potential(self, s: np.ndarray) -> np.ndarray:
        """Zero-mean ``phi`` with ``divergence(gradient(phi)) = s`` on resolved modes."""
        return self._inverse(s - np.mean(s), self._grad_sq_symbol)

    def _inverse(self, s: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        sh = self.fft(s)
        safe = np.where(np.abs(symbol) > 1e-14 * max(np.max(np.abs(symbol)), 1.0), symbol, np.inf)
        return self.ifft(sh / safe, np.isrealobj(s))

    def helmholtz_decompose(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split ``v`` into (curl-free, divergence-free) parts.

        The projector acts per Fourier mode with the backend's first-derivative
        symbol. Modes where that symbol vanishes (the mean, and the Nyquist mode
        for the spectral backend) go to the divergence-free part.
        """
        self.grid.check(v, 3)
        vh = np.stack([self.fft(v[i]) for i in range(3)])
        xi = [np.broadcast_to(s, self.grid.shape) for s in self.d1_symbols]
        # d1 symbols are i*kappa with kappa real
        kap = np.stack([s.imag for s in xi])
        k2 = np.sum(kap**2, axis=0)
        safe = np.where(k2 > 0, k2, np.inf)
        proj = np.sum(kap * vh, axis=0) / safe
        cf_h = kap * proj
        real = np.isrealobj(v)
        curl_free = np.stack([self.ifft(cf_h[i], real) for i in range(3)])
        div_free = v - curl_free
        return curl_free, div_free


def background_subtracted(charge: np.ndarray) -> np.ndarray:
    """Charge density minus its spatial mean (uniform neutralizing background)."""
    return charge - np.mean(charge)


# quadrature ---------------------------------------------------------------

NormKind = Literal["L1", "L2", "Linf"]


def integrate(f: np.ndarray, grid: Grid) -> float:
    """Midpoint quadrature: sum of cell values times the cell volume."""
    return float(np.sum(f) * grid.cell_volume)


def norm(f: np.ndarray, grid: Grid, kind: NormKind = "L2") -> float:
    """Norm of a scalar or vector field; vector fields use the pointwise Euclidean modulus."""
    a = np.abs(f)
    if f.ndim == 4:
        a = np.sqrt(np.sum(a**2, axis=0))
    if kind == "L1":
        return float(np.sum(a) * grid.cell_volume)
    if kind == "L2":
        return float(np.sqrt(np.sum(a**2) * grid.cell_volume))
    if kind == "Linf":
        return float(np.max(a)) if a.size else 0.0
    raise ValueError(f"unknown norm kind {kind!r}")


def inner(f: np.ndarray, g: np.ndarray, grid: Grid) -> float:
    """Real L2 inner product, summed over vector components if present."""
    return float(np.sum(np.real(np.conj(f) * g)) * grid.cell_volume)


def as_vector(values: Sequence[float], grid: Grid) -> np.ndarray:
    """Constant 3-vector field."""
    v = np.asarray(values, dtype=float).reshape(3, 1, 1, 1)
    return np.broadcast_to(v, (3, *grid.shape)).copy()
