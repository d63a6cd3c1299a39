"""Periodic 1D grid, sampled fields, and the spectral operators built on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class UnitsConfig:
    hbar: float = 1.0
    mass: float = 1.0
    k_B: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "k_B"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def kinetic_prefactor(self) -> float:
        """hbar^2 / 2m."""
        return self.hbar**2 / (2.0 * self.mass)


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [0, length) with ``n_points`` nodes.

    ``n_points`` must be a power of two no smaller than 8 so that the
    FFT-based operators stay cheap and exact for band-limited fields.
    """

    n_points: int
    length: float

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"n_points must be a power of two >= 8, got {n!r}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be finite and > 0, got {self.length!r}")

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def volume(self) -> float:
        return self.length

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    @property
    def rwavenumbers(self) -> np.ndarray:
        """Angular wavenumbers in rFFT order (non-negative half)."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_points, d=self.spacing)

    def minimal_image(self, r0: float = 0.0) -> np.ndarray:
        """Signed periodic distance r - r0 folded into [-L/2, L/2)."""
        d = self.r - r0
        return d - self.length * np.round(d / self.length)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class RealField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            raise TypeError("RealField requires real values; use ComplexField")
        values = values.astype(float)
        _check_samples(self.grid, values)
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def constant(cls, grid: Grid1D, value: float) -> "RealField":
        return cls(grid, np.full(grid.n_points, float(value)))

    @classmethod
    def from_function(cls, grid: Grid1D, func) -> "RealField":
        return cls(grid, func(grid.r))


@dataclass(frozen=True)
class ComplexField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        _check_samples(self.grid, values)
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_function(cls, grid: Grid1D, func) -> "ComplexField":
        return cls(grid, func(grid.r))

    @property
    def real(self) -> RealField:
        return RealField(self.grid, self.values.real)

    @property
    def imag(self) -> RealField:
        return RealField(self.grid, self.values.imag)


Field = RealField | ComplexField


def _check_samples(grid: Grid1D, values: np.ndarray) -> None:
    if values.shape != (grid.n_points,):
        raise ValueError(
            f"expected {grid.n_points} samples, got array of shape {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise ValueError(f"field has a non-finite entry at index {bad}")


def same_grid(a: Field, b: Field) -> Grid1D:
    if a.grid != b.grid:
        raise GridMismatchError(f"fields live on different grids: {a.grid} vs {b.grid}")
    return a.grid


def spectral_laplacian(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Array-level Laplacian along the last axis (Fourier multiplier -k^2)."""
    if np.iscomplexobj(values):
        k2 = grid.wavenumbers**2
        return np.fft.ifft(-k2 * np.fft.fft(values, axis=-1), axis=-1)
    k2 = grid.rwavenumbers**2
    return np.fft.irfft(-k2 * np.fft.rfft(values, axis=-1), n=grid.n_points, axis=-1)


def laplacian(f: Field) -> Field:
    """Spectral Laplacian of a periodic field, returned as the same field kind."""
    out = spectral_laplacian(f.values, f.grid)
    return type(f)(f.grid, out)


def central_difference_laplacian(f: Field) -> Field:
    """Second-order finite-difference Laplacian; used only as a test oracle."""
    v = f.values
    h = f.grid.spacing
    return type(f)(f.grid, (np.roll(v, -1) - 2.0 * v + np.roll(v, 1)) / h**2)


def integrate(f: Field):
    """Periodic trapezoid rule, which on a uniform periodic grid is a Riemann sum."""
    total = np.sum(f.values) * f.grid.spacing
    return complex(total) if isinstance(f, ComplexField) else float(total)


def inner_product(a: Field, b: Field) -> complex:
    """<a|b> = integral of conj(a) * b."""
    grid = same_grid(a, b)
    return complex(np.vdot(a.values, b.values) * grid.spacing)


def norm(f: Field) -> float:
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * f.grid.spacing))


def normalized(f: ComplexField) -> ComplexField:
    return ComplexField(f.grid, f.values / norm(f))
