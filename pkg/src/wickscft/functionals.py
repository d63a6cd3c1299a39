"""Potential functionals U[n], their functional derivative w = dU/dn, and field schedules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import Grid1D, RealField, UnitsConfig

NEGATIVE_DENSITY_FLOOR = -1e-12

POTENTIAL_KINDS = ("harmonic", "box-cosine", "uniform", "tabulated")


@dataclass(frozen=True)
class ExternalPotential:
    """External potential on the periodic box.

    harmonic:   0.5 * m * omega^2 * (r - center)^2, with center defaulting to L/2
                (the minimal-image distance is *not* used; the box must be wide
                enough for the well to be negligible at the edges).
    box-cosine: -depth * cos(2 pi * wavenumber * (r - center) / L); wavenumber
                is an integer mode index so the potential stays periodic.
    uniform:    constant value.
    tabulated:  samples supplied as a RealField on the same grid.
    """

    kind: str
    omega: float = 1.0
    depth: float = 0.0
    wavenumber: int = 1
    value: float = 0.0
    center: float | None = None
    table: RealField | None = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")
        if self.kind == "tabulated" and self.table is None:
            raise ValueError("tabulated potential requires a table")
        if self.kind == "box-cosine" and int(self.wavenumber) != self.wavenumber:
            raise ValueError("box-cosine wavenumber must be an integer mode index")

    @classmethod
    def harmonic(cls, omega: float = 1.0, center: float | None = None) -> "ExternalPotential":
        return cls("harmonic", omega=omega, center=center)

    @classmethod
    def box_cosine(cls, depth: float, wavenumber: int = 1, center: float | None = None) -> "ExternalPotential":
        return cls("box-cosine", depth=depth, wavenumber=wavenumber, center=center)

    @classmethod
    def uniform(cls, value: float) -> "ExternalPotential":
        return cls("uniform", value=value)

    @classmethod
    def tabulated(cls, table: RealField) -> "ExternalPotential":
        return cls("tabulated", table=table)

    def evaluate(self, grid: Grid1D, units: UnitsConfig | None = None) -> RealField:
        units = units or UnitsConfig()
        center = grid.length / 2 if self.center is None else self.center
        r = grid.r
        if self.kind == "harmonic":
            v = 0.5 * units.mass * self.omega**2 * (r - center) ** 2
        elif self.kind == "box-cosine":
            v = -self.depth * np.cos(2 * np.pi * self.wavenumber * (r - center) / grid.length)
        elif self.kind == "uniform":
            v = np.full(grid.n_points, float(self.value))
        else:
            if self.table.grid != grid:
                raise ValueError("tabulated potential was sampled on a different grid")
            v = self.table.values
        return RealField(grid, v)


def gaussian_kernel(grid: Grid1D, width: float) -> RealField:
    """Unit-height Gaussian interaction kernel centred on r = 0 with periodic images folded in."""
    d = grid.minimal_image(0.0)
    return RealField(grid, np.exp(-(d**2) / (2 * width**2)))


def periodic_convolution(kernel: np.ndarray, n: np.ndarray, spacing: float) -> np.ndarray:
    """(K * n)(r_i) = sum_j K(r_i - r_j) n_j dr, evaluated with FFTs."""
    return np.fft.irfft(np.fft.rfft(kernel) * np.fft.rfft(n), n=n.size) * spacing


@dataclass(frozen=True)
class FunctionalSpec:
    """U[n] = int v_ext n + (g/2) int n^2 + (lambda/2) int int n(r) K(r - r') n(r').

    ``extra_field`` is the slot for an additional density-to-field map
    (exchange-correlation or Pauli terms). Nothing in the package fills it; a
    single shared field is produced from the total density.
    """

    external: ExternalPotential
    contact_strength: float = 0.0
    hartree_kernel: RealField | None = None
    hartree_strength: float = 0.0
    extra_field: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not np.isfinite(self.contact_strength) or self.contact_strength < 0:
            raise ValueError("contact_strength must be finite and >= 0")
        if not np.isfinite(self.hartree_strength):
            raise ValueError("hartree_strength must be finite")
        if self.hartree_kernel is not None:
            k = self.hartree_kernel.values
            mirrored = np.roll(k[::-1], 1)
            if not np.allclose(k, mirrored, rtol=0, atol=1e-12 * max(1.0, np.abs(k).max())):
                raise ValueError("hartree kernel must be even: K(r) = K(-r)")

    @property
    def is_density_independent(self) -> bool:
        has_hartree = self.hartree_kernel is not None and self.hartree_strength != 0
        return self.contact_strength == 0 and not has_hartree and self.extra_field is None


def _check_density(n: RealField) -> np.ndarray:
    v = n.values
    if v.min() < NEGATIVE_DENSITY_FLOOR:
        i = int(np.argmin(v))
        raise ValueError(f"density is negative ({v[i]:.3e}) at index {i}; upstream solver fault")
    return v


def field_from_density(
    spec: FunctionalSpec, n: RealField, units: UnitsConfig | None = None
) -> RealField:
    """w(r) = v_ext(r) + g n(r) + lambda (K * n)(r) [+ extra_field(n)]."""
    grid = n.grid
    nv = _check_density(n)
    w = spec.external.evaluate(grid, units).values.copy()
    if spec.contact_strength:
        w += spec.contact_strength * nv
    if spec.hartree_kernel is not None and spec.hartree_strength:
        w += spec.hartree_strength * periodic_convolution(
            spec.hartree_kernel.values, nv, grid.spacing
        )
    if spec.extra_field is not None:
        w += np.asarray(spec.extra_field(nv), dtype=float)
    return RealField(grid, w)


def evaluate_U(spec: FunctionalSpec, n: RealField, units: UnitsConfig | None = None) -> float:
    grid = n.grid
    nv = _check_density(n)
    if spec.extra_field is not None:
        raise ValueError("energy of the extra_field term is unknown; U cannot be evaluated")
    dr = grid.spacing
    v = spec.external.evaluate(grid, units).values
    total = np.sum(v * nv) * dr
    total += 0.5 * spec.contact_strength * np.sum(nv**2) * dr
    if spec.hartree_kernel is not None and spec.hartree_strength:
        conv = periodic_convolution(spec.hartree_kernel.values, nv, dr)
        total += 0.5 * spec.hartree_strength * np.sum(nv * conv) * dr
    return float(total)


class FieldSchedule:
    """A field that is either static or given slice-by-slice on a contour/time table."""

    def __init__(self, slices: RealField | Sequence[RealField]):
        if isinstance(slices, RealField):
            self._static = slices
            self._slices = None
            self.grid = slices.grid
        else:
            slices = list(slices)
            if not slices:
                raise ValueError("time-dependent schedule needs at least one slice")
            grid = slices[0].grid
            if any(s.grid != grid for s in slices):
                raise ValueError("all schedule slices must share a grid")
            self._static = None
            self._slices = slices
            self.grid = grid

    @classmethod
    def static(cls, w: RealField) -> "FieldSchedule":
        return cls(w)

    @classmethod
    def time_dependent(cls, slices: Sequence[RealField]) -> "FieldSchedule":
        return cls(list(slices))

    @property
    def is_static(self) -> bool:
        return self._static is not None

    def __len__(self) -> int:
        return 1 if self._static is not None else len(self._slices)

    def check_nodes(self, n_nodes: int) -> None:
        if self._slices is not None and len(self._slices) != n_nodes:
            raise ValueError(
                f"schedule has {len(self._slices)} slices but the table has {n_nodes} nodes"
            )

    def at(self, m: int) -> np.ndarray:
        if self._static is not None:
            return self._static.values
        return self._slices[m].values

    def reversed(self) -> "FieldSchedule":
        if self._static is not None:
            return self
        return FieldSchedule(self._slices[::-1])

    def replaced(self, m: int, w: RealField) -> "FieldSchedule":
        """Copy with slice ``m`` swapped out."""
        if self._slices is None:
            raise ValueError("expand a static schedule with expand(n_nodes) before editing slices")
        slices = list(self._slices)
        slices[m] = w
        return FieldSchedule(slices)

    def expand(self, n_nodes: int) -> "FieldSchedule":
        if self._slices is not None:
            self.check_nodes(n_nodes)
            return self
        return FieldSchedule([self._static] * n_nodes)
