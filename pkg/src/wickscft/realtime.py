"""Real-time Kohn-Sham propagation, i hbar dphi/dt = -(hbar^2/2m) lap phi + w phi.

This is the Wick-rotated counterpart of the contour solver: the same Strang
kernel is driven with the complex increment z = i dt / hbar.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .contour import Contour, propagate_contour
from .functionals import FieldSchedule, FunctionalSpec, field_from_density
from .grid import ComplexField, Grid1D, RealField, UnitsConfig
from .spectral import orbital_density
from .splitstep import StrangStepper, evolve

NORM_TOL = 1e-8


@dataclass(frozen=True)
class TimeTable:
    tau: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be finite and > 0, got {self.tau!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    @property
    def dt(self) -> float:
        return self.tau / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def node_of(self, t: float) -> int:
        m = int(round(t / self.dt))
        if not 0 <= m <= self.n_steps or abs(m * self.dt - t) > 1e-9 * max(1.0, self.tau):
            raise ValueError(f"t = {t} is not a node of the time table (dt = {self.dt})")
        return m


@dataclass(frozen=True)
class OrbitalTrajectory:
    """Orbitals recorded at ``node_indices``; ``orbitals[k, j]`` is phi_j at node node_indices[k]."""

    table: TimeTable
    grid: Grid1D
    node_indices: np.ndarray
    orbitals: np.ndarray = field(repr=False)
    fields: np.ndarray | None = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.node_indices * self.table.dt

    def index_of(self, m: int) -> int:
        hits = np.flatnonzero(self.node_indices == m)
        if hits.size == 0:
            raise KeyError(f"node {m} was not recorded")
        return int(hits[0])

    def at_node(self, m: int) -> list[ComplexField]:
        return [ComplexField(self.grid, phi) for phi in self.orbitals[self.index_of(m)]]

    def density(self, k: int, occupancies: Sequence[float] | None = None) -> RealField:
        """Density at the k-th *recorded* node."""
        return RealField(self.grid, orbital_density(self.orbitals[k], occupancies))

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(np.abs(self.orbitals) ** 2, axis=-1) * self.grid.spacing)


def _as_array(orbitals) -> tuple[np.ndarray, Grid1D]:
    if isinstance(orbitals, ComplexField):
        orbitals = [orbitals]
    orbitals = list(orbitals)
    if not orbitals:
        raise ValueError("need at least one orbital")
    grid = orbitals[0].grid
    if any(o.grid != grid for o in orbitals):
        raise ValueError("orbitals live on different grids")
    return np.array([np.asarray(o.values, dtype=complex) for o in orbitals]), grid


def _check_normalized(psi: np.ndarray, grid: Grid1D) -> None:
    norms = np.sqrt(np.sum(np.abs(psi) ** 2, axis=-1) * grid.spacing)
    bad = np.flatnonzero(np.abs(norms - 1) > NORM_TOL)
    if bad.size:
        raise ValueError(f"initial orbital {bad[0]} has norm {norms[bad[0]]:.12g}, expected 1")


def _check_aliasing(w: np.ndarray, dt: float, hbar: float) -> None:
    phase = dt * np.max(np.abs(w)) / hbar
    if phase > np.pi:
        raise ValueError(
            f"dt * max|w| / hbar = {phase:.3g} exceeds pi; potential phase aliases, reduce dt"
        )


def _as_schedule(w) -> FieldSchedule | None:
    if w is None:
        return None
    return w if isinstance(w, FieldSchedule) else FieldSchedule.static(w)


def evolve_fixed(
    psi0: np.ndarray,
    schedule: FieldSchedule,
    grid: Grid1D,
    n_steps: int,
    dt: complex | float,
    units: UnitsConfig | None = None,
    record_every: int = 1,
    node_offset: int = 0,
    backward: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Split-step evolution in a prescribed field with increment z = i dt / hbar.

    ``node_offset`` is the schedule node where evolution starts. With
    ``backward`` the evolution runs from that node down to node_offset - n_steps
    using the negated step, which is the exact inverse of the forward steps.
    """
    units = units or UnitsConfig()
    z = 1j * dt / units.hbar
    if backward:
        z = -z
        field_at = lambda j: schedule.at(node_offset - j)  # noqa: E731
    else:
        field_at = lambda j: schedule.at(node_offset + j)  # noqa: E731
    stepper = StrangStepper(grid, units, z)
    return evolve(psi0, field_at, n_steps, stepper, record_every)


def propagate_tdks(
    initial,
    w: FieldSchedule | RealField | None,
    table: TimeTable,
    mode: str = "fixed-field",
    spec: FunctionalSpec | None = None,
    units: UnitsConfig | None = None,
    record_every: int = 1,
    occupancies: Sequence[float] | None = None,
) -> OrbitalTrajectory:
    """Propagate Kohn-Sham orbitals over ``table``.

    fixed-field: ``w`` is the prescribed field (static or one slice per node).
    self-consistent: the field is field_from_density(spec, n(t)) evaluated
    adiabatically, plus ``w`` as an optional driving term. Each step predicts
    the midpoint density with a half step, then takes a full symmetric step in
    the midpoint field.

    Initial orbitals must be supplied and normalized; there is no default
    uniform start.
    """
    units = units or UnitsConfig()
    psi0, grid = _as_array(initial)
    _check_normalized(psi0, grid)
    schedule = _as_schedule(w)
    if schedule is not None:
        schedule.check_nodes(table.n_steps + 1)
        if schedule.grid != grid:
            raise ValueError("field schedule and orbitals live on different grids")
    dt = table.dt

    if mode == "fixed-field":
        if schedule is None:
            raise ValueError("fixed-field mode needs a field")
        for m in range(len(schedule)):
            _check_aliasing(schedule.at(m), dt, units.hbar)
        nodes, out = evolve_fixed(psi0, schedule, grid, table.n_steps, dt, units, record_every)
        return OrbitalTrajectory(table, grid, nodes, out)
    if mode != "self-consistent":
        raise ValueError(f"unknown mode {mode!r}")
    if spec is None:
        raise ValueError("self-consistent mode needs a FunctionalSpec")
    return _propagate_self_consistent(psi0, grid, schedule, table, spec, units, record_every, occupancies)


def _propagate_self_consistent(psi0, grid, drive, table, spec, units, record_every, occupancies):
    dt = table.dt
    full = StrangStepper(grid, units, 1j * dt / units.hbar)
    half = StrangStepper(grid, units, 0.5j * dt / units.hbar)
    n_steps = table.n_steps

    def total_field(psi, drive_values):
        n = RealField(grid, orbital_density(psi, occupancies))
        w = field_from_density(spec, n, units).values
        return w if drive_values is None else w + drive_values

    def drive_at(m):
        return None if drive is None else drive.at(m)

    def drive_mid(m):
        if drive is None:
            return None
        return 0.5 * (drive.at(m) + drive.at(m + 1))

    nodes = list(range(0, n_steps + 1, record_every))
    if nodes[-1] != n_steps:
        nodes.append(n_steps)
    out = np.empty((len(nodes),) + psi0.shape, dtype=complex)
    fields = np.empty((len(nodes), grid.n_points))
    psi = psi0.copy()
    out[0] = psi
    w_now = total_field(psi, drive_at(0))
    fields[0] = w_now
    k = 1
    for m in range(n_steps):
        _check_aliasing(w_now, dt, units.hbar)
        a = half.half_potential(w_now)
        psi_half = half.step(psi, a, a)
        w_mid = total_field(psi_half, drive_mid(m))
        _check_aliasing(w_mid, dt, units.hbar)
        a_mid = full.half_potential(w_mid)
        psi = full.step(psi, a_mid, a_mid)
        w_now = total_field(psi, drive_at(m + 1))
        if k < len(nodes) and nodes[k] == m + 1:
            out[k] = psi
            fields[k] = w_now
            k += 1
    return OrbitalTrajectory(table, grid, np.array(nodes), out, fields)


def density_t(orbitals, occupancies: Sequence[float] | None = None) -> RealField:
    """sum_j |phi_j|^2, or sum_j f_j |phi_j|^2 when occupancies are given."""
    psi, grid = _as_array(orbitals)
    return RealField(grid, orbital_density(psi, occupancies))


@dataclass(frozen=True)
class WickReport:
    discrepancy: float
    relative_discrepancy: float
    n_steps: int
    ds: float


def wick_rotation_check(
    w: RealField, beta: float, n_steps: int, units: UnitsConfig | None = None
) -> WickReport:
    """Run the contour solver and the real-time integrator with dt = -i hbar ds; compare tables.

    Substituting t = -i hbar s turns every Kohn-Sham phase into the matching
    diffusion decay, so both runs should agree to rounding.
    """
    units = units or UnitsConfig()
    contour = Contour(beta, n_steps)
    grid = w.grid
    ones = RealField.constant(grid, 1.0)
    table = propagate_contour(w, ones, contour, units)
    rotated_dt = -1j * units.hbar * contour.ds
    _, rt = evolve_fixed(
        ones.values.astype(complex), FieldSchedule.static(w), grid, n_steps, rotated_dt, units
    )
    diff = np.abs(rt - table.values)
    scale = max(np.abs(table.values).max(), np.finfo(float).tiny)
    return WickReport(float(diff.max()), float(diff.max() / scale), n_steps, contour.ds)
