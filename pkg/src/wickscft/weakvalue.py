"""Two-time propagation with pre/post-selection and the weak value of N |r><r|.

    n(r, t, tau) = N psi_i(r, t) conj(psi_f(r, t)) / int psi_i conj(psi_f) dr

psi_i is the pre-selected state evolved forward from t = 0; psi_f is the
post-selected state evolved backward from t = tau. The field is prescribed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .functionals import FieldSchedule
from .grid import ComplexField, Grid1D, RealField, UnitsConfig, norm
from .realtime import TimeTable, _check_aliasing, evolve_fixed

OVERLAP_FLOOR = 1e-10
SELECTION_NORM_TOL = 1e-10


class OrthogonalPostSelectionError(ValueError):
    """Pre- and post-selected states are (numerically) orthogonal at the evaluation time."""


@dataclass(frozen=True)
class Selection:
    pre: ComplexField
    post: ComplexField

    def __post_init__(self):
        if self.pre.grid != self.post.grid:
            raise ValueError("pre- and post-selected states live on different grids")
        for name, state in (("pre", self.pre), ("post", self.post)):
            if abs(norm(state) - 1) > SELECTION_NORM_TOL:
                raise ValueError(f"{name}-selected state has norm {norm(state):.12g}, expected 1")

    @property
    def grid(self) -> Grid1D:
        return self.pre.grid

    def swapped(self) -> "Selection":
        return Selection(self.post, self.pre)


@dataclass(frozen=True)
class WeakValueField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)
    overlap: complex
    n_particles: float
    t: float
    tau: float

    @property
    def field(self) -> ComplexField:
        return ComplexField(self.grid, self.values)

    @property
    def real(self) -> RealField:
        return RealField(self.grid, self.values.real)

    @property
    def imag(self) -> RealField:
        return RealField(self.grid, self.values.imag)


def _prepare(selection: Selection, w, table: TimeTable, units: UnitsConfig):
    schedule = w if isinstance(w, FieldSchedule) else FieldSchedule.static(w)
    schedule.check_nodes(table.n_steps + 1)
    if schedule.grid != selection.grid:
        raise ValueError("field schedule and selected states live on different grids")
    for m in range(len(schedule)):
        _check_aliasing(schedule.at(m), table.dt, units.hbar)
    return schedule


def forward_state(
    selection: Selection, w, table: TimeTable, t: float, units: UnitsConfig | None = None
) -> ComplexField:
    """Pre-selected state evolved from 0 to t."""
    units = units or UnitsConfig()
    schedule = _prepare(selection, w, table, units)
    m = table.node_of(t)
    _, out = evolve_fixed(
        selection.pre.values, schedule, selection.grid, m, table.dt, units, record_every=max(m, 1)
    )
    return ComplexField(selection.grid, out[-1])


def backward_state(
    selection: Selection, w, table: TimeTable, t: float, units: UnitsConfig | None = None
) -> ComplexField:
    """Post-selected state evolved backward from tau to t (negated time step)."""
    units = units or UnitsConfig()
    schedule = _prepare(selection, w, table, units)
    m = table.node_of(t)
    steps = table.n_steps - m
    _, out = evolve_fixed(
        selection.post.values, schedule, selection.grid, steps, table.dt, units,
        record_every=max(steps, 1), node_offset=table.n_steps, backward=True,
    )
    return ComplexField(selection.grid, out[-1])


def weak_density(
    selection: Selection,
    w,
    table: TimeTable,
    t: float,
    n_particles: float = 1.0,
    units: UnitsConfig | None = None,
    overlap_floor: float = OVERLAP_FLOOR,
) -> WeakValueField:
    psi_i = forward_state(selection, w, table, t, units).values
    psi_f = backward_state(selection, w, table, t, units).values
    return combine(psi_i, psi_f, selection.grid, n_particles, t, table.tau, overlap_floor)


def combine(
    psi_i: np.ndarray,
    psi_f: np.ndarray,
    grid: Grid1D,
    n_particles: float,
    t: float,
    tau: float,
    overlap_floor: float = OVERLAP_FLOOR,
) -> WeakValueField:
    """Weak density from already-propagated states at the same time."""
    overlap = complex(np.vdot(psi_f, psi_i) * grid.spacing)
    if abs(overlap) <= overlap_floor:
        raise OrthogonalPostSelectionError(
            f"orthogonal post-selection: |<psi_f|psi_i>| = {abs(overlap):.3e} "
            f"<= floor {overlap_floor:.1e} at t = {t}"
        )
    values = n_particles * psi_i * np.conj(psi_f) / overlap
    return WeakValueField(grid, values, overlap, n_particles, t, tau)


class PolarWeakValue(NamedTuple):
    modulus: RealField
    argument: RealField
    defined: np.ndarray


def weak_value_decomposition(wv: WeakValueField | ComplexField, floor: float = 1e-12) -> PolarWeakValue:
    """Pointwise modulus and argument; the argument is unwrapped along the grid.

    Points with modulus <= floor have no meaningful phase: they are reported
    in ``defined`` as False and carry argument 0.
    """
    grid = wv.grid
    values = np.asarray(wv.values)
    modulus = np.abs(values)
    defined = modulus > floor
    argument = np.zeros(grid.n_points)
    if defined.any():
        argument[defined] = np.unwrap(np.angle(values[defined]))
    return PolarWeakValue(RealField(grid, modulus), RealField(grid, argument), defined)
