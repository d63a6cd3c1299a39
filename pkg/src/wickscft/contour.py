"""Imaginary-time (contour) propagation of the modified diffusion equation.

    dq/ds = (hbar^2 / 2m) lap q - w q,   0 < s < beta

The single-chain partition function is Q = (1/V) int q_fwd(r, s) q_bwd(r, beta - s) dr
and the contour density is n(r, s) = (N / V Q) q_fwd(r, s) q_bwd(r, beta - s).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import FieldSchedule
from .grid import Grid1D, RealField, UnitsConfig
from .splitstep import MAX_EXPONENT, StrangStepper, evolve

Q_FLOOR = 1e-250


class ContourOverflowError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Contour:
    beta: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and > 0, got {self.beta!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    @classmethod
    def from_step(cls, beta: float, ds: float, even: bool = True) -> "Contour":
        """Contour with step close to ``ds``; ``even`` keeps a midpoint node."""
        n = max(1, int(round(beta / ds)))
        if even and n % 2:
            n += 1
        return cls(beta, n)

    @property
    def ds(self) -> float:
        return self.beta / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.ds


@dataclass(frozen=True)
class ContourTable:
    """Propagator stored at every contour node; ``values[m]`` is q(., s_m)."""

    contour: Contour
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != (self.contour.n_steps + 1, self.grid.n_points):
            raise ValueError("table shape does not match contour and grid")
        self.values.setflags(write=False)

    def __len__(self) -> int:
        return self.values.shape[0]

    def slice(self, m: int) -> RealField:
        return RealField(self.grid, self.values[m])

    @property
    def slices(self) -> list[RealField]:
        return [self.slice(m) for m in range(len(self))]


def _as_schedule(w) -> FieldSchedule:
    return w if isinstance(w, FieldSchedule) else FieldSchedule.static(w)


def propagate_contour(
    w: FieldSchedule | RealField,
    q0: RealField,
    contour: Contour,
    units: UnitsConfig | None = None,
) -> ContourTable:
    """Advance q from s = 0 to s = beta by Strang splitting with a spectral diffusion substep."""
    units = units or UnitsConfig()
    schedule = _as_schedule(w)
    schedule.check_nodes(contour.n_steps + 1)
    grid = q0.grid
    if schedule.grid != grid:
        raise ValueError("field and initial propagator live on different grids")
    if q0.values.min() < 0:
        raise ValueError("initial propagator must be non-negative")
    w_min = min(schedule.at(m).min() for m in range(len(schedule)))
    if -w_min * contour.beta > MAX_EXPONENT:
        raise ContourOverflowError(
            f"beta * min(w) = {contour.beta * w_min:.3g} would overflow exp(); "
            f"shift w by a constant or shorten the contour"
        )
    stepper = StrangStepper(grid, units, contour.ds)
    _, values = evolve(q0.values, schedule.at, contour.n_steps, stepper)
    return ContourTable(contour, grid, values)


def propagate_pair(
    w: FieldSchedule | RealField,
    contour: Contour,
    units: UnitsConfig | None = None,
    q0_forward: RealField | None = None,
    q0_backward: RealField | None = None,
) -> tuple[ContourTable, ContourTable]:
    """Forward and backward tables; free ends (q0 = 1) unless initial slices are given.

    The backward run sees the schedule reversed in s. When the schedule is static
    and both initial slices coincide the two runs are identical, so the forward
    table is reused.
    """
    schedule = _as_schedule(w)
    grid = schedule.grid
    ones = RealField.constant(grid, 1.0)
    qf = q0_forward if q0_forward is not None else ones
    qb = q0_backward if q0_backward is not None else ones
    forward = propagate_contour(schedule, qf, contour, units)
    if schedule.is_static and np.array_equal(qf.values, qb.values):
        return forward, forward
    backward = propagate_contour(schedule.reversed(), qb, contour, units)
    return forward, backward


def _check_pair(forward: ContourTable, backward: ContourTable) -> None:
    if forward.contour != backward.contour:
        raise ValueError("forward and backward tables use different contours")
    if forward.grid != backward.grid:
        raise ValueError("forward and backward tables use different grids")


def partition_Q(forward: ContourTable, backward: ContourTable, m: int) -> float:
    _check_pair(forward, backward)
    M = forward.contour.n_steps
    if not 0 <= m <= M:
        raise IndexError(f"node {m} outside 0..{M}")
    grid = forward.grid
    prod = forward.values[m] * backward.values[M - m]
    return float(np.sum(prod) * grid.spacing / grid.volume)


def contour_density(
    forward: ContourTable, backward: ContourTable, m: int, n_particles: float
) -> RealField:
    """n(r, s_m) = (n0 / Q) q_fwd(r, s_m) q_bwd(r, beta - s_m), n0 = N / V.

    Only the midpoint (and, for long contours, nodes far from both ends)
    reproduces the quantum-particle density; other nodes are diagnostics.
    """
    Q = partition_Q(forward, backward, m)
    if not Q > Q_FLOOR:
        raise ValueError(f"partition function Q = {Q:.3e} at node {m} is below the numerical floor")
    M = forward.contour.n_steps
    grid = forward.grid
    n0 = n_particles / grid.volume
    return RealField(grid, n0 / Q * forward.values[m] * backward.values[M - m])


def chain_Q(table: ContourTable) -> np.ndarray:
    """Q(s) = (1/V) int q(r, s) dr for every node: the partition function of a chain of length s."""
    return table.values.sum(axis=1) * table.grid.spacing / table.grid.volume


def decay_energy(table: ContourTable, start_fraction: float = 0.5) -> float:
    """Ground-state energy from the late-contour decay rate of Q(s) ~ exp(-E0 s)."""
    Q = chain_Q(table)
    M = table.contour.n_steps
    a = int(round(start_fraction * M))
    if a >= M:
        raise ValueError("start_fraction leaves no decay window")
    return float(-(np.log(Q[M]) - np.log(Q[a])) / ((M - a) * table.contour.ds))
