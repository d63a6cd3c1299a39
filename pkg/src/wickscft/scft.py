"""Self-consistent field loop: field -> propagators -> density -> field, with Picard mixing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .contour import Contour, ContourTable, contour_density, partition_Q, propagate_pair
from .functionals import FunctionalSpec, field_from_density
from .grid import Grid1D, RealField, UnitsConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScftConfig:
    beta: float = 20.0
    ds: float = 0.01
    mixing_alpha: float = 0.1
    tolerance: float = 1e-10
    max_iterations: int = 2000

    def __post_init__(self):
        if not 0 < self.mixing_alpha <= 1:
            raise ValueError(f"mixing_alpha must lie in (0, 1], got {self.mixing_alpha}")
        if not self.tolerance >= 1e-14:
            raise ValueError(f"tolerance must be >= 1e-14, got {self.tolerance}")
        if self.beta <= 0 or self.ds <= 0:
            raise ValueError("beta and ds must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")

    @property
    def contour(self) -> Contour:
        return Contour.from_step(self.beta, self.ds, even=True)


@dataclass(frozen=True)
class ScftState:
    w: RealField
    n: RealField
    Q: float
    history: tuple[tuple[int, float, float], ...]
    converged: bool
    beta: float

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def residual(self) -> float:
        return self.history[-1][1] if self.history else float("inf")


def equilibrium_density(
    w: RealField, n_particles: float, contour: Contour, units: UnitsConfig | None = None
) -> tuple[RealField, float, ContourTable]:
    """Density at the contour midpoint and Q for a static field (free ends).

    The midpoint s = beta/2 is where q_fwd q_bwd converges to the ground-state
    density |phi_0|^2 as beta grows.
    """
    forward, backward = propagate_pair(w, contour, units)
    m = contour.n_steps // 2
    n = contour_density(forward, backward, m, n_particles)
    return n, partition_Q(forward, backward, m), forward


def solve_scft(
    spec: FunctionalSpec,
    n_particles: float,
    grid: Grid1D,
    config: ScftConfig | None = None,
    units: UnitsConfig | None = None,
    w0: RealField | None = None,
) -> ScftState:
    """Damped Picard iteration w <- (1 - a) w + a F[n[w]] starting from w0 = v_ext.

    The residual is max |F[n[w_k]] - w_k| (the undamped field change). A run
    that exhausts ``max_iterations`` is returned with ``converged=False``.
    """
    config = config or ScftConfig()
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    contour = config.contour
    w = w0 if w0 is not None else spec.external.evaluate(grid, units)
    history: list[tuple[int, float, float]] = []
    converged = False
    for it in range(1, config.max_iterations + 1):
        n, Q, _ = equilibrium_density(w, n_particles, contour, units)
        target = field_from_density(spec, n, units)
        residual = float(np.max(np.abs(target.values - w.values)))
        history.append((it, residual, Q))
        log.debug("scft iteration %d residual %.3e Q %.6e", it, residual, Q)
        if residual < config.tolerance:
            converged = True
            break
        a = config.mixing_alpha
        w = RealField(grid, (1 - a) * w.values + a * target.values)
    if not converged:
        log.warning("scft did not converge in %d iterations (residual %.3e)", it, residual)
    return ScftState(w, n, Q, tuple(history), converged, config.beta)


@dataclass(frozen=True)
class GroundStateLadder:
    state: ScftState
    betas: tuple[float, ...]
    densities: tuple[RealField, ...] = field(repr=False)
    drifts: tuple[float, ...]
    converged: bool


def l2_distance(a: RealField, b: RealField) -> float:
    return float(np.sqrt(np.sum((a.values - b.values) ** 2) * a.grid.spacing))


def ground_state_limit(
    spec: FunctionalSpec,
    n_particles: float,
    grid: Grid1D,
    config: ScftConfig,
    beta_ladder: Sequence[float],
    units: UnitsConfig | None = None,
    drift_floor: float = 1e-13,
) -> GroundStateLadder:
    """Solve along an increasing beta ladder, warm-starting each rung from the previous field.

    Drift is the L2 distance between successive rung densities. The ladder is
    converged when every rung converged and the drift shrinks along the ladder
    (or is already at the floating-point floor).
    """
    betas = tuple(float(b) for b in beta_ladder)
    if len(betas) < 2:
        raise ValueError("beta ladder needs at least two rungs")
    if any(b1 <= b0 for b0, b1 in zip(betas, betas[1:])):
        raise ValueError("beta ladder must be strictly increasing")
    states: list[ScftState] = []
    w = None
    for beta in betas:
        cfg = ScftConfig(beta, config.ds, config.mixing_alpha, config.tolerance, config.max_iterations)
        state = solve_scft(spec, n_particles, grid, cfg, units, w0=w)
        states.append(state)
        w = state.w
    densities = tuple(s.n for s in states)
    drifts = tuple(l2_distance(a, b) for a, b in zip(densities, densities[1:]))
    shrinking = all(
        d1 < d0 or d1 <= drift_floor for d0, d1 in zip(drifts, drifts[1:])
    )
    converged = all(s.converged for s in states) and shrinking
    return GroundStateLadder(states[-1], betas, densities, drifts, converged)
