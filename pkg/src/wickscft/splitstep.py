"""Symmetric (Strang) operator splitting for q -> exp(-z H) q with H = -(hbar^2/2m) lap + w.

One step with contour increment ``z`` applies

    exp(-w_end z / 2)  exp(-(hbar^2 k^2 / 2m) z)  exp(-w_start z / 2)

The same kernel drives imaginary-time diffusion (z = ds, real) and real-time
Kohn-Sham dynamics (z = i dt / hbar). Backward evolution uses -z.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid1D, UnitsConfig

# exp(709) is the largest finite double
MAX_EXPONENT = 700.0


class StrangStepper:
    def __init__(self, grid: Grid1D, units: UnitsConfig, z: complex | float):
        self.grid = grid
        self.units = units
        self.real = isinstance(z, (float, np.floating)) or (
            isinstance(z, (int, np.integer))
        )
        self.z = float(z) if self.real else complex(z)
        kin = units.kinetic_prefactor
        if self.real:
            self._kinetic = np.exp(-kin * grid.rwavenumbers**2 * self.z)
        else:
            self._kinetic = np.exp(-kin * grid.wavenumbers**2 * self.z)

    def half_potential(self, w: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * w * self.z)

    def kinetic(self, psi: np.ndarray) -> np.ndarray:
        if self.real:
            n = self.grid.n_points
            return np.fft.irfft(np.fft.rfft(psi, axis=-1) * self._kinetic, n=n, axis=-1)
        return np.fft.ifft(np.fft.fft(psi, axis=-1) * self._kinetic, axis=-1)

    def step(self, psi: np.ndarray, a_start: np.ndarray, a_end: np.ndarray) -> np.ndarray:
        """Advance one step given precomputed half-potential factors."""
        return a_end * self.kinetic(a_start * psi)


def evolve(
    psi0: np.ndarray,
    field_at,
    n_steps: int,
    stepper: StrangStepper,
    record_every: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Run ``n_steps`` Strang steps, recording every ``record_every``-th node.

    ``field_at(m)`` returns the field at node m (0..n_steps). Returns the
    recorded node indices and an array of shape (n_records, *psi0.shape).
    Node 0 and the final node are always recorded.
    """
    nodes = list(range(0, n_steps + 1, record_every))
    if nodes[-1] != n_steps:
        nodes.append(n_steps)
    dtype = float if stepper.real and not np.iscomplexobj(psi0) else complex
    out = np.empty((len(nodes),) + psi0.shape, dtype=dtype)
    psi = np.asarray(psi0, dtype=dtype)
    out[0] = psi
    k = 1
    w_prev = field_at(0)
    a_prev = stepper.half_potential(w_prev)
    for m in range(n_steps):
        w_next = field_at(m + 1)
        a_next = a_prev if w_next is w_prev else stepper.half_potential(w_next)
        psi = stepper.step(psi, a_prev, a_next)
        if k < len(nodes) and nodes[k] == m + 1:
            out[k] = psi
            k += 1
        w_prev, a_prev = w_next, a_next
    return np.array(nodes), out
