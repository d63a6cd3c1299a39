"""Eigen-expansion of the ground-state Hamiltonian and the occupancy algebra built on it.

H = -(hbar^2 / 2m) lap + w is diagonalized densely on the grid (spectral
kinetic block plus diagonal potential). From its spectrum:

* the propagator diagonal  q(r, r, beta) = sum_j exp(-E_j beta) |phi_j(r)|^2,  Q = sum_j exp(-E_j beta)
* tilde occupancies        f~_k = 1 / (1 + exp((E_k - mu~_k) beta)),  exp(-mu~_k beta) = sum_{j != k} exp(-E_j beta)
* Fermi-Dirac occupancies  f_k = 1 / (1 + exp((E_k - mu) beta)) with a single mu fixed by particle number
* the time-dependent ring propagator q~(r, r, beta, t) = (1/N) sum_k exp(-E_k beta) |phi_k(r, t)|^2
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.special import expit

from .grid import ComplexField, Grid1D, RealField, UnitsConfig, spectral_laplacian

TRUNCATION_TOL = 1e-12


@dataclass(frozen=True)
class EigenSet:
    """Lowest eigenpairs of H, ascending. ``orbitals[j]`` is phi_j sampled on the grid."""

    grid: Grid1D
    energies: np.ndarray
    orbitals: np.ndarray = field(repr=False)
    complete: bool = False

    def __post_init__(self):
        if self.orbitals.shape != (self.energies.size, self.grid.n_points):
            raise ValueError("orbital array shape does not match energies and grid")
        if np.any(np.diff(self.energies) < 0):
            raise ValueError("energies must be ascending")

    def __len__(self) -> int:
        return self.energies.size

    def orbital(self, j: int) -> ComplexField:
        return ComplexField(self.grid, self.orbitals[j])

    def truncated(self, n_states: int) -> "EigenSet":
        return EigenSet(
            self.grid, self.energies[:n_states], self.orbitals[:n_states],
            complete=self.complete and n_states == len(self),
        )


def kinetic_matrix(grid: Grid1D, units: UnitsConfig) -> np.ndarray:
    """Dense spectral kinetic operator; real symmetric circulant."""
    column = np.fft.ifft(units.kinetic_prefactor * grid.wavenumbers**2).real
    return scipy.linalg.circulant(column)


def hamiltonian_matrix(w: RealField, units: UnitsConfig | None = None) -> np.ndarray:
    units = units or UnitsConfig()
    H = kinetic_matrix(w.grid, units)
    H[np.diag_indices_from(H)] += w.values
    return H


def apply_hamiltonian(psi: np.ndarray, w: RealField, units: UnitsConfig | None = None) -> np.ndarray:
    units = units or UnitsConfig()
    return -units.kinetic_prefactor * spectral_laplacian(psi, w.grid) + w.values * psi


def eigendecompose(w: RealField, units: UnitsConfig | None = None, n_states: int | None = None) -> EigenSet:
    grid = w.grid
    n_states = grid.n_points if n_states is None else int(n_states)
    if not 1 <= n_states <= grid.n_points:
        raise ValueError(f"n_states must be in 1..{grid.n_points}, got {n_states}")
    H = hamiltonian_matrix(w, units)
    E, V = scipy.linalg.eigh(H, subset_by_index=[0, n_states - 1])
    V = V / np.sqrt(grid.spacing)
    # deterministic sign: largest-magnitude sample positive
    idx = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[idx, np.arange(V.shape[1])])
    return EigenSet(grid, E, V.T.astype(complex), complete=n_states == grid.n_points)


def _energies(spectrum) -> np.ndarray:
    if isinstance(spectrum, EigenSet):
        return spectrum.energies
    return np.asarray(spectrum, dtype=float)


def _logsumexp(a: np.ndarray) -> float:
    m = np.max(a)
    return float(m + np.log(np.sum(np.exp(a - m))))


def _safe_count(w_min: float, E0: float, beta: float, grid: Grid1D, units: UnitsConfig) -> int:
    """Upper bound on the number of levels below E0 + ln(1/tol)/beta (free levels shifted by min w)."""
    e_cut = E0 + np.log(1 / TRUNCATION_TOL) / beta
    free = units.kinetic_prefactor * grid.wavenumbers**2 + w_min
    return int(np.count_nonzero(free <= e_cut)) + 1


def expand_propagator(
    eig: EigenSet,
    beta: float,
    truncation_tol: float | None = TRUNCATION_TOL,
    w_min: float | None = None,
    units: UnitsConfig | None = None,
) -> tuple[RealField, float]:
    """Diagonal sum_j exp(-E_j beta) |phi_j|^2 and Q = sum_j exp(-E_j beta).

    Raises if the retained spectrum is truncated too early, i.e. the highest kept
    level still carries weight exp(-(E_max - E_0) beta) >= truncation_tol. Pass
    ``truncation_tol=None`` to accept a deliberately truncated expansion.
    """
    E = eig.energies
    if truncation_tol is not None and not eig.complete:
        weight = np.exp(-(E[-1] - E[0]) * beta)
        if weight >= truncation_tol:
            msg = f"expansion truncated at weight {weight:.2e} >= {truncation_tol:.0e}"
            if w_min is not None:
                need = _safe_count(w_min, E[0], beta, eig.grid, units or UnitsConfig())
                msg += f"; retain at least {need} states"
            raise ValueError(msg)
    boltz = np.exp(-E * beta)
    diag = boltz @ np.abs(eig.orbitals) ** 2
    return RealField(eig.grid, diag), float(boltz.sum())


@dataclass(frozen=True)
class OccupancySpectrum:
    """Per-state occupancies.

    kind "tilde": occupancies are f~_k (they sum to one) with per-state mu~_k.
    kind "fermi-dirac": occupancies f_k per spin channel with a single mu;
    ``weights`` multiplies in the spin degeneracy so that sum(weights) = N.
    """

    kind: str
    beta: float
    occupancies: np.ndarray
    chemical_potentials: np.ndarray
    degeneracy: int = 1

    @property
    def weights(self) -> np.ndarray:
        return self.degeneracy * self.occupancies

    @property
    def mu(self) -> float:
        if self.kind != "fermi-dirac":
            raise AttributeError("tilde occupancies carry one mu~ per state, not a single mu")
        return float(self.chemical_potentials[0])


def boltzmann_ratio(spectrum, beta: float) -> np.ndarray:
    """exp(-E_k beta) / sum_j exp(-E_j beta)."""
    a = -_energies(spectrum) * beta
    return np.exp(a - _logsumexp(a))


def tilde_occupancy(spectrum, beta: float) -> OccupancySpectrum:
    E = _energies(spectrum)
    if E.size < 2:
        raise ValueError("tilde occupancy needs at least two states (mu~ is an empty sum otherwise)")
    a = -E * beta
    mu = np.empty_like(E)
    for k in range(E.size):
        # exp(-mu~_k beta) = sum_{j != k} exp(-E_j beta)
        mu[k] = -_logsumexp(np.delete(a, k)) / beta
    f = expit(-(E - mu) * beta)
    return OccupancySpectrum("tilde", beta, f, mu)


def fermi_count(E: np.ndarray, mu: float, beta: float, degeneracy: int) -> float:
    return float(degeneracy * np.sum(expit(-(E - mu) * beta)))


def fermi_dirac_occupancy(
    spectrum,
    beta: float,
    n_particles: float,
    spin_degeneracy: int = 2,
    tol: float = 1e-12,
    max_iter: int = 400,
) -> OccupancySpectrum:
    """Single chemical potential by bisection so that sum_k g / (1 + exp((E_k - mu) beta)) = N."""
    E = _energies(spectrum)
    if not 0 < n_particles < spin_degeneracy * E.size:
        if n_particles == spin_degeneracy * E.size:
            raise ValueError("N fills every retained state; mu is unbounded")
        raise ValueError(
            f"N = {n_particles} is infeasible for {E.size} states with degeneracy {spin_degeneracy}"
        )
    # bracket: each side far enough that the count saturates
    pad = 50.0 / beta + 1.0
    lo, hi = E[0] - pad, E[-1] + pad
    while fermi_count(E, lo, beta, spin_degeneracy) > n_particles:
        lo -= 2 * (hi - lo)
    while fermi_count(E, hi, beta, spin_degeneracy) < n_particles:
        hi += 2 * (hi - lo)
    mu = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mu = 0.5 * (lo + hi)
        count = fermi_count(E, mu, beta, spin_degeneracy)
        if abs(count - n_particles) <= 0.1 * tol:
            break
        if count < n_particles:
            lo = mu
        else:
            hi = mu
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mu)):
            break
    f = expit(-(E - mu) * beta)
    return OccupancySpectrum("fermi-dirac", beta, f, np.array([mu]), degeneracy=spin_degeneracy)


def orbital_density(orbitals: np.ndarray, weights: Sequence[float] | None = None) -> np.ndarray:
    """sum_j weight_j |phi_j|^2 (all weights 1 when omitted)."""
    rho = np.abs(orbitals) ** 2
    if weights is None:
        return rho.sum(axis=0)
    weights = np.asarray(weights, dtype=float)
    if weights.size != orbitals.shape[0]:
        raise ValueError(f"{weights.size} occupancies for {orbitals.shape[0]} orbitals")
    return weights @ rho


def finite_T_density(
    eig: EigenSet,
    occ: OccupancySpectrum,
    orbitals_t: np.ndarray | Sequence[ComplexField] | None = None,
    prefactor: float = 1.0,
) -> RealField:
    """n(r, beta, t) = prefactor * sum_j weight_j |phi_j(r, t)|^2.

    Orbitals default to the static eigenfunctions. Fermi-Dirac weights sum to N;
    tilde weights sum to one, so pass ``prefactor=N`` for the particle-number
    scaled density.
    """
    orbitals = _orbital_array(eig, orbitals_t)
    return RealField(eig.grid, prefactor * orbital_density(orbitals, occ.weights))


def _orbital_array(eig: EigenSet, orbitals_t) -> np.ndarray:
    if orbitals_t is None:
        return eig.orbitals
    if isinstance(orbitals_t, np.ndarray):
        arr = orbitals_t
    else:
        arr = np.array([o.values for o in orbitals_t])
    if arr.shape != eig.orbitals.shape:
        raise ValueError(
            f"time-dependent orbitals have shape {arr.shape}, expected {eig.orbitals.shape}"
        )
    return arr


@dataclass(frozen=True)
class RingPropagator:
    diagonal: RealField
    trace: float
    n_particles: float

    def density(self) -> RealField:
        """(N / Q~) q~(r, r, beta, t)."""
        return RealField(self.diagonal.grid, self.n_particles / self.trace * self.diagonal.values)


def ring_propagator(
    eig: EigenSet,
    beta: float,
    n_particles: float,
    orbitals_t: np.ndarray | Sequence[ComplexField] | None = None,
    substitute: OccupancySpectrum | None = None,
) -> RingPropagator:
    """q~(r, r, beta, t) = (1/N) sum_k exp(-E_k beta) |phi_k(r, t)|^2 and Q~ = sum_k exp(-E_k beta).

    With ``substitute`` (a Fermi-Dirac spectrum) the Boltzmann ratios
    exp(-E_k beta) / Q~ are replaced by the substituted weights, so that
    (N / Q~) q~ reproduces the Fermi-Dirac density.
    """
    orbitals = _orbital_array(eig, orbitals_t)
    E = eig.energies
    boltz = np.exp(-E * beta)
    trace = float(np.sum(boltz))
    if substitute is None:
        weights = boltz
    else:
        if substitute.occupancies.size != E.size:
            raise ValueError("substituted occupancies do not match the number of states")
        weights = substitute.weights * trace
    diag = orbital_density(orbitals, weights) / n_particles
    return RingPropagator(RealField(eig.grid, diag), trace, n_particles)
