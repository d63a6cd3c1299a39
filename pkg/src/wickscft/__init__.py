"""Imaginary-time SCFT, its Wick rotation to real-time Kohn-Sham dynamics, and weak values on a 1D periodic grid."""

__version__ = "0.1.0"

from .contour import Contour, ContourTable, contour_density, partition_Q, propagate_contour, propagate_pair
from .functionals import ExternalPotential, FieldSchedule, FunctionalSpec, evaluate_U, field_from_density
from .grid import ComplexField, Grid1D, RealField, UnitsConfig, inner_product, integrate, laplacian
from .realtime import OrbitalTrajectory, TimeTable, density_t, propagate_tdks, wick_rotation_check
from .scft import ScftConfig, ScftState, ground_state_limit, solve_scft
from .spectral import (
    EigenSet,
    OccupancySpectrum,
    RingPropagator,
    eigendecompose,
    expand_propagator,
    fermi_dirac_occupancy,
    finite_T_density,
    ring_propagator,
    tilde_occupancy,
)
from .weakvalue import (
    Selection,
    WeakValueField,
    backward_state,
    forward_state,
    weak_density,
    weak_value_decomposition,
)
