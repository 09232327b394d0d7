"""Noncritical squeezing from spontaneous polarization symmetry breaking.

Two cavity models share one toolkit: a type-II OPO and a χ(3) cavity driven by
two orthogonally circularly polarized pumps. The subpackages cover operator
algebra, mean-field steady states and stability, linearized output spectra
and an exact truncated-Fock master-equation oracle.
"""

from .fluctuations import (
    DriftDiffusion,
    NoiseSpectrum,
    covariance_lyapunov,
    dark_mode_squeezing,
    linearize,
    optimal_quadrature,
    output_spectrum,
    twin_beam_intensity_spectrum,
)
from .meanfield import (
    ClassicalState,
    MeanField,
    existence_boundaries,
    opo_threshold,
    stability,
    steady_states,
    threshold_interval,
)
from .models import (
    Chi3Params,
    OpoParams,
    PhysicalParams,
    build_chi3_circular,
    build_chi3_linear,
    build_opo_hamiltonian,
    chi3_model,
    g_from_physical,
    opo_model,
)
from .operators import OperatorPolynomial, commutator, phase_rotate, to_matrix
from .polarization import JonesVector, Model, bright_mode, dark_mode

__version__ = "0.1.0"

__all__ = [
    "Chi3Params",
    "ClassicalState",
    "DriftDiffusion",
    "JonesVector",
    "MeanField",
    "Model",
    "NoiseSpectrum",
    "OperatorPolynomial",
    "OpoParams",
    "PhysicalParams",
    "bright_mode",
    "build_chi3_circular",
    "build_chi3_linear",
    "build_opo_hamiltonian",
    "chi3_model",
    "commutator",
    "covariance_lyapunov",
    "dark_mode",
    "dark_mode_squeezing",
    "existence_boundaries",
    "g_from_physical",
    "linearize",
    "opo_model",
    "opo_threshold",
    "optimal_quadrature",
    "output_spectrum",
    "phase_rotate",
    "stability",
    "steady_states",
    "threshold_interval",
    "to_matrix",
    "twin_beam_intensity_spectrum",
]
