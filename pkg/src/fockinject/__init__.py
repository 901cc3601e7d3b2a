"""Linear-optical circuits with state injection: permanents, lifting, channels, controllability."""

from .fock import FockBasis, basis_index, basis_size, enumerate_basis
from .permanent import PermanentEstimate, gurvits_estimate, permanent_exact, permanent_naive, permanent_ryser
from .circuit import (
    Gate,
    ParamCircuit,
    beamsplitter,
    haar_unitary,
    phaseshifter,
    single_photon_jacobian,
    single_photon_unitary,
    universal_mesh,
)
from .lift import lift_amplitude, lift_matrix, lift_unitary, transition_probability
from .channel import (
    DensityMatrix,
    InjectionSpec,
    identity_injection,
    purity,
    state_injection,
    trace_distance,
)
from .analysis import PipelineCircuit, dof_at, dof_curve, dof_max, state_jacobian
from .probestim import build_equivalent, classify_regime, output_probability

__version__ = "0.1.0"
