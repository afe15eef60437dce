"""All-optical EIT spin-echo simulator for three-level lambda systems."""

from .qstate import (
    DensityMatrix3,
    GroundQubitState,
    bloch_vector,
    fidelity,
    trace_distance,
)
from .lambda_system import (
    BrightDarkBasis,
    LambdaParams,
    bright_dark_basis,
    coupling_strengths,
    hamiltonian,
    lindblad_rhs,
)
from .dynamics import PulseSpec, SequenceSpec, Trajectory, Wait, bandwidth, propagate, run_sequence
from .sequences import (
    EchoConfig,
    make_echo_sequence,
    make_init_pulse,
    make_readout_pulse,
    make_rephase_pulse,
)
from .ensemble import EnsembleSpec, detuning_grid, ensemble_average
from .tomography import (
    TomographyResult,
    measure_populations,
    projection_measurements,
    reconstruct,
)
from .readout import (
    BeatTrace,
    DecayCurve,
    FitResult,
    assemble_decay_curve,
    beat_amplitude,
    fit_decay,
    synthesize_beat,
)
from .studies import (
    FieldModel,
    ScalingModel,
    TemperatureModel,
    compensation_search,
    field_sweep,
    scaling_study,
    splitting_from_field,
    temperature_scan,
)
from .config import RunConfig, parse_config, validate_config

__version__ = "0.1.0"

__all__ = [
    "BeatTrace", "BrightDarkBasis", "DecayCurve", "DensityMatrix3", "EchoConfig",
    "EnsembleSpec", "FieldModel", "FitResult", "GroundQubitState", "LambdaParams",
    "PulseSpec", "RunConfig", "ScalingModel", "SequenceSpec", "TemperatureModel",
    "TomographyResult", "Trajectory", "Wait", "assemble_decay_curve", "bandwidth",
    "beat_amplitude", "bloch_vector", "bright_dark_basis", "compensation_search",
    "coupling_strengths", "detuning_grid", "ensemble_average", "fidelity",
    "field_sweep", "fit_decay", "hamiltonian", "lindblad_rhs", "make_echo_sequence",
    "make_init_pulse", "make_readout_pulse", "make_rephase_pulse",
    "measure_populations", "parse_config", "projection_measurements", "propagate",
    "reconstruct", "run_sequence", "scaling_study", "splitting_from_field",
    "synthesize_beat", "temperature_scan", "trace_distance", "validate_config",
]
