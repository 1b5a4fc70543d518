"""tvspec: spectra, controllability and spectral assignment for discrete
time-varying linear systems over finite horizons.

The toolkit estimates exponential-dichotomy and Lyapunov spectra from
sliding-window growth rates, certifies uniform complete controllability
through window Gramians, assigns target spectra by bounded time-varying
state feedback, and bridges continuous systems via their unit-time
discretization.
"""

__version__ = "0.1.0"

from .assignment import (
    AssignmentResult,
    DiagonalTargets,
    TargetSpectrum,
    assign_spectrum,
    assign_window_transition,
    build_diagonal_sequences,
    triangularize_with_feedback,
)
from .continuous import (
    ContinuousSystem,
    DiscretizationResult,
    continuous_spectrum,
    discretize_one_time,
)
from .controllability import (
    UccCertificate,
    check_ucc,
    controllability_gramian,
    min_energy_steering,
    simulate_controlled,
    solution_transition,
)
from .errors import (
    HorizonError,
    InputError,
    NumericalRangeError,
    SingularMatrixError,
    SynthesisError,
    TvspecError,
)
from .evolution import EvolutionCache, evolution, evolution_scaled
from .kernels import BACKEND
from .sequences import (
    Horizon,
    LyapunovValidation,
    MatrixSequence,
    apply_feedback,
    block_triangular,
    constant_sequence,
    diagonal_from_scalars,
    dyadic_scalar_sequence,
    explicit_sequence,
    from_function,
    kinematic_conjugate,
    periodic_sequence,
    random_bounded_sequence,
    random_input_sequence,
    rotation_sequence,
    shift,
    triangular_from_scalars,
    validate_lyapunov,
)
from .spectrum import (
    EDVerdict,
    SpectrumEstimate,
    WindowExponentTable,
    bohl_interval,
    dichotomy_spectrum,
    ed_test,
    lyapunov_spectrum,
    merge_report,
    window_exponents,
)

__all__ = [
    "__version__",
    "BACKEND",
    # sequences
    "Horizon",
    "MatrixSequence",
    "LyapunovValidation",
    "validate_lyapunov",
    "constant_sequence",
    "explicit_sequence",
    "from_function",
    "periodic_sequence",
    "dyadic_scalar_sequence",
    "diagonal_from_scalars",
    "triangular_from_scalars",
    "block_triangular",
    "random_bounded_sequence",
    "random_input_sequence",
    "rotation_sequence",
    "apply_feedback",
    "kinematic_conjugate",
    "shift",
    # evolution
    "EvolutionCache",
    "evolution",
    "evolution_scaled",
    # spectrum
    "WindowExponentTable",
    "window_exponents",
    "EDVerdict",
    "ed_test",
    "SpectrumEstimate",
    "dichotomy_spectrum",
    "bohl_interval",
    "lyapunov_spectrum",
    "merge_report",
    # controllability
    "UccCertificate",
    "check_ucc",
    "controllability_gramian",
    "solution_transition",
    "min_energy_steering",
    "simulate_controlled",
    # assignment
    "TargetSpectrum",
    "DiagonalTargets",
    "build_diagonal_sequences",
    "assign_window_transition",
    "triangularize_with_feedback",
    "assign_spectrum",
    "AssignmentResult",
    # continuous
    "ContinuousSystem",
    "DiscretizationResult",
    "discretize_one_time",
    "continuous_spectrum",
    # errors
    "TvspecError",
    "InputError",
    "HorizonError",
    "SingularMatrixError",
    "NumericalRangeError",
    "SynthesisError",
]
