"""Time-varying Levy-driven state-space models: simulation and spectral analysis.

The package computes lag kernels, transition matrices, spectra and sample
paths for linear state-space models whose coefficients drift slowly in
time, and provides numerical checks (stability certificates,
controllability, kernel convergence) for the approximations involved.
"""

__version__ = "0.1.0"

from .errors import (
    TvlsError,
    PreconditionError,
    PostconditionError,
    DivergenceError,
    GridMismatchError,
    SmoothnessError,
    ZeroVarianceError,
    TailMassWarning,
    TruncationWarning,
)
from .levy import (
    LevyModel,
    variance,
    characteristic_exponent,
    sample_increments,
    refine_increments,
)
from .model import (
    ScalarFunction,
    Constant,
    Affine,
    Sinusoidal,
    Logistic,
    PiecewisePolynomial,
    Step,
    Callback,
    MatrixFunction,
    StateSpaceModel,
    CarmaModel,
    companion_from_carma,
    evaluate,
    derivative,
    scalar_from_json,
    model_from_json,
)
from .transition import (
    TransitionMatrix,
    peano_baker,
    ode_transition,
    commutative_transition,
    check_commutativity,
    matrix_exp,
    expm_2x2,
)
from .kernels import (
    KernelGrid,
    car1_kernel,
    car1_limit_kernel,
    statespace_kernel,
    kernel_grid,
    l2_distance,
    convergence_diagnostic,
)
from .spectral import (
    GridConfig,
    SpectrumGrid,
    transfer_function,
    spectral_density,
    covariance,
    wigner_ville,
    wv_convergence,
)
from .stability import (
    StabilityCertificate,
    StabilityFailure,
    lambda_max_check,
    eigen_bound_check,
    commutative_route_check,
    controllability_matrix,
    instantaneous_controllability,
    carma_transform,
    transfer_equivalence,
    structural_break_gap,
)
from .simulate import PathSample, PathEnsemble, simulate_path, simulate_paths, empirical_covariance
