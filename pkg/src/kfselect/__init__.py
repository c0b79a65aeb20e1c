"""Greedy sensor selection for Kalman filtering and smoothing with near-optimality certificates."""

from .certificates import (
    CertificateReport,
    alpha_bound_numrange,
    alpha_bound_trace,
    alpha_exhaustive,
    certify,
    epsilon_bound_specnorm,
    epsilon_exhaustive,
    filtering_certificates,
    guarantees,
    smoothing_certificates,
)
from .covariance import (
    HorizonModel,
    InformationModel,
    evaluate_Y,
    filtering_horizon,
    incremental_trace_gain,
    smoothing_horizon,
    smoothing_phi,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    DomainError,
    KFSelectError,
    NumericalError,
    SingularityError,
    SizeError,
    SystemFormatError,
)
from .model import LinearSystem, RiverTree, Sensor, basin_system, random_system, synth_river_tree
from .objective import Objective, SelectionConfig, modular_reference_objective, scalarize
from .selection import (
    SelectionResult,
    exhaustive_select,
    greedy_select,
    random_baseline,
    relative_suboptimality,
)

__version__ = "0.1.0"
