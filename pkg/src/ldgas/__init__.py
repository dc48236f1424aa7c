"""Density fluctuations in ideal quantum gases.

Equation of state and translated pressure (``thermo``), the Legendre-dual
rate function (``rate``), position-space occupation kernels (``kernel``),
determinantal counting statistics in an interval (``counting``), finite
periodic boxes with exact mode laws and sampling (``modes``), and an
experiment harness with a CLI (``harness``, ``cli``).
"""

from .dispersion import DispersionRelation
from .errors import AccuracyError, ConfigError, DomainError, ResourceError
from .thermo import (
    BE,
    FD,
    EosResult,
    ThermoState,
    critical_density,
    density,
    equation_of_state,
    occupation,
    pressure,
    translated_pressure,
)
from .rate import RateContext, RatePoint, interval_rate, minimizer, rate_value
from .kernel import KernelTable, build_kernel, decay_exponent, symbol
from .counting import (
    CountingDistribution,
    CountingMatrix,
    build_counting_matrix,
    chebyshev_bound,
    counting_pmf,
    cumulants_clt,
    lambda_max,
    ldp_log_prob,
    log_generating_function,
    tilted_moments,
    trace_moments,
)
from .modes import (
    KacResult,
    ModeLattice,
    box_log_pgf,
    box_pmf,
    box_pressure,
    kac_test,
    mean_density,
    sample_NV,
    solve_lambda_V,
)
from .harness import ExperimentConfig, ExperimentRecord, emit, run_experiment

__version__ = "0.1.0"
