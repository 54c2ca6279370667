"""Distributed online weighted dual averaging for setpoint tracking with flexible buildings."""

from .core import (
    QUADRATIC,
    DecisionSet,
    EngineConfig,
    EngineTrace,
    FunctionOracle,
    LossOracle,
    ProximalFunction,
    QuadraticProximal,
    dual_update,
    primal_update,
    regularized_projection,
    run,
)
from .topology import (
    MixingParameters,
    NetworkMatrix,
    ValidationReport,
    build_ring,
    estimate_mixing,
    stationary_distribution,
    validate,
)

__version__ = "0.1.0"
