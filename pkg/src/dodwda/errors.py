"""Exception types shared across the package."""


class DodwdaError(Exception):
    """Base class for all package errors."""


class ContractViolation(DodwdaError, ValueError):
    """An operation was called with inputs that break its preconditions."""


class InvalidTopology(ContractViolation):
    """A network matrix that cannot satisfy the connectivity assumptions."""


class InvalidInputs(ContractViolation):
    """Bound constants outside their admissible ranges."""


class NumericFailure(DodwdaError, RuntimeError):
    """An iterative numerical routine failed to reach its tolerance."""


class MixingEstimationError(NumericFailure):
    """The fitted geometric mixing rate is not below one."""


class OracleError(DodwdaError, RuntimeError):
    """A loss oracle failed during a run; ``round`` records where."""

    def __init__(self, message: str, round: int, agent: int | None = None):
        super().__init__(message)
        self.round = round
        self.agent = agent


class InfeasibleSetpoint(DodwdaError, ValueError):
    """The setpoint lies outside the aggregate capacity interval."""

    def __init__(self, setpoint: float, lower: float, upper: float):
        super().__init__(
            f"setpoint {setpoint:.6g} kW outside aggregate capacity [{lower:.6g}, {upper:.6g}] kW"
        )
        self.setpoint = setpoint
        self.interval = (lower, upper)
