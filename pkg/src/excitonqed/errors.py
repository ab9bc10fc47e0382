"""Exception hierarchy shared by every module."""


class ExcitonQEDError(Exception):
    """Base class for all package errors."""


class InvalidParams(ExcitonQEDError, ValueError):
    """Physical or run parameters violate their invariants."""


class MissingBareCouplings(ExcitonQEDError):
    """The dispersive validity check needs both g and delta."""


class TruncationTooSmall(ExcitonQEDError):
    """Coherent-state tail beyond the Fock cutoff exceeds the tolerance."""


class DimensionMismatch(ExcitonQEDError, ValueError):
    pass


class NotAState(ExcitonQEDError, ValueError):
    """Matrix is not a unit-trace Hermitian density operator."""


class NumericalFailure(ExcitonQEDError):
    """Base for integrator failures (CLI exit status 2)."""


class TruncationLeak(NumericalFailure):
    def __init__(self, leak: float, dim: int, time: float):
        self.leak = leak
        self.dim = dim
        self.time = time
        super().__init__(
            f"population {leak:.3e} in the top two Fock levels of a dim={dim} "
            f"basis at t={time:g}; increase fock_dim"
        )


class StepTooLarge(NumericalFailure):
    def __init__(self, certificate):
        self.certificate = certificate
        super().__init__(
            f"half-step deviation {certificate.max_deviation:.3e} exceeds "
            f"{certificate.threshold:.1e} at step {certificate.step:g}; "
            f"retry with --step {certificate.half_step:g} or smaller"
        )
