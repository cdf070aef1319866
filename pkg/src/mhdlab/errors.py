"""Exception types shared across the package."""


class GridError(ValueError):
    """Grid shape is unusable (odd, undersized, or mismatched)."""


class ResolutionError(ValueError):
    """A requested field cannot be represented on the given grid."""


class CflError(RuntimeError):
    """Time step exceeds the advective stability bound."""

    def __init__(self, dt, required):
        super().__init__(f"dt={dt:.3e} exceeds CFL bound; use dt <= {required:.3e}")
        self.dt = dt
        self.required = required


class NumericalError(RuntimeError):
    """Non-finite values appeared during time integration."""

    def __init__(self, message, last_healthy_time):
        super().__init__(f"{message} (last healthy time t={last_healthy_time!r})")
        self.last_healthy_time = last_healthy_time


class VerificationError(AssertionError):
    """A verification gate did not pass."""


class ConfigError(ValueError):
    """Scenario or command configuration violates a stated constraint."""
