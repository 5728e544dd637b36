"""Exception hierarchy shared across the package.

Three families map onto the CLI exit codes: configuration problems (exit 3),
assumption/validation failures (exit 1), and numerical failures (exit 2).
"""


class TerraceLabError(Exception):
    """Base class for all package errors."""


class ConfigError(TerraceLabError):
    """Malformed or inconsistent run configuration."""


class ValidationError(TerraceLabError):
    """An assumption or precondition on the mathematical input failed."""


class NumericalError(TerraceLabError):
    """A numerical procedure failed or produced an unusable result."""


# -- nonlinearity ------------------------------------------------------------

class RangeError(ValidationError):
    """Evaluation requested outside the admissible argument range."""


class DegenerateZeroError(ValidationError):
    """A root with |f'| below the nondegeneracy gate was found."""


class ResolutionError(NumericalError):
    """Two roots closer than the scan resolution; rerun with a finer scan."""


# -- front -------------------------------------------------------------------

class SingularityError(NumericalError):
    """Adaptive stepping underflowed near the phase-plane singularity."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class AmbiguousConnectionError(NumericalError):
    """Shooting outcomes were not monotone in c during bisection."""

    def __init__(self, message, scan_trace=None):
        super().__init__(message)
        self.scan_trace = scan_trace or []


# -- terrace -----------------------------------------------------------------

class DecompositionError(NumericalError):
    """No admissible chain of fronts was found; numerics are suspect."""

    def __init__(self, message, pair_table=None):
        super().__init__(message)
        self.pair_table = pair_table or []


class AmbiguityError(NumericalError):
    """More than one admissible chain survived; flags a numerical speed tie."""

    def __init__(self, message, chains=None):
        super().__init__(message)
        self.chains = chains or []


# -- pde solvers -------------------------------------------------------------

class CflError(ConfigError):
    """Time step violates the stability constraint of the explicit scheme."""


class InstabilityError(NumericalError):
    """NaN/overflow during time marching."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConstructionError(NumericalError):
    """Initial-data construction failed (e.g. the seed never reached zero)."""


class InconclusiveError(NumericalError):
    """A classification run met neither criterion within the horizon."""

    def __init__(self, message, suggested_horizon=None):
        super().__init__(message)
        self.suggested_horizon = suggested_horizon


# -- level sets / rings -------------------------------------------------------

class MonotonicityViolationError(NumericalError):
    """Multiple level crossings after the track became valid."""


class RingTimeError(NumericalError):
    """Ring extraction requested before all directions cross uniquely."""

    def __init__(self, message, earliest_admissible=None):
        super().__init__(message)
        self.earliest_admissible = earliest_admissible


# -- comparison ---------------------------------------------------------------

class ExtractionError(NumericalError):
    """Super/subsolution constants could not be extracted (band too wide)."""
