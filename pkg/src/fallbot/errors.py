"""Exception types raised across the toolkit.

Every error the package raises deliberately derives from ToolkitError, so
callers (and the command line front end) can catch one base class and map
specific failures to specific exit codes.
"""


class ToolkitError(Exception):
    """Base class for all errors raised intentionally by this package."""


# --- projective geometry ---------------------------------------------------

class SingularHomography(ToolkitError):
    """A computed 3x3 map is (numerically) rank deficient and cannot be used."""


class InvalidPlane(ToolkitError):
    """A plane was given a normal that is not unit length (or not finite)."""


class PointAtInfinity(ToolkitError):
    """A mapped point has no finite image (its homogeneous scale vanished)."""


class InvalidRange(ToolkitError):
    """A numeric range or count parameter is out of its documented domain."""


class UnreadableImage(ToolkitError):
    """An image file could not be opened or decoded."""


# --- drivetrain calibration ------------------------------------------------

class MissingParams(ToolkitError):
    """No fitted coefficients exist for the requested wheel/direction."""


class InsufficientData(ToolkitError):
    """Too few usable samples remain to fit anything at all."""


class DegenerateRegressor(ToolkitError):
    """All regressor values inside a group coincide; the fit is undetermined."""


class SingularInversion(ToolkitError):
    """A duty-cycle value sits on the pole of the inverse speed model."""


# --- fall detection ----------------------------------------------------------

class MalformedDetection(ToolkitError):
    """A pose detection violates the documented record layout."""


class ShapeMismatch(ToolkitError):
    """Network weights have inconsistent layer shapes."""


class EmptyClass(ToolkitError):
    """A training set is missing one of the two labels entirely."""


class NonfiniteLoss(ToolkitError):
    """Training produced a NaN or infinite loss value."""


class ParseError(ToolkitError):
    """A structured input file could not be parsed."""


# --- simulation and pipeline -------------------------------------------------

class InvalidConfig(ToolkitError):
    """A configuration value is missing, malformed, or out of domain."""


class EmptyLog(ToolkitError):
    """A trajectory log holds no poses."""


class EmptyCandidates(ToolkitError):
    """Candidate selection was invoked with no candidates."""


class AdapterUnavailable(ToolkitError):
    """Image input was supplied but no pose adapter is configured/usable."""
