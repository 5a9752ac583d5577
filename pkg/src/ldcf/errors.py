"""Exception hierarchy shared across the toolkit.

Three broad families so the CLI can map failures to exit codes:
ConfigError (bad configuration, exit 2), DataError (bad or missing
input data, exit 3), and plain LdcfError (internal, exit 1).
"""


class LdcfError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LdcfError):
    """Invalid configuration or parameter combination."""


class DataError(LdcfError):
    """Malformed, missing, or inconsistent input data."""


# --- imgio ---

class MalformedHeader(DataError):
    pass


class UnsupportedFormat(DataError):
    pass


class TruncatedData(DataError):
    pass


class MalformedLine(DataError):
    pass


class NegativeDimension(DataError):
    pass


class MissingAnnotation(DataError):
    pass


class EmptyDataset(DataError):
    pass


# --- channels ---

class NotColorImage(DataError):
    pass


class PlaneTooSmall(DataError):
    pass


class InvalidFactor(ConfigError):
    pass


# --- linstats ---

class EmptyImageList(DataError):
    pass


class OffsetOutOfRange(ConfigError):
    pass


class TooFewSamples(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class PatchOutOfBounds(ConfigError):
    pass


class NotSymmetric(DataError):
    pass


class NoConvergence(LdcfError):
    pass


class SingularSystem(LdcfError):
    pass


class NonPositiveEigenvalue(DataError):
    pass


# --- filterbank ---

class KTooLarge(ConfigError):
    pass


class LabelMismatch(DataError):
    pass


# --- boost ---

class DegenerateNode(LdcfError):
    """Raised by split search when a node holds a single class; the
    caller turns the node into a leaf."""


class NoNegativesHarvested(LdcfError):
    """Bootstrap scan found no false positives.  Training proceeds and
    records this as a warning flag on the result; the class exists so
    callers can share the vocabulary."""


class MissingGeometry(ConfigError):
    pass


class EmptyPositives(DataError):
    pass


# --- detect ---

class ImageTooSmall(DataError):
    pass


class GeometryMismatch(ConfigError):
    pass


# --- eval ---

class NoGroundTruth(DataError):
    pass


class EmptyCurve(DataError):
    pass
