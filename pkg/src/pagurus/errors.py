"""Exception types shared across the package."""


class PagurusError(Exception):
    """Base class for package errors."""


class InvalidParamError(PagurusError, ValueError):
    """A parameter is outside its documented domain."""


class UnstableQueueError(PagurusError):
    """Stationary quantities requested for a queue with traffic density >= 1."""


class EmptyWindowError(PagurusError):
    """Rate estimation asked for on an empty observation window."""


class DuplicateActionError(PagurusError):
    """Two manifests share the same action name."""


class MalformedManifestError(PagurusError):
    """A manifest record could not be parsed.

    Carries the offending line number (1-based) when parsed from a file.
    """

    def __init__(self, message, line_no=None):
        super().__init__(message)
        self.line_no = line_no


class UnknownActionError(PagurusError, KeyError):
    """An action name was not found in the registry."""


class PlanMismatchError(PagurusError):
    """A container's packed libraries do not cover a renter's requirement."""


class IllegalTransitionError(PagurusError):
    """A container state transition outside the allowed edge set."""


class StaleContainerError(PagurusError):
    """A matched container was recycled or claimed before handoff completed."""


class WrongAuthorityError(PagurusError):
    """Sealed code opened with an authority that does not match the seal."""


class EmptyHistogramError(PagurusError):
    """Percentile requested from a histogram with no samples."""


class MissingBaselineError(PagurusError):
    """A paired-baseline computation was invoked without its baseline run."""


class MismatchedRunsError(PagurusError):
    """Two reports being compared do not come from paired runs."""


class ConfigError(PagurusError):
    """A scenario document failed validation; message carries the field path."""
