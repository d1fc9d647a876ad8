# Field / Linear Algebra Exceptions
class ZeroInverseError(Exception):
    """Raised when inverting the zero element of a prime field."""
    pass


class DimensionMismatchError(Exception):
    """Raised when matrix or vector shapes do not line up."""
    pass


class SingularMatrixError(Exception):
    """Raised when a matrix that must be inverted has rank below its size."""
    pass


class DuplicatePsiError(Exception):
    """Raised when two databases are assigned the same evaluation point."""
    pass


class InvalidModulusError(Exception):
    """Raised when the field modulus is not a prime."""
    pass


# Codec Exceptions
class BadRampParamsError(Exception):
    """Raised when (D, lambda, extra messages, leak) fall outside the ramp."""
    pass


class NotEnoughRowsError(Exception):
    """Raised when fewer than D distinct coded rows are supplied for reconstruction."""
    pass


class InconsistentRowsError(Exception):
    """Raised when coded symbols fail the symmetric consistency check."""
    pass


class SelfRepairError(Exception):
    """Raised when a database is asked to help repair itself."""
    pass


# Protocol Exceptions
class WrongContributorCountError(Exception):
    """Raised when a common-randomness set is built from other than J+1 contributions."""
    pass


class ZeroContributionError(Exception):
    """Raised when a multiplicative contribution equals zero."""
    pass


class MissingRandomnessError(Exception):
    """Raised when a client lacks the common randomness a phase needs."""
    pass


class MissingRouterAnswerError(Exception):
    """Raised when an expected routing-client answer is absent and uncompensated."""
    pass


class NotEnoughDatabasesError(Exception):
    """Raised when too few live databases remain to serve a download."""
    pass


class InconsistentAnswerError(Exception):
    """Raised when router answers disagree in shape with the storage plan."""
    pass


class MissingShareError(Exception):
    """Raised when a server-randomness refresh lacks one of its two shares."""
    pass


class UnknownDroppedClientError(Exception):
    """Raised when a router is asked to compensate for a client it holds no randomness for."""
    pass


class MissingCompensationError(Exception):
    """Raised when no router can supply the compensation for a dropped database."""
    pass


class NotEnoughHelpersError(Exception):
    """Raised when too few helper databases are available for a repair."""
    pass


class NoMajorityError(Exception):
    """Raised when repetition copies have no value held by a strict majority."""
    pass


class DecodingFailureError(Exception):
    """Raised when Reed-Solomon decoding cannot correct the received word."""
    pass


# Simulation Exceptions
class ScenarioInfeasibleError(Exception):
    """Raised when system parameters or faults violate the protocol's bounds."""
    pass


class ProtocolAbortError(Exception):
    """Raised when a round cannot complete under the injected fault combination."""
    pass


# CLI / Config Exceptions
class ConfigError(Exception):
    """Raised when a scenario file cannot be parsed or validated."""
    pass


class UnknownExampleError(Exception):
    """Raised when a golden example name is not registered."""
    pass
