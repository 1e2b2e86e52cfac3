"""Exception and warning types shared across flowbench."""


class FlowbenchError(Exception):
    """Base class for errors raised by flowbench."""


class MalformedHeader(FlowbenchError, ValueError):
    """The pcap global header is missing, truncated or unsupported."""


class FlowbenchWarning(UserWarning):
    """Base class for warnings that are surfaced in evaluation reports."""


class TruncatedRecordWarning(FlowbenchWarning):
    """A pcap record was cut short; parsing stopped early."""


class EmptyInput(FlowbenchError, ValueError):
    pass


class InsufficientData(FlowbenchError, ValueError):
    pass


class DimensionMismatch(FlowbenchError, ValueError):
    pass


class ZeroDurationWarning(FlowbenchWarning):
    """A flow's packets share one timestamp; rates use a 1e-6 s floor."""


class NonConvergenceWarning(FlowbenchWarning):
    pass


class DegenerateComponent(FlowbenchError, ArithmeticError):
    """A mixture covariance stayed singular after regularization and a re-seed."""


class NonFiniteLoss(FlowbenchError, FloatingPointError):
    pass


class NonFiniteScore(FlowbenchError, ValueError):
    pass


class SingleClass(FlowbenchError, ValueError):
    pass


class MissingCell(FlowbenchError, KeyError):
    pass


class InvalidProfile(FlowbenchError, ValueError):
    pass


class ManifestError(FlowbenchError, ValueError):
    pass
