"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`GlobotocError`
and carries a ``module`` tag, which the command line front end copies into its
machine-readable error record.
"""


class GlobotocError(Exception):
    module = "globotoc"


class LatticeError(GlobotocError, ValueError):
    module = "lattice"


class SpreadError(GlobotocError, ValueError):
    module = "spread"


class KnError(GlobotocError, ValueError):
    module = "kn"


class OracleError(GlobotocError, ValueError):
    module = "oracle"


class MQCError(GlobotocError, ValueError):
    module = "mqc"


class AliasingError(MQCError):
    """Phase grid too coarse for the coherence orders present."""


class NoFitError(MQCError):
    """Spectrum support too small for a Gaussian cluster-size fit."""


class ExperimentFormatError(MQCError):
    """Base class for problems with an experiment CSV."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyExperimentError(ExperimentFormatError):
    pass


class MalformedRowError(ExperimentFormatError):
    pass


class NonAscendingTimeError(ExperimentFormatError):
    pass


class NonPositiveSizeError(ExperimentFormatError):
    pass


class FitError(GlobotocError, ValueError):
    module = "scaling"


class WindowMismatchError(FitError):
    pass


class ConfigError(GlobotocError, ValueError):
    module = "cli"
