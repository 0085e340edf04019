"""Exception hierarchy shared by every stage of the pipeline."""


class DexRetargetError(Exception):
    """Base class for all errors raised by this package."""


class ModelSyntaxError(DexRetargetError):
    """Robot-description document is not well-formed."""


class ModelError(DexRetargetError):
    """Robot-description document is well-formed but structurally invalid."""


class DimensionMismatch(DexRetargetError, ValueError):
    pass


class UnknownSite(DexRetargetError, LookupError):
    def __init__(self, name):
        super().__init__(f"unknown site {name!r}")
        self.name = name


class NonFiniteLoss(DexRetargetError, ArithmeticError):
    pass


class DegenerateInput(DexRetargetError, ValueError):
    pass


class EmptyOverlap(DexRetargetError, ValueError):
    pass


class NonMonotonicTimestamps(DexRetargetError, ValueError):
    pass


class NotConverged(DexRetargetError):
    """IK did not reach tolerance. Carries the best-effort solution."""

    def __init__(self, message, q=None, diagnostics=None):
        super().__init__(message)
        self.q = q
        self.diagnostics = diagnostics


class ManifestError(DexRetargetError):
    pass


class BlobSizeMismatch(ManifestError):
    pass


class UnsupportedVersion(ManifestError):
    pass


class LengthMismatch(DexRetargetError, ValueError):
    pass


class LayoutError(DexRetargetError, ValueError):
    pass


class ConfigError(DexRetargetError):
    pass
