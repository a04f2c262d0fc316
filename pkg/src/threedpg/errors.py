class ThreeDPGError(Exception):
    pass


class ConfigurationError(ThreeDPGError, ValueError):
    """Dimension mismatch, bad bounds, invalid run configuration."""


class NonFiniteParameterError(ThreeDPGError, FloatingPointError):
    pass


class StaleTapeError(ThreeDPGError, RuntimeError):
    """An evaluation tape was reused with parameters it was not produced from."""


class ActionBoundsError(ThreeDPGError, ValueError):
    """An action component lies outside its bound interval."""


class PolicyNotInitializedError(ThreeDPGError, KeyError):
    pass


class DataCorruptionError(ThreeDPGError, ValueError):
    pass


class InsufficientDataError(ThreeDPGError, ValueError):
    pass


class StabilityViolation(ThreeDPGError, RuntimeError):
    """Parameter norm crossed the configured ceiling."""


class DiagnosticUnavailable(ThreeDPGError, RuntimeError):
    pass


class SchemaError(ThreeDPGError, ValueError):
    pass


class ConfigMismatchError(ThreeDPGError, ValueError):
    def __init__(self, diff: dict):
        self.diff = diff
        lines = [f"{key}: {a!r} != {b!r}" for key, (a, b) in sorted(diff.items())]
        super().__init__("run configurations differ:\n  " + "\n  ".join(lines))
