"""Exception hierarchy shared by every stage of the land-use pipeline."""


class LandUseError(Exception):
    """Base class for all errors raised by this package."""


class InputError(LandUseError):
    """Malformed or missing input (maps to CLI exit status 2)."""


class ConfigError(InputError):
    pass


class DuplicateSiteError(InputError):
    pass


class EmptySitesError(InputError):
    pass


class MissingTowerError(InputError):
    pass


class EmptySamplesError(InputError):
    pass


class NoActivityError(LandUseError):
    """A series has zero total activity and cannot be normalized."""


class EmptyClassError(LandUseError):
    pass


class DimensionMismatchError(LandUseError):
    pass


class TooFewPointsError(LandUseError):
    pass


class SingleClusterError(LandUseError):
    pass


class NoOverlapError(LandUseError):
    pass


class NoEvaluableCellsError(LandUseError):
    pass


class UnsatisfiableError(LandUseError):
    pass


class StageError(LandUseError):
    """Wraps an error with the pipeline stage in which it occurred."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")

    @property
    def exit_code(self):
        if isinstance(self.cause, (InputError, FileNotFoundError)):
            return 2
        return 1
