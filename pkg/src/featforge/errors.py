class FeatForgeError(Exception):
    """Base class for errors raised by featforge."""


class ConfigError(FeatForgeError):
    """Invalid run configuration (bad keys, missing columns, bad ratios)."""


class DataError(FeatForgeError):
    """Input data could not be loaded or parsed."""


class StageError(FeatForgeError):
    """A pipeline stage failed; wraps the original error with stage context."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
