"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and StageError to exit code 3;
everything else is a plain bug and crashes loudly.
"""


class ConfigError(Exception):
    """Bad configuration: unknown key, unparsable value, violated invariant."""


class DimensionError(ValueError):
    """Image shape incompatible with the requested operation."""


class SizeError(ValueError):
    """A dataset split came out empty although its fraction is positive."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
