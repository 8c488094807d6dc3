"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid user-supplied configuration (bad field, duplicate paths, ...)."""


class FormatError(ValueError):
    """Corrupt or truncated serialized artifact.

    ``offset`` is the byte offset of the first line that failed to parse.
    """

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
