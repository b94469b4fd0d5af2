"""Exception types shared across the engine.

Everything deriving from :class:`EngineError` is an expected failure caused by
inputs (missing files, malformed records, impossible configurations) and maps
to exit code 1 at the CLI. Anything else escaping a command is a bug and maps
to exit code 2.
"""


class EngineError(Exception):
    """Base class for user-facing failures."""


class DatasetError(EngineError):
    """Malformed or inconsistent dataset files."""


class VocabularyError(EngineError):
    """Malformed vocabulary or pre-tokenized catalog files."""


class TokenizationError(EngineError):
    """Text that cannot be mapped to token ids."""


class PromptError(EngineError):
    """A query whose prompt cannot fit the sequence budget."""


class TableFormatError(EngineError):
    """Corrupt or mismatched logit-table files."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ShapeError(EngineError):
    """Array dimensions that do not match the catalog or vocabulary."""


class EvaluationError(EngineError):
    """Evaluation requested over inconsistent or empty inputs."""


class UsageError(EngineError):
    """Bad command-line arguments."""
