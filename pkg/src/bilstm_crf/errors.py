"""Exception hierarchy.

The CLI maps each top-level family onto its own exit status, so new
exceptions should subclass one of the families below rather than
``BilstmCrfError`` directly.
"""


class BilstmCrfError(Exception):
    pass


class ConfigError(BilstmCrfError):
    """Bad user-supplied configuration or hyperparameters."""


class FormatError(BilstmCrfError):
    """Malformed input data (corpus, embeddings, model container)."""


class ParseError(FormatError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TagError(ParseError):
    pass


class IOBValidationError(FormatError):
    def __init__(self, message, sentence=None, position=None):
        self.sentence = sentence
        self.position = position
        where = []
        if sentence is not None:
            where.append(f"sentence {sentence}")
        if position is not None:
            where.append(f"position {position}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class EmbeddingFormatError(ParseError):
    pass


class ShapeMismatchError(FormatError):
    """Gold and predicted corpora do not line up."""


class ModelFormatError(FormatError):
    pass


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedModelError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


class DecodeError(BilstmCrfError):
    """No admissible tag path exists under the supplied mask."""


class StaleCacheError(BilstmCrfError):
    pass


class NumericError(BilstmCrfError):
    pass


class DivergenceError(NumericError):
    def __init__(self, epoch, message="non-finite training loss"):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")
