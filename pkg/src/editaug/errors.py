"""Exception types shared across the package."""


class EditAugError(Exception):
    """Base class for all package errors."""


class EmptyInputError(EditAugError, ValueError):
    """Raised when an operation receives empty text or an empty collection."""


class FormatError(EditAugError, ValueError):
    """Malformed external file (embedding file, pair file, labeled dataset)."""


class DimMismatchError(EditAugError, ValueError):
    """Vector dimensionality does not match the embedding table."""


class DuplicateWordError(EditAugError, ValueError):
    """Attempt to inject a word that is already in the vocabulary."""


class ConfigError(EditAugError, ValueError):
    """Inconsistent configuration values."""


class LengthExceededError(EditAugError, ValueError):
    """Sentence longer than the configured maximum length."""


class NonFiniteInputError(EditAugError, ValueError):
    """NaN or infinity where a finite value is required."""


class EmptyBatchError(EditAugError, ValueError):
    """Training step called with no pairs."""


class GraphNotRecordedError(EditAugError, RuntimeError):
    """backward() called on a value outside a recorded computation."""


class UntrainedModelError(EditAugError, RuntimeError):
    """Inference requested without a usable model checkpoint."""


class DegenerateLabelsError(EditAugError, ValueError):
    """Classifier training data contains fewer than two classes."""


class SplitLeakageError(EditAugError, ValueError):
    """Test sentences found inside the training split."""
