"""Typed failures, mapped onto the same exit-code taxonomy the vds CLI uses:
1 for usage problems, 2 for data problems, 3 for numerical/consistency
failures detected after the data loaded cleanly."""


class ExtractorError(Exception):
    exit_code = 2


class UsageError(ExtractorError):
    exit_code = 1


class DataError(ExtractorError):
    exit_code = 2


class TemplateInvalid(DataError):
    """Prompt template must contain the input placeholder exactly once."""


class VerbalizerInvalid(DataError):
    """Verbalizer file malformed, or a label string tokenized to nothing."""


class DatasetError(DataError):
    """Unknown dataset id, unreadable file, or not enough samples."""


class ModelLoadError(DataError):
    """Neither the requested checkpoint nor the fallback could be built."""


class OrientationMismatch(ExtractorError):
    """Exported head does not reproduce the runtime's own logits: the matrix
    is transposed, the wrong tensor, or the model applies a bias/normalization
    the export cannot represent."""

    exit_code = 3
