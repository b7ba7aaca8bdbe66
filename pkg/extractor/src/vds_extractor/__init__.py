"""Extraction bridge: real language models in, VDSR bundles out.

Independent of the vds toolkit by design; the VDSR byte format and the vds
command line are the only shared surface.
"""

from .datasets import builtin_tiny, load_dataset
from .errors import (DataError, DatasetError, ExtractorError, ModelLoadError,
                     OrientationMismatch, TemplateInvalid, UsageError,
                     VerbalizerInvalid)
from .pipeline import ExtractSpec, extract
from .model_io import export_head, forward_last_position, load_model
from .tokenizer import WordHashTokenizer, resolve_verbalizer
from .vdsr import read_vdsr, write_vdsr

__version__ = "0.1.0"

__all__ = [
    "DataError", "DatasetError", "ExtractSpec", "ExtractorError",
    "ModelLoadError", "OrientationMismatch", "TemplateInvalid", "UsageError",
    "VerbalizerInvalid", "WordHashTokenizer", "builtin_tiny", "export_head",
    "extract", "forward_last_position", "load_dataset", "load_model",
    "read_vdsr", "resolve_verbalizer", "write_vdsr",
]
