"""Vocabulary-defined semantics over exported LM representations.

The package turns a language model's output head into an interpretable
coordinate system: pseudoinverse rows act as per-token semantic bases,
representations are scored against them by cosine or matmul logits, and a
small trainable module reshapes representations so same-class samples
cluster around their class basis.
"""

from .basis import (DEFAULT_RCOND, SemanticBases, check_penrose,
                    check_penrose_lowmem, class_basis, class_bases_matrix,
                    embedding_bases, head_bases, load_bases, pseudoinverse,
                    save_bases)
from .bundle import (ReprBundle, SynthSpec, gen_synthetic, read_bundle,
                     validate_bundle, write_bundle)
from .cluster import (FULL_VOCABULARY, LABEL_TOKENS_ONLY, ClusterParams,
                      TrainConfig, TrainReport, ca_forward, grad, init_params,
                      load_module, loss, module_forward, save_module, train,
                      transform_all)
from .errors import (BadMagic, BundleInvalid, DataError, DivergedAtStep,
                     InvalidMode, NonFinite, NumericalError, ShapeMismatch,
                     Truncated, UnsupportedVersion, UsageError, VdsError,
                     ZeroVector)
from .knn import KnnConfig, knn_eval, knn_predict, sibling_rate
from .logits import (PREDICTABLE_MODES, LogitsMode, ProbDist, class_scores,
                     cosine, estimate_flops, exp_transform, mm_logits,
                     predict_all, predict_class, sim_logits, softmax,
                     to_probs)
from .metrics import accuracy, ari, macro_f1

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RCOND", "SemanticBases", "check_penrose",
    "check_penrose_lowmem", "class_basis", "class_bases_matrix",
    "embedding_bases", "head_bases", "load_bases", "pseudoinverse",
    "save_bases",
    "ReprBundle", "SynthSpec", "gen_synthetic", "read_bundle",
    "validate_bundle", "write_bundle",
    "FULL_VOCABULARY", "LABEL_TOKENS_ONLY", "ClusterParams", "TrainConfig",
    "TrainReport", "ca_forward", "grad", "init_params", "load_module",
    "loss", "module_forward", "save_module", "train", "transform_all",
    "BadMagic", "BundleInvalid", "DataError", "DivergedAtStep", "InvalidMode",
    "NonFinite", "NumericalError", "ShapeMismatch", "Truncated",
    "UnsupportedVersion", "UsageError", "VdsError", "ZeroVector",
    "KnnConfig", "knn_eval", "knn_predict", "sibling_rate",
    "PREDICTABLE_MODES", "LogitsMode", "ProbDist", "class_scores", "cosine",
    "estimate_flops", "exp_transform", "mm_logits", "predict_all",
    "predict_class", "sim_logits", "softmax", "to_probs",
    "accuracy", "ari", "macro_f1",
    "__version__",
]
