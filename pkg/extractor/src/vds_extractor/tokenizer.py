"""Verbalizer token resolution, plus an offline-safe fallback tokenizer.

Labels are tokenized with a leading space because that is the position the
label word occupies in a completed prompt: right after a field name like
"sentiment:". Subword tokenizers assign different ids to word-initial and
mid-sentence pieces, so skipping the space would resolve ids the model
never actually produces there.
"""

import hashlib
import re

from .errors import VerbalizerInvalid

FALLBACK_VOCAB = 50257  # GPT-2-class vocabulary size
_WORD = re.compile(r"[^\s]+")


class WordHashTokenizer:
    """Deterministic stand-in used when no pretrained tokenizer is available.

    Splits on whitespace and maps each word to a stable id via SHA-256 (never
    Python's randomized hash). For realistic vocabularies ids land in
    [257, vocab_size - 2], keeping 0-256 and the top id clear the way
    byte-level vocabularies do; tiny vocabularies drop the reserved range.
    One id per word, so multi-word labels resolve to multiple ids, which is
    the property the pipeline actually relies on.
    """

    def __init__(self, vocab_size=FALLBACK_VOCAB):
        if vocab_size < 2:
            raise ValueError(f"vocab_size {vocab_size} too small")
        self.vocab_size = vocab_size
        self.eos_token_id = vocab_size - 1
        self._lo = 257 if vocab_size > 1024 else 0
        self._span = vocab_size - 1 - self._lo  # top id stays clear

    def encode(self, text, add_special_tokens=False):
        ids = []
        for word in _WORD.findall(text):
            digest = hashlib.sha256(word.encode("utf-8")).digest()
            ids.append(self._lo + int.from_bytes(digest[:8], "little") % self._span)
        return ids


def resolve_verbalizer(tokenizer, label):
    """Token ids of a label string tokenized with a leading space."""
    if not label or not label.strip():
        raise VerbalizerInvalid("empty label string")
    try:
        ids = tokenizer.encode(" " + label, add_special_tokens=False)
    except TypeError:
        ids = tokenizer.encode(" " + label)
    ids = [int(t) for t in ids]
    if not ids:
        raise VerbalizerInvalid(f"label {label!r} tokenized to nothing")
    return ids
