"""Labeled text datasets for extraction.

Two sources: the builtin desk-scale binary task (`builtin:tiny`), and any
JSONL file of {"text": ..., "label": ...} records. Both return a list of
(text, class_name) pairs in a deterministic order; splitting happens later,
seeded, in the extractor itself.
"""

import json
import os

from .errors import DatasetError

_SUBJECTS = ["the movie", "the film", "this book", "the show",
             "the album", "that play", "the series", "this story"]
_POSITIVE = ["was good", "was great", "felt wonderful", "was excellent",
             "was delightful", "felt brilliant", "was superb", "was charming"]
_NEGATIVE = ["was bad", "was awful", "felt terrible", "was dreadful",
             "was miserable", "felt horrible", "was atrocious", "was dismal"]


def builtin_tiny():
    """128 single-sentence reviews, 64 per class, classes negative/positive."""
    rows = []
    for subject in _SUBJECTS:
        for phrase in _NEGATIVE:
            rows.append((f"{subject} {phrase}", "negative"))
        for phrase in _POSITIVE:
            rows.append((f"{subject} {phrase}", "positive"))
    return rows


def load_dataset(dataset_id):
    """Resolve a dataset identifier to (text, class_name) pairs."""
    if dataset_id == "builtin:tiny":
        return builtin_tiny()
    if os.path.exists(dataset_id) and dataset_id.endswith(".jsonl"):
        rows = []
        with open(dataset_id, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    rows.append((str(rec["text"]), str(rec["label"])))
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise DatasetError(f"{dataset_id}:{lineno}: {e}") from e
        if not rows:
            raise DatasetError(f"{dataset_id} holds no records")
        return rows
    raise DatasetError(f"unknown dataset {dataset_id!r} "
                       "(use builtin:tiny or a .jsonl path)")
