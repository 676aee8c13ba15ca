"""Dataset reading and tokenization, matching the consumer's file contract.

The tokenizer must agree token-for-token with the classifier pipeline that
ingests these annotations: lowercase, ASCII punctuation replaced by
spaces, whitespace split, empty tokens dropped.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def tokenize(text: str) -> list[str]:
    return text.lower().translate(_PUNCT_TABLE).split()


@dataclass(frozen=True)
class Record:
    id: str
    tokens: tuple[str, ...]
    label: str
    split: str


def load_dataset(path) -> list[Record]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            doc_id = str(raw["id"])
            if doc_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            tokens = tokenize(str(raw["text"]))
            if not tokens:
                raise ValueError(f"{path}:{lineno}: document {doc_id!r} has no tokens")
            if raw["split"] not in ("train", "test"):
                raise ValueError(f"{path}:{lineno}: unknown split {raw['split']!r}")
            records.append(
                Record(id=doc_id, tokens=tuple(tokens), label=str(raw["label"]), split=raw["split"])
            )
    if not records:
        raise ValueError(f"{path}: empty dataset")
    return records
