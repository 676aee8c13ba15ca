"""Corpus loading, tokenization, vocabulary and node indexing.

Datasets are line-delimited JSON records with string fields ``id``,
``text``, ``label`` and ``split`` ("train" or "test"). Annotation files
carry dependency edges and token embeddings produced externally; loaders
here validate them against the corpus before any graph is built.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

SPLITS = ("train", "test")

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def tokenize(text: str) -> list[str]:
    """Lowercase, replace ASCII punctuation with spaces, split on whitespace.

    Deterministic and dependency-free; empty tokens are dropped.
    """
    return text.lower().translate(_PUNCT_TABLE).split()


@dataclass(frozen=True)
class Document:
    id: str
    tokens: tuple[str, ...]
    label: int
    split: str


@dataclass
class Corpus:
    documents: list[Document]
    label_names: list[str]

    def __post_init__(self):
        self._by_id = {d.id: k for k, d in enumerate(self.documents)}

    def __len__(self):
        return len(self.documents)

    def position(self, doc_id: str) -> int:
        if doc_id not in self._by_id:
            raise InputError(f"unknown document id {doc_id!r}")
        return self._by_id[doc_id]

    @property
    def n_classes(self) -> int:
        return len(self.label_names)

    def labels(self) -> np.ndarray:
        return np.array([d.label for d in self.documents], dtype=np.int64)


@dataclass
class Vocabulary:
    """Unique retained words ordered by first occurrence in the corpus."""

    words: list[str]
    doc_freq: dict[str, int]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {w: k for k, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise InputError("vocabulary words are not unique")

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.index


@dataclass(frozen=True)
class NodeIndex:
    """Shared node set: documents occupy [0, n_docs), words [n_docs, n)."""

    n_docs: int
    n_words: int

    @property
    def n(self) -> int:
        return self.n_docs + self.n_words

    def doc(self, position: int) -> int:
        return position

    def word(self, vocab_index: int) -> int:
        return self.n_docs + vocab_index


@dataclass
class DepAnnotations:
    """Undirected, deduplicated token-position pairs per document id."""

    pairs: dict[str, frozenset[tuple[int, int]]]

    def for_doc(self, doc_id: str) -> frozenset[tuple[int, int]]:
        return self.pairs.get(doc_id, frozenset())


@dataclass
class EmbeddingAnnotations:
    """Token embeddings: one vector per token position (contextual) or per word (static)."""

    mode: str
    d_emb: int
    contextual: dict[str, np.ndarray] = field(default_factory=dict)
    static: dict[str, np.ndarray] = field(default_factory=dict)
    missing_words: list[str] = field(default_factory=list)


def load_corpus(dataset_path) -> Corpus:
    """Parse a line-delimited dataset; labels map to contiguous class indices
    in first-appearance order."""
    documents = []
    label_names: list[str] = []
    label_index: dict[str, int] = {}
    seen_ids = set()
    with open(dataset_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{dataset_path}:{lineno}: malformed record: {exc}") from exc
            for key in ("id", "text", "label", "split"):
                if key not in record:
                    raise InputError(f"{dataset_path}:{lineno}: missing field {key!r}")
            doc_id = str(record["id"])
            if doc_id in seen_ids:
                raise InputError(f"{dataset_path}:{lineno}: duplicate document id {doc_id!r}")
            seen_ids.add(doc_id)
            split = record["split"]
            if split not in SPLITS:
                raise InputError(
                    f"{dataset_path}:{lineno}: unknown split {split!r} (expected train or test)"
                )
            tokens = tokenize(str(record["text"]))
            if not tokens:
                raise InputError(f"{dataset_path}:{lineno}: document {doc_id!r} is empty after tokenization")
            label = str(record["label"])
            if label not in label_index:
                label_index[label] = len(label_names)
                label_names.append(label)
            documents.append(
                Document(id=doc_id, tokens=tuple(tokens), label=label_index[label], split=split)
            )
    if not documents:
        raise InputError(f"{dataset_path}: empty dataset")
    return Corpus(documents=documents, label_names=label_names)


def save_corpus(corpus: Corpus, path) -> None:
    """Write a corpus back to the dataset format; round-trips tokens, labels and splits."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            record = {
                "id": doc.id,
                "text": " ".join(doc.tokens),
                "label": corpus.label_names[doc.label],
                "split": doc.split,
            }
            fh.write(json.dumps(record) + "\n")


def build_vocab(corpus: Corpus, min_df: int = 1) -> Vocabulary:
    """Retain words with document frequency >= min_df, in first-occurrence order.

    Documents are not re-filtered; out-of-vocabulary tokens are skipped by
    the graph builders downstream.
    """
    if min_df < 1:
        raise InputError(f"min_df must be >= 1, got {min_df}")
    if len(corpus) == 0:
        raise InputError("empty corpus")
    doc_freq: dict[str, int] = {}
    order: list[str] = []
    for doc in corpus.documents:
        for word in dict.fromkeys(doc.tokens):  # each doc counts once per word
            if word not in doc_freq:
                doc_freq[word] = 0
                order.append(word)
            doc_freq[word] += 1
    words = [w for w in order if doc_freq[w] >= min_df]
    if not words:
        raise InputError(f"no words satisfy min_df={min_df}")
    return Vocabulary(words=words, doc_freq={w: doc_freq[w] for w in words})


def make_node_index(corpus: Corpus, vocab: Vocabulary) -> NodeIndex:
    return NodeIndex(n_docs=len(corpus), n_words=len(vocab))


def load_dep_annotations(path, corpus: Corpus) -> DepAnnotations:
    """Load per-document dependency pairs; directed pairs fold to (min, max).

    Documents absent from the file get an empty pair set. Lines starting
    with ``#`` are headers (annotation tools record their parser version
    there) and are skipped.
    """
    pairs: dict[str, frozenset[tuple[int, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed record: {exc}") from exc
            doc_id = str(record.get("id"))
            position = corpus.position(doc_id)  # annotation ids must be corpus ids
            n_tokens = len(corpus.documents[position].tokens)
            folded = set()
            for edge in record.get("edges", []):
                i, j = int(edge[0]), int(edge[1])
                if i == j:
                    raise InputError(f"{path}: document {doc_id!r}: self-pair ({i}, {j})")
                if not (0 <= i < n_tokens and 0 <= j < n_tokens):
                    raise InputError(
                        f"{path}: document {doc_id!r}: position pair ({i}, {j}) out of range "
                        f"for {n_tokens} tokens"
                    )
                folded.add((min(i, j), max(i, j)))
            if doc_id in pairs:
                raise InputError(f"{path}: duplicate annotation for document {doc_id!r}")
            pairs[doc_id] = frozenset(folded)
    return DepAnnotations(pairs=pairs)


def load_embedding_annotations(path, corpus: Corpus, mode: str, vocab: Vocabulary | None = None) -> EmbeddingAnnotations:
    """Load contextual (per token) or static (per word) embeddings.

    Contextual files must cover every corpus document with exactly one
    vector per token. Static files may contain extra words (ignored);
    vocabulary words missing from the file are recorded and treated as
    having no semantic relations.
    """
    if mode == "contextual":
        return _load_contextual(path, corpus)
    if mode == "static":
        if vocab is None:
            raise InputError("static mode requires a vocabulary")
        return _load_static(path, vocab)
    raise InputError(f"unknown embedding mode {mode!r}")


def _load_contextual(path, corpus: Corpus) -> EmbeddingAnnotations:
    vectors: dict[str, np.ndarray] = {}
    d_emb = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed record: {exc}") from exc
            doc_id = str(record.get("id"))
            position = corpus.position(doc_id)
            doc = corpus.documents[position]
            mat = np.asarray(record.get("vectors", []), dtype=np.float64)
            if mat.ndim != 2:
                raise InputError(f"{path}: document {doc_id!r}: ragged or empty vector list")
            if mat.shape[0] != len(doc.tokens):
                raise InputError(
                    f"{path}: document {doc_id!r}: {mat.shape[0]} vectors for "
                    f"{len(doc.tokens)} tokens"
                )
            if d_emb is None:
                d_emb = mat.shape[1]
            elif mat.shape[1] != d_emb:
                raise InputError(
                    f"{path}: document {doc_id!r}: dimension {mat.shape[1]} != {d_emb}"
                )
            if not np.isfinite(mat).all():
                raise InputError(f"{path}: document {doc_id!r}: non-finite embedding values")
            vectors[doc_id] = mat
    missing = [d.id for d in corpus.documents if d.id not in vectors]
    if missing:
        raise InputError(
            f"{path}: contextual embeddings missing for {len(missing)} documents "
            f"(first: {missing[0]!r})"
        )
    return EmbeddingAnnotations(mode="contextual", d_emb=d_emb or 0, contextual=vectors)


def _load_static(path, vocab: Vocabulary) -> EmbeddingAnnotations:
    static: dict[str, np.ndarray] = {}
    d_emb = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 or not parts[0]:
                continue
            word = parts[0]
            if word not in vocab:
                continue
            try:
                vec = np.array([float(x) for x in parts[1:] if x], dtype=np.float64)
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: malformed vector for {word!r}") from exc
            if d_emb is None:
                d_emb = len(vec)
            elif len(vec) != d_emb:
                raise InputError(f"{path}:{lineno}: dimension {len(vec)} != {d_emb}")
            if not np.isfinite(vec).all():
                raise InputError(f"{path}:{lineno}: non-finite embedding values")
            if word in static:
                raise InputError(f"{path}:{lineno}: duplicate vector for {word!r}")
            static[word] = vec
    missing = [w for w in vocab.words if w not in static]
    return EmbeddingAnnotations(
        mode="static", d_emb=d_emb or 0, static=static, missing_words=missing
    )


def make_masks(corpus: Corpus, val_fraction: float, seed: int):
    """Split document nodes into train/val/test boolean masks.

    The validation set is drawn uniformly without replacement from the
    training split with a seeded generator; size is floor(fraction * train)
    but at least one document.
    """
    if not 0.0 < val_fraction < 1.0:
        raise InputError(f"val_fraction must be in (0, 1), got {val_fraction}")
    n = len(corpus)
    train_positions = np.array(
        [k for k, d in enumerate(corpus.documents) if d.split == "train"], dtype=np.int64
    )
    test_positions = np.array(
        [k for k, d in enumerate(corpus.documents) if d.split == "test"], dtype=np.int64
    )
    n_val = max(1, int(len(train_positions) * val_fraction))
    if n_val >= len(train_positions):
        raise InputError(
            f"validation would consume the whole training split "
            f"({n_val} of {len(train_positions)})"
        )
    if len(test_positions) == 0:
        raise InputError("corpus has no test documents")
    rng = np.random.default_rng(seed)
    val_positions = rng.choice(train_positions, size=n_val, replace=False)
    train_mask = np.zeros(n, dtype=bool)
    val_mask = np.zeros(n, dtype=bool)
    test_mask = np.zeros(n, dtype=bool)
    train_mask[train_positions] = True
    train_mask[val_positions] = False
    val_mask[val_positions] = True
    test_mask[test_positions] = True
    return train_mask, val_mask, test_mask
