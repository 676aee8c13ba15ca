"""Synthetic corpora with controllable class signal per graph view.

The complementary corpus splits each class's marker vocabulary into three
groups wired through exactly one word-word graph each: parallel static
embeddings (semantic), dependency pairs (syntactic), or adjacency inside
the co-occurrence window (sequential, built with window size 2). Train and
test documents use disjoint marker words, connected only through unlabeled
bridge documents, so label information must travel over the group's
word-word edges; a mode that misses a group's graph falls to chance on
that group's test documents.

Every noise word appears in every document: its inverse document frequency
is zero (no doc edges) and its window occurrence count is high enough that
pointwise mutual information against markers stays non-positive. Noise
placement is shuffled per document so no marker-noise adjacency repeats
systematically.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

GROUPS = ("sem", "syn", "seq")
NOISE = ("na", "nb", "nc", "nd", "ne")


@dataclass
class SyntheticCorpus:
    dataset_path: str
    dependencies_path: str
    embeddings_path: str  # static word vectors


def _doc(doc_id, tokens, label, split):
    return {"id": doc_id, "text": " ".join(tokens), "label": label, "split": split}


def _fill(template, m1, m2, rng):
    """Place the two markers into the 7-token template; noise is a fresh
    permutation each call. Template is 'gap' (two noise words between
    markers) or 'adjacent'."""
    noise = [NOISE[k] for k in rng.permutation(len(NOISE))]
    if template == "adjacent":
        tokens = [noise[0], noise[1], m1, m2, noise[2], noise[3], noise[4]]
        positions = (2, 3)
    else:
        tokens = [noise[0], m1, noise[1], noise[2], m2, noise[3], noise[4]]
        positions = (1, 4)
    return tokens, positions


def write_complementary_corpus(
    out_dir,
    n_classes: int = 2,
    markers_per_group: int = 3,
    docs_per_cell: int = 6,
    seed: int = 13,
    embedding_dim: int = 32,
) -> SyntheticCorpus:
    """Write dataset, dependency and static-embedding files under out_dir.

    Layout per (class, group): ``docs_per_cell`` train docs over train
    markers; one bridge test doc pairing the head train marker with a relay
    test marker; connector test docs pairing the relay with each plain test
    marker; ``docs_per_cell`` plain test docs over plain test markers only.
    The relay marker never appears in plain test docs, so the only
    supervised path to them runs across two word-word hops of the group's
    own graph.
    """
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    dep_records = []

    def emit(doc_id, group, m1, m2, label, split):
        template = "adjacent" if group == "seq" else "gap"
        tokens, positions = _fill(template, m1, m2, rng)
        records.append(_doc(doc_id, tokens, label, split))
        if group == "syn":
            dep_records.append({"id": doc_id, "edges": [list(positions)]})

    for cls in range(n_classes):
        label = f"c{cls}"
        for group in GROUPS:
            train_markers = [f"{group}{cls}t{j}" for j in range(markers_per_group)]
            relay = f"{group}{cls}x0"
            plain = [f"{group}{cls}x{j}" for j in range(1, markers_per_group)]
            for d in range(docs_per_cell):
                m1, m2 = rng.choice(train_markers, size=2, replace=False)
                emit(f"{label}-{group}-train{d}", group, m1, m2, label, "train")
            emit(f"{label}-{group}-bridge", group, train_markers[0], relay, label, "test")
            for j, marker in enumerate(plain):
                emit(f"{label}-{group}-connector{j}", group, relay, marker, label, "test")
            for d in range(docs_per_cell):
                m1, m2 = rng.choice(plain, size=2, replace=False)
                emit(f"{label}-{group}-test{d}", group, m1, m2, label, "test")

    # static embeddings: sem markers of one class share a direction; all other
    # words are isotropic noise that stays far below the 0.9 cosine threshold
    vocab = sorted({t for r in records for t in r["text"].split()})
    lines = []
    for word in vocab:
        if word[:3] == "sem" and word[3].isdigit():
            axis = np.zeros(embedding_dim)
            axis[int(word[3]) % embedding_dim] = 1.0
            vec = axis + rng.normal(0, 0.01, size=embedding_dim)
        else:
            vec = rng.normal(0, 1.0, size=embedding_dim)
        lines.append(word + " " + " ".join(repr(float(x)) for x in vec))

    dataset_path = f"{out_dir}/dataset.jsonl"
    dependencies_path = f"{out_dir}/dependencies.jsonl"
    embeddings_path = f"{out_dir}/static_vectors.txt"
    with open(dataset_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(json.dumps(r) for r in records) + "\n")
    with open(dependencies_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(json.dumps(r) for r in dep_records) + "\n")
    with open(embeddings_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return SyntheticCorpus(dataset_path, dependencies_path, embeddings_path)


def write_tiny_corpus(out_dir, n_docs: int = 12) -> SyntheticCorpus:
    """Deterministic 12-document corpus with all three annotation files;
    small enough for CLI round-trip and conformance tests."""
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    topics = {
        "c0": ["market", "trade", "stocks", "price", "economy"],
        "c1": ["match", "goal", "team", "league", "score"],
    }
    records = []
    dep_records = []
    for k in range(n_docs):
        label = "c0" if k % 2 == 0 else "c1"
        words = topics[label]
        tokens = [words[k % len(words)], "the", words[(k + 1) % len(words)], "daily", words[(k + 2) % len(words)]]
        split = "train" if k < n_docs // 2 else "test"
        records.append(_doc(f"doc{k}", tokens, label, split))
        dep_records.append({"id": f"doc{k}", "edges": [[0, 2], [2, 4]]})
    rng = np.random.default_rng(5)
    vocab = sorted({t for r in records for t in r["text"].split()})
    lines = []
    for word in vocab:
        vec = rng.normal(0, 1.0, size=8)
        lines.append(word + " " + " ".join(repr(float(x)) for x in vec))
    dataset_path = f"{out_dir}/dataset.jsonl"
    dependencies_path = f"{out_dir}/dependencies.jsonl"
    embeddings_path = f"{out_dir}/static_vectors.txt"
    with open(dataset_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(json.dumps(r) for r in records) + "\n")
    with open(dependencies_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(json.dumps(r) for r in dep_records) + "\n")
    with open(embeddings_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return SyntheticCorpus(dataset_path, dependencies_path, embeddings_path)


def write_separable_corpus(out_dir) -> str:
    """Eight documents whose class words never mix; a two-layer model on any
    of the graphs separates them."""
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    records = []
    for k in range(8):
        label = "c0" if k % 2 == 0 else "c1"
        words = ["alpha", "apex", "arc"] if label == "c0" else ["bay", "bolt", "bend"]
        tokens = [words[k % 3], words[(k + 1) % 3], "filler"]
        split = "train" if k < 6 else "test"
        records.append(_doc(f"s{k}", tokens, label, split))
    path = f"{out_dir}/separable.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(json.dumps(r) for r in records) + "\n")
    return path
