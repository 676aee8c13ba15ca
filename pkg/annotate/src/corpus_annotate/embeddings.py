"""Contextual token embeddings from a small LSTM classifier.

A single-layer unidirectional LSTM is fit as a document classifier on the
training split only (final hidden state, linear readout); the per-token
hidden states are then exported for every document in the corpus. Word
embeddings can start from pre-trained vectors in the plain text
``word f1 ... fd`` format. The whole run is deterministic for a fixed
seed: single-threaded, fixed batch order.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .dataset import Record

EXPORTER_VERSION = "lstm-annotate-1"


def load_pretrained(path, dim: int) -> dict[str, np.ndarray]:
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 or not parts[0]:
                continue
            vec = np.array([float(x) for x in parts[1:] if x], dtype=np.float32)
            if len(vec) != dim:
                raise ValueError(
                    f"pretrained vector for {parts[0]!r} has dimension {len(vec)}, expected {dim}"
                )
            vectors[parts[0]] = vec
    return vectors


class TokenClassifier(nn.Module):
    def __init__(self, vocab_size: int, dim: int, n_classes: int):
        super().__init__()
        self.embed = nn.Embedding(vocab_size + 1, dim, padding_idx=vocab_size)
        self.lstm = nn.LSTM(dim, dim, num_layers=1, batch_first=True)
        self.readout = nn.Linear(dim, n_classes)

    def forward(self, batch, lengths):
        x = self.embed(batch)
        packed = nn.utils.rnn.pack_padded_sequence(
            x, lengths, batch_first=True, enforce_sorted=False
        )
        states, (final_hidden, _) = self.lstm(packed)
        states, _ = nn.utils.rnn.pad_packed_sequence(states, batch_first=True)
        return states, self.readout(final_hidden[-1])


def _batches(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def train_and_embed(
    records: list[Record],
    dim: int = 300,
    epochs: int = 8,
    lr: float = 1e-3,
    seed: int = 0,
    batch_size: int = 32,
    pretrained: dict[str, np.ndarray] | None = None,
) -> dict[str, np.ndarray]:
    """Fit the classifier on the training split and return per-token hidden
    states (one array of shape (n_tokens, dim) per document id)."""
    torch.manual_seed(seed)
    torch.set_num_threads(1)

    vocab = {}
    for record in records:
        for token in record.tokens:
            vocab.setdefault(token, len(vocab))
    labels = {}
    for record in records:
        labels.setdefault(record.label, len(labels))

    model = TokenClassifier(len(vocab), dim, len(labels))
    if pretrained:
        with torch.no_grad():
            hit = 0
            for word, idx in vocab.items():
                vec = pretrained.get(word)
                if vec is not None:
                    model.embed.weight[idx] = torch.from_numpy(vec)
                    hit += 1
        if hit == 0:
            raise ValueError("no pretrained vector matched any corpus word")

    pad = len(vocab)

    def tensorize(batch):
        lengths = torch.tensor([len(r.tokens) for r in batch])
        ids = torch.full((len(batch), int(lengths.max())), pad, dtype=torch.long)
        for row, record in enumerate(batch):
            ids[row, : len(record.tokens)] = torch.tensor(
                [vocab[t] for t in record.tokens], dtype=torch.long
            )
        return ids, lengths

    train_records = [r for r in records if r.split == "train"]
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    model.train()
    for _ in range(epochs):
        for batch in _batches(train_records, batch_size):
            ids, lengths = tensorize(batch)
            targets = torch.tensor([labels[r.label] for r in batch])
            optimizer.zero_grad()
            _, logits = model(ids, lengths)
            loss_fn(logits, targets).backward()
            optimizer.step()

    model.eval()
    out = {}
    with torch.no_grad():
        for batch in _batches(records, batch_size):
            ids, lengths = tensorize(batch)
            states, _ = model(ids, lengths)
            for row, record in enumerate(batch):
                out[record.id] = states[row, : len(record.tokens)].numpy().astype(np.float64)
    return out


def write_contextual(path, records: list[Record], states: dict[str, np.ndarray], meta: str):
    import json

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {meta}\n")
        for record in records:
            mat = states[record.id]
            if mat.shape[0] != len(record.tokens):
                raise ValueError(
                    f"{record.id}: {mat.shape[0]} vectors for {len(record.tokens)} tokens"
                )
            fh.write(
                json.dumps({"id": record.id, "vectors": [[float(x) for x in row] for row in mat]})
                + "\n"
            )
