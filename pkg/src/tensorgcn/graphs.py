"""Construction of the three word-word graphs plus shared TF-IDF doc-word
edges, assembly into a graph tensor over one node set, and symmetric
normalization.

All builders count at document granularity: a document is the
co-occurrence unit both for the relation numerators and for the shared
denominator (number of documents containing both words). Out-of-vocabulary
tokens keep their positions but never produce edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, DepAnnotations, EmbeddingAnnotations, NodeIndex, Vocabulary
from .errors import InputError
from .linalg import csr_from_coo

GRAPH_NAMES = ("semantic", "syntactic", "sequential")


class EdgeList:
    """Symmetric weighted edges: both directions stored with equal weight."""

    def __init__(self):
        self._weights: dict[tuple[int, int], float] = {}

    def add(self, u: int, v: int, weight: float) -> None:
        if u == v:
            raise InputError(f"self-loop ({u}, {u}) not allowed")
        if not math.isfinite(weight):
            raise InputError(f"non-finite weight on edge ({u}, {v})")
        for key in ((u, v), (v, u)):
            existing = self._weights.get(key)
            if existing is not None and existing != weight:
                raise InputError(
                    f"conflicting duplicate edge ({key[0]}, {key[1]}): "
                    f"{existing} vs {weight}"
                )
            self._weights[key] = weight

    def __len__(self):
        return len(self._weights)

    def n_undirected(self) -> int:
        return len(self._weights) // 2

    def items(self):
        return self._weights.items()

    def weight(self, u: int, v: int) -> float:
        return self._weights.get((u, v), 0.0)


@dataclass
class TextGraphTensor:
    """Ordered sparse adjacencies sharing one node set; zero diagonals."""

    node_index: NodeIndex
    graphs: list[sp.csr_matrix]
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.graphs) != len(self.names):
            raise InputError("graph/name count mismatch")
        if not self.graphs:
            raise InputError("a graph tensor needs at least one graph")
        n = self.node_index.n
        for name, g in zip(self.names, self.graphs):
            if g.shape != (n, n):
                raise InputError(f"graph {name!r} has shape {g.shape}, expected {(n, n)}")

    @property
    def r(self) -> int:
        return len(self.graphs)

    def subset(self, names) -> "TextGraphTensor":
        keep = tuple(names)
        missing = [x for x in keep if x not in self.names]
        if missing:
            raise InputError(f"unknown graph names: {missing}")
        picked = [self.graphs[self.names.index(x)] for x in keep]
        return TextGraphTensor(node_index=self.node_index, graphs=picked, names=keep)


@dataclass
class NormalizedTensor:
    """Symmetrically normalized adjacencies with self-loops added."""

    node_index: NodeIndex
    graphs: list[sp.csr_matrix]
    names: tuple[str, ...]

    @property
    def r(self) -> int:
        return len(self.graphs)


def tfidf_edges(corpus: Corpus, vocab: Vocabulary, node_index: NodeIndex) -> EdgeList:
    """Doc-word edges weighted count * ln(N / df); words in every document drop out."""
    n_docs = len(corpus)
    edges = EdgeList()
    for position, doc in enumerate(corpus.documents):
        counts: dict[str, int] = {}
        for token in doc.tokens:
            if token in vocab:
                counts[token] = counts.get(token, 0) + 1
        for word, count in counts.items():
            idf = math.log(n_docs / vocab.doc_freq[word])
            if idf == 0.0:
                continue
            edges.add(node_index.doc(position), node_index.word(vocab.index[word]), count * idf)
    return edges


def pmi_edges(corpus: Corpus, vocab: Vocabulary, node_index: NodeIndex, window_size: int) -> EdgeList:
    """Word-word edges from positive pointwise mutual information over
    sliding windows (stride 1; short documents contribute one window).

    A window counts a word, and a pair, at most once.
    """
    if window_size < 2:
        raise InputError(f"window_size must be >= 2, got {window_size}")
    n_windows = 0
    occurrence: dict[int, int] = {}
    co_occurrence: dict[tuple[int, int], int] = {}
    for doc in corpus.documents:
        ids = [vocab.index[t] if t in vocab else -1 for t in doc.tokens]
        length = len(ids)
        spans = range(max(1, length - window_size + 1))
        for start in spans:
            n_windows += 1
            present = sorted({w for w in ids[start : start + window_size] if w >= 0})
            for w in present:
                occurrence[w] = occurrence.get(w, 0) + 1
            for pair in combinations(present, 2):
                co_occurrence[pair] = co_occurrence.get(pair, 0) + 1
    edges = EdgeList()
    for (wa, wb), n_co in co_occurrence.items():
        pmi = math.log(n_co * n_windows / (occurrence[wa] * occurrence[wb]))
        if pmi > 0.0:
            edges.add(node_index.word(wa), node_index.word(wb), pmi)
    return edges


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def semantic_relation(doc_vectors: np.ndarray, i: int, j: int, rho_sem: float) -> bool:
    """True iff cosine similarity between positions i and j exceeds rho_sem.

    Zero-norm vectors never relate.
    """
    if not 0.0 < rho_sem <= 1.0:
        raise InputError(f"rho_sem must be in (0, 1], got {rho_sem}")
    return cosine(doc_vectors[i], doc_vectors[j]) > rho_sem


def _cooccurrence_pairs(doc_tokens, vocab: Vocabulary):
    """Vocabulary ids of distinct in-vocabulary word pairs within one document."""
    present = sorted({vocab.index[t] for t in doc_tokens if t in vocab})
    return combinations(present, 2)


def semantic_edges(
    corpus: Corpus,
    vocab: Vocabulary,
    node_index: NodeIndex,
    embeddings: EmbeddingAnnotations,
    rho_sem: float,
) -> EdgeList:
    """Word-word edges weighted by the fraction of co-occurrence documents in
    which some position pair of the two words exceeds the cosine threshold."""
    if not 0.0 < rho_sem <= 1.0:
        raise InputError(f"rho_sem must be in (0, 1], got {rho_sem}")
    totals: dict[tuple[int, int], int] = {}
    related: dict[tuple[int, int], int] = {}
    if embeddings.mode == "static":
        unit: dict[int, np.ndarray | None] = {}
        for word, w_id in vocab.index.items():
            vec = embeddings.static.get(word)
            if vec is None:
                unit[w_id] = None
                continue
            norm = np.linalg.norm(vec)
            unit[w_id] = vec / norm if norm > 0 else None
        pair_related: dict[tuple[int, int], bool] = {}
        for doc in corpus.documents:
            for pair in _cooccurrence_pairs(doc.tokens, vocab):
                totals[pair] = totals.get(pair, 0) + 1
                hit = pair_related.get(pair)
                if hit is None:
                    ua, ub = unit[pair[0]], unit[pair[1]]
                    hit = ua is not None and ub is not None and float(ua @ ub) > rho_sem
                    pair_related[pair] = hit
                if hit:
                    related[pair] = related.get(pair, 0) + 1
    elif embeddings.mode == "contextual":
        for doc in corpus.documents:
            vectors = embeddings.contextual[doc.id]
            norms = np.linalg.norm(vectors, axis=1)
            safe = np.where(norms > 0, norms, 1.0)
            unit_rows = vectors / safe[:, None]
            unit_rows[norms == 0] = 0.0
            cos = unit_rows @ unit_rows.T
            positions: dict[int, list[int]] = {}
            for pos, token in enumerate(doc.tokens):
                if token in vocab:
                    positions.setdefault(vocab.index[token], []).append(pos)
            for pair in _cooccurrence_pairs(doc.tokens, vocab):
                totals[pair] = totals.get(pair, 0) + 1
                block = cos[np.ix_(positions[pair[0]], positions[pair[1]])]
                if bool((block > rho_sem).any()):
                    related[pair] = related.get(pair, 0) + 1
    else:
        raise InputError(f"unknown embedding mode {embeddings.mode!r}")
    edges = EdgeList()
    for pair, n_related in related.items():
        weight = n_related / totals[pair]
        edges.add(node_index.word(pair[0]), node_index.word(pair[1]), weight)
    return edges


def syntactic_edges(
    corpus: Corpus, vocab: Vocabulary, node_index: NodeIndex, dep: DepAnnotations
) -> EdgeList:
    """Word-word edges weighted by the fraction of co-occurrence documents
    holding a dependency pair between the two words.

    Dependency pairs between equal words would form self-loops and are
    excluded.
    """
    totals: dict[tuple[int, int], int] = {}
    linked: dict[tuple[int, int], int] = {}
    for doc in corpus.documents:
        for pair in _cooccurrence_pairs(doc.tokens, vocab):
            totals[pair] = totals.get(pair, 0) + 1
        doc_linked = set()
        for i, j in dep.for_doc(doc.id):
            ta, tb = doc.tokens[i], doc.tokens[j]
            if ta == tb or ta not in vocab or tb not in vocab:
                continue
            wa, wb = vocab.index[ta], vocab.index[tb]
            doc_linked.add((min(wa, wb), max(wa, wb)))
        for pair in doc_linked:
            linked[pair] = linked.get(pair, 0) + 1
    edges = EdgeList()
    for pair, n_linked in linked.items():
        weight = n_linked / totals[pair]
        edges.add(node_index.word(pair[0]), node_index.word(pair[1]), weight)
    return edges


def _edge_list_to_csr(edges: EdgeList, n: int) -> sp.csr_matrix:
    if len(edges) == 0:
        return sp.csr_matrix((n, n), dtype=np.float64)
    rows, cols, vals = [], [], []
    for (u, v), w in edges.items():
        rows.append(u)
        cols.append(v)
        vals.append(w)
    return csr_from_coo(rows, cols, vals, (n, n))


def assemble_tensor(
    word_word_lists: list[EdgeList],
    doc_word: EdgeList,
    node_index: NodeIndex,
    names=GRAPH_NAMES,
) -> TextGraphTensor:
    """Union each word-word list with the shared doc-word edges.

    The TF-IDF doc-word edges are the identical objects in every graph.
    """
    if len(word_word_lists) != len(tuple(names)):
        raise InputError("one edge list per graph name required")
    graphs = []
    for edges in word_word_lists:
        merged = EdgeList()
        for (u, v), w in edges.items():
            if u < v:
                merged.add(u, v, w)
        for (u, v), w in doc_word.items():
            if u < v:
                merged.add(u, v, w)
        graphs.append(_edge_list_to_csr(merged, node_index.n))
    return TextGraphTensor(node_index=node_index, graphs=graphs, names=tuple(names))


def normalize(tensor: TextGraphTensor) -> NormalizedTensor:
    """Symmetric normalization with self-loops: D^{-1/2} (A + I) D^{-1/2}."""
    normalized = []
    for name, A in zip(tensor.names, tensor.graphs):
        n = A.shape[0]
        tilde = (A + sp.identity(n, dtype=np.float64, format="csr")).tocsr()
        degrees = np.asarray(tilde.sum(axis=1)).ravel()
        bad = np.where(degrees <= 0)[0]
        if bad.size:
            raise InputError(
                f"graph {name!r}: node {int(bad[0])} has non-positive degree "
                f"{degrees[bad[0]]!r} after self-loops"
            )
        inv_sqrt = 1.0 / np.sqrt(degrees)
        scaler = sp.diags(inv_sqrt)
        hat = (scaler @ tilde @ scaler).tocsr()
        hat.sort_indices()
        normalized.append(hat)
    return NormalizedTensor(node_index=tensor.node_index, graphs=normalized, names=tensor.names)


# -- graph artifact files ---------------------------------------------------


def write_graph_file(path, A: sp.csr_matrix, name: str) -> None:
    """One header line, then `src dst weight` with undirected edges written
    once (src < dst); weights formatted for exact round-trip."""
    coo = A.tocoo()
    entries = sorted(
        (int(r), int(c), float(v))
        for r, c, v in zip(coo.row, coo.col, coo.data)
        if r < c
    )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#nodes {A.shape[0]} #edges {len(entries)} name {name}\n")
        for r, c, v in entries:
            fh.write(f"{r} {c} {v!r}\n")


def read_graph_file(path):
    """Inverse of write_graph_file; returns (name, csr matrix)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[0] != "#nodes" or header[2] != "#edges" or header[4] != "name":
            raise InputError(f"{path}: malformed graph header")
        n, m, name = int(header[1]), int(header[3]), header[5]
        rows, cols, vals = [], [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise InputError(f"{path}:{lineno}: malformed edge line")
            r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
            rows.extend((r, c))
            cols.extend((c, r))
            vals.extend((v, v))
        if len(rows) != 2 * m:
            raise InputError(f"{path}: header announces {m} edges, found {len(rows) // 2}")
    return name, csr_from_coo(rows, cols, vals, (n, n))


def write_node_index_file(path, corpus: Corpus, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#docs {len(corpus)} #words {len(vocab)}\n")
        for doc in corpus.documents:
            fh.write(f"d {doc.id}\n")
        for word in vocab.words:
            fh.write(f"w {word}\n")


def read_node_index_file(path):
    """Returns (doc ids in node order, words in node order)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "#docs" or header[2] != "#words":
            raise InputError(f"{path}: malformed node index header")
        n_docs, n_words = int(header[1]), int(header[3])
        doc_ids, words = [], []
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            kind, _, value = line.partition(" ")
            if kind == "d":
                doc_ids.append(value)
            elif kind == "w":
                words.append(value)
            else:
                raise InputError(f"{path}: unknown node kind {kind!r}")
    if len(doc_ids) != n_docs or len(words) != n_words:
        raise InputError(f"{path}: node counts disagree with header")
    return doc_ids, words
