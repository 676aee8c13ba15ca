import numpy as np
import pytest

from tensorgcn import (
    assemble_tensor,
    build_vocab,
    load_corpus,
    load_dep_annotations,
    load_embedding_annotations,
    make_node_index,
    pmi_edges,
    semantic_edges,
    syntactic_edges,
    tfidf_edges,
)
from tensorgcn.synthetic import write_complementary_corpus, write_tiny_corpus


@pytest.fixture(scope="session")
def tiny_files(tmp_path_factory):
    return write_tiny_corpus(tmp_path_factory.mktemp("tiny"))


@pytest.fixture(scope="session")
def complementary_files(tmp_path_factory):
    return write_complementary_corpus(tmp_path_factory.mktemp("complementary"))


def build_tensor_from_files(files, window_size=2, rho_sem=0.9, min_df=1):
    corpus = load_corpus(files.dataset_path)
    vocab = build_vocab(corpus, min_df)
    node_index = make_node_index(corpus, vocab)
    embeddings = load_embedding_annotations(files.embeddings_path, corpus, "static", vocab=vocab)
    dep = load_dep_annotations(files.dependencies_path, corpus)
    word_word = [
        semantic_edges(corpus, vocab, node_index, embeddings, rho_sem),
        syntactic_edges(corpus, vocab, node_index, dep),
        pmi_edges(corpus, vocab, node_index, window_size),
    ]
    doc_word = tfidf_edges(corpus, vocab, node_index)
    return corpus, vocab, assemble_tensor(word_word, doc_word, node_index)


@pytest.fixture(scope="session")
def complementary_built(complementary_files):
    return build_tensor_from_files(complementary_files)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
