import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorgcn import (
    InputError,
    build_vocab,
    load_corpus,
    load_dep_annotations,
    load_embedding_annotations,
    make_masks,
    make_node_index,
    save_corpus,
    tokenize,
)


def write_dataset(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return path


def record(doc_id, text, label="pos", split="train"):
    return {"id": doc_id, "text": text, "label": label, "split": split}


class TestTokenizer:
    def test_lowercase_and_punctuation(self):
        assert tokenize("Cats purr.") == ["cats", "purr"]

    def test_punctuation_separates_tokens(self):
        assert tokenize("rock-solid,fast") == ["rock", "solid", "fast"]

    def test_empty_tokens_dropped(self):
        assert tokenize("  ...  ") == []


class TestLoadCorpus:
    def test_basic_load(self, tmp_path):
        path = write_dataset(
            tmp_path / "d.jsonl",
            [record("d1", "Cats purr.", "pos"), record("d2", "Dogs bark!", "neg", "test")],
        )
        corpus = load_corpus(path)
        assert corpus.documents[0].tokens == ("cats", "purr")
        assert corpus.documents[0].label == 0
        assert corpus.documents[0].split == "train"
        assert corpus.label_names == ["pos", "neg"]
        assert corpus.documents[1].label == 1

    def test_label_indices_first_appearance_order(self, tmp_path):
        path = write_dataset(
            tmp_path / "d.jsonl",
            [record("a", "x", "pos"), record("b", "y", "neg"), record("c", "z", "pos")],
        )
        corpus = load_corpus(path)
        assert [d.label for d in corpus.documents] == [0, 1, 0]

    def test_empty_text_names_line(self, tmp_path):
        path = write_dataset(tmp_path / "d.jsonl", [record("a", "ok"), record("bad", "...")])
        with pytest.raises(InputError, match="bad"):
            load_corpus(path)

    def test_duplicate_id(self, tmp_path):
        path = write_dataset(tmp_path / "d.jsonl", [record("a", "x"), record("a", "y")])
        with pytest.raises(InputError, match="duplicate"):
            load_corpus(path)

    def test_unknown_split(self, tmp_path):
        path = write_dataset(tmp_path / "d.jsonl", [record("a", "x", split="dev")])
        with pytest.raises(InputError, match="split"):
            load_corpus(path)

    def test_malformed_record_names_line_number(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(record("a", "x")) + "\n{broken\n", encoding="utf-8")
        with pytest.raises(InputError, match=":2"):
            load_corpus(path)

    def test_round_trip(self, tmp_path):
        path = write_dataset(
            tmp_path / "d.jsonl",
            [record("a", "The cat, quietly, slept."), record("b", "Dogs bark?", "neg", "test")],
        )
        corpus = load_corpus(path)
        out = tmp_path / "copy.jsonl"
        save_corpus(corpus, out)
        reloaded = load_corpus(out)
        assert [d.tokens for d in reloaded.documents] == [d.tokens for d in corpus.documents]
        assert [d.label for d in reloaded.documents] == [d.label for d in corpus.documents]
        assert [d.split for d in reloaded.documents] == [d.split for d in corpus.documents]


class TestVocabulary:
    def corpus(self, tmp_path, texts):
        path = write_dataset(
            tmp_path / "v.jsonl", [record(f"d{k}", t) for k, t in enumerate(texts)]
        )
        return load_corpus(path)

    def test_counts_and_order(self, tmp_path):
        vocab = build_vocab(self.corpus(tmp_path, ["a b", "a c"]), 1)
        assert vocab.words == ["a", "b", "c"]
        assert vocab.doc_freq == {"a": 2, "b": 1, "c": 1}

    def test_min_df_threshold(self, tmp_path):
        vocab = build_vocab(self.corpus(tmp_path, ["a b", "a c"]), 2)
        assert vocab.words == ["a"]

    def test_all_below_threshold_errors(self, tmp_path):
        with pytest.raises(InputError):
            build_vocab(self.corpus(tmp_path, ["a b", "c d"]), 3)

    def test_index_bijection(self, tmp_path):
        vocab = build_vocab(self.corpus(tmp_path, ["q w e r t y", "w e r"]), 1)
        for k, word in enumerate(vocab.words):
            assert vocab.index[word] == k


class TestDepAnnotations:
    def setup_corpus(self, tmp_path):
        path = write_dataset(tmp_path / "d.jsonl", [record("d1", "the cat sleeps")])
        return load_corpus(path)

    def test_fold_and_dedup(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        ann = tmp_path / "dep.jsonl"
        ann.write_text(json.dumps({"id": "d1", "edges": [[2, 1], [1, 2]]}) + "\n")
        dep = load_dep_annotations(ann, corpus)
        assert dep.for_doc("d1") == frozenset({(1, 2)})

    def test_out_of_range_names_document(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        ann = tmp_path / "dep.jsonl"
        ann.write_text(json.dumps({"id": "d1", "edges": [[0, 5]]}) + "\n")
        with pytest.raises(InputError, match="d1"):
            load_dep_annotations(ann, corpus)

    def test_missing_document_gets_empty_set(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        ann = tmp_path / "dep.jsonl"
        ann.write_text("")
        dep = load_dep_annotations(ann, corpus)
        assert dep.for_doc("d1") == frozenset()

    def test_unknown_id_rejected(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        ann = tmp_path / "dep.jsonl"
        ann.write_text(json.dumps({"id": "ghost", "edges": []}) + "\n")
        with pytest.raises(InputError, match="ghost"):
            load_dep_annotations(ann, corpus)


class TestEmbeddingAnnotations:
    def setup_corpus(self, tmp_path):
        path = write_dataset(
            tmp_path / "d.jsonl", [record("d1", "cats purr"), record("d2", "dogs bark")]
        )
        return load_corpus(path)

    def test_static_parse(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        vocab = build_vocab(corpus, 1)
        emb_file = tmp_path / "static.txt"
        emb_file.write_text("cats 0.1 0.2\npurr 0.3 0.4\ndogs 1 0\nbark 0 1\nunknownword 9 9\n")
        emb = load_embedding_annotations(emb_file, corpus, "static", vocab=vocab)
        assert np.array_equal(emb.static["cats"], [0.1, 0.2])
        assert emb.d_emb == 2
        assert "unknownword" not in emb.static
        assert emb.missing_words == []

    def test_static_dimension_mismatch(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        vocab = build_vocab(corpus, 1)
        emb_file = tmp_path / "static.txt"
        emb_file.write_text("cats 0.1 0.2\npurr 0.3\n")
        with pytest.raises(InputError, match="dimension"):
            load_embedding_annotations(emb_file, corpus, "static", vocab=vocab)

    def test_contextual_count_mismatch(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        emb_file = tmp_path / "ctx.jsonl"
        rows = [
            {"id": "d1", "vectors": [[0.1], [0.2], [0.3]]},
            {"id": "d2", "vectors": [[0.1], [0.2]]},
        ]
        emb_file.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        with pytest.raises(InputError, match="d1"):
            load_embedding_annotations(emb_file, corpus, "contextual")

    def test_contextual_unknown_doc(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        emb_file = tmp_path / "ctx.jsonl"
        emb_file.write_text(json.dumps({"id": "nope", "vectors": [[0.1]]}) + "\n")
        with pytest.raises(InputError, match="nope"):
            load_embedding_annotations(emb_file, corpus, "contextual")

    def test_contextual_requires_full_coverage(self, tmp_path):
        corpus = self.setup_corpus(tmp_path)
        emb_file = tmp_path / "ctx.jsonl"
        emb_file.write_text(json.dumps({"id": "d1", "vectors": [[0.1], [0.2]]}) + "\n")
        with pytest.raises(InputError, match="missing"):
            load_embedding_annotations(emb_file, corpus, "contextual")


class TestMasks:
    def make(self, tmp_path, n_train, n_test):
        records = [record(f"tr{k}", f"w{k} common") for k in range(n_train)]
        records += [record(f"te{k}", f"v{k} common", split="test") for k in range(n_test)]
        return load_corpus(write_dataset(tmp_path / "m.jsonl", records))

    def test_sizes_floor_with_minimum_one(self, tmp_path):
        corpus = self.make(tmp_path, 10, 3)
        train, val, test = make_masks(corpus, 0.1, seed=0)
        assert val.sum() == 1 and train.sum() == 9 and test.sum() == 3

    def test_deterministic_for_fixed_seed(self, tmp_path):
        corpus = self.make(tmp_path, 20, 5)
        first = make_masks(corpus, 0.25, seed=9)
        second = make_masks(corpus, 0.25, seed=9)
        for a, b in zip(first, second):
            assert np.array_equal(a, b)
        third = make_masks(corpus, 0.25, seed=10)
        assert any(not np.array_equal(a, b) for a, b in zip(first, third))

    def test_mr_layout_validation_size(self, tmp_path):
        # 7,108 training documents at 10% -> 710 validation documents
        corpus = self.make(tmp_path, 7108, 10)
        train, val, _ = make_masks(corpus, 0.1, seed=1)
        assert val.sum() == 710
        assert train.sum() == 7108 - 710

    @settings(max_examples=20, deadline=None)
    @given(n_train=st.integers(4, 40), n_test=st.integers(1, 10), seed=st.integers(0, 99))
    def test_partition_property(self, tmp_path_factory, n_train, n_test, seed):
        corpus = self.make(tmp_path_factory.mktemp("mask"), n_train, n_test)
        train, val, test = make_masks(corpus, 0.2, seed=seed)
        combined = train.astype(int) + val.astype(int) + test.astype(int)
        assert np.array_equal(combined, np.ones(len(corpus), dtype=int))

    def test_errors_when_a_mask_would_be_empty(self, tmp_path):
        corpus = self.make(tmp_path, 1, 1)
        with pytest.raises(InputError):
            make_masks(corpus, 0.5, seed=0)


def test_node_index_layout(tmp_path):
    corpus = load_corpus(
        write_dataset(tmp_path / "d.jsonl", [record("a", "x y"), record("b", "y z")])
    )
    vocab = build_vocab(corpus, 1)
    ni = make_node_index(corpus, vocab)
    assert ni.n == 2 + 3
    assert ni.doc(1) == 1
    assert ni.word(0) == 2
