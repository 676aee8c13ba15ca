"""Dependency-pair extraction over the shared tokenization.

The default parser is a deterministic rule-based approximation (no model
downloads, no JVM): function words attach forward to the next content
token, and consecutive content tokens attach to each other, yielding
undirected head-style arcs such as determiner-noun and subject-verb. A
spacy adapter is registered for environments where a real parser and its
model are installed; outputs carry the parser name and version so golden
files stay pinned.
"""

from __future__ import annotations

import json

from .dataset import Record

HEURISTIC_VERSION = "heuristic-1"

# closed-class words that modify the following content token
FUNCTION_WORDS = frozenset(
    """
    a an the this that these those my your his her its our their
    i you he she it we they me him us them
    am is are was were be been being do does did have has had
    will would shall should can could may might must
    and or but nor so yet
    in on at by for with from to of as into onto over under about
    not no very too also just
    """.split()
)


def heuristic_pairs(tokens) -> list[tuple[int, int]]:
    """Undirected (min, max) position pairs, deduplicated and sorted."""
    pairs = set()
    content = [k for k, t in enumerate(tokens) if t not in FUNCTION_WORDS]
    for a, b in zip(content, content[1:]):
        pairs.add((a, b))
    for k, token in enumerate(tokens):
        if token in FUNCTION_WORDS:
            nxt = next((c for c in content if c > k), None)
            if nxt is not None:
                pairs.add((k, nxt))
            elif content:
                prev = max(c for c in content if c < k)
                pairs.add((prev, k))
    return sorted(pairs)


def spacy_pairs_factory(model: str = "en_core_web_sm"):
    try:
        import spacy
    except ImportError as exc:
        raise RuntimeError("spacy is not installed; use the heuristic parser") from exc
    nlp = spacy.load(model, disable=["ner", "lemmatizer"])
    version = f"spacy-{spacy.__version__}-{model}"

    def parse(tokens):
        doc = spacy.tokens.Doc(nlp.vocab, words=list(tokens))
        for _, proc in nlp.pipeline:
            doc = proc(doc)
        pairs = set()
        for token in doc:
            if token.i != token.head.i:
                pairs.add((min(token.i, token.head.i), max(token.i, token.head.i)))
        return sorted(pairs)

    return parse, version


def get_parser(name: str):
    """Returns (parse function, pinned version string)."""
    if name == "heuristic":
        return heuristic_pairs, HEURISTIC_VERSION
    if name == "spacy":
        return spacy_pairs_factory()
    raise ValueError(f"unknown parser {name!r} (expected heuristic or spacy)")


def write_dependencies(path, records: list[Record], parser_name: str = "heuristic"):
    parse, version = get_parser(parser_name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# parser={parser_name} version={version}\n")
        for record in records:
            pairs = parse(record.tokens) if len(record.tokens) > 1 else []
            fh.write(json.dumps({"id": record.id, "edges": [list(p) for p in pairs]}) + "\n")
    return version
