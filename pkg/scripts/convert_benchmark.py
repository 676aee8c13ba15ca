#!/usr/bin/env python3
"""Convert the common benchmark distribution layout into the dataset format.

Expected inputs (the layout most mirrors of the R8/R52/Ohsumed/MR corpora
use): a metadata file with one line per document, tab separated

    <doc id> <TAB> <train|test> <TAB> <label>

and a corpus file with the matching document text per line. Output is
line-delimited JSON with id/text/label/split fields, e.g.

    python3 scripts/convert_benchmark.py r8.meta r8.corpus data/r8.jsonl
"""

import json
import sys


def main(meta_path, corpus_path, out_path):
    with open(meta_path, encoding="utf-8") as fh:
        meta = [line.rstrip("\n").split("\t") for line in fh if line.strip()]
    with open(corpus_path, encoding="latin-1") as fh:
        texts = [line.rstrip("\n") for line in fh]
    if len(meta) != len(texts):
        raise SystemExit(f"{len(meta)} metadata lines but {len(texts)} corpus lines")
    n_bad = 0
    with open(out_path, "w", encoding="utf-8") as out:
        for (doc_id, split, label), text in zip(meta, texts):
            if "train" in split:
                split = "train"
            elif "test" in split:
                split = "test"
            else:
                raise SystemExit(f"unrecognized split {split!r} for {doc_id}")
            if not text.strip():
                n_bad += 1
                continue
            out.write(json.dumps({"id": doc_id, "text": text, "label": label, "split": split}) + "\n")
    if n_bad:
        print(f"skipped {n_bad} empty documents", file=sys.stderr)
    print(f"wrote {len(meta) - n_bad} records to {out_path}")


if __name__ == "__main__":
    if len(sys.argv) != 4:
        raise SystemExit(__doc__)
    main(*sys.argv[1:])
