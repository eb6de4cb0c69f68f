"""Deterministic synthetic corpus with planted keyphrase patterns.

Documents are built from pseudo-word topic vocabularies: each document
plants five present keyphrases drawn from its topic's phrase bank and
one absent keyphrase pairing a corpus-wide marker word (never appearing
in any text) with the topic's head word (always appearing in the text).
Topics come in pairs that share filler vocabulary, so document vectors
within a pair are deliberately confusable; the reranker has to resolve
what beam order alone cannot.

Run ``python -m kpforge.synthetic --out-dir DIR --seed N`` to write
train/valid/test JSONL files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from kpforge.stem import stem_word

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

_GLOBAL_FILLER = (
    "the method shows a result for study of data in model and case with"
).split()


def _pseudo_word(rng: np.random.Generator, n_syllables: int) -> str:
    parts = []
    for _ in range(n_syllables):
        parts.append(rng.choice(list(_CONSONANTS)))
        parts.append(rng.choice(list(_VOWELS)))
    return "".join(parts)


def _fresh_words(rng, count: int, used_stems: set[str], n_syllables: int = 3) -> list[str]:
    words = []
    while len(words) < count:
        word = _pseudo_word(rng, n_syllables)
        stem = stem_word(word)
        if stem in used_stems:
            continue
        used_stems.add(stem)
        words.append(word)
    return words


def make_corpus(
    n_docs: int = 200, n_topics: int = 16, seed: int = 7
) -> tuple[list[dict], list[dict], list[dict]]:
    """Build (train, valid, test) record lists with an 8/1/1 split."""
    rng = np.random.default_rng(seed)
    used_stems = {stem_word(w) for w in _GLOBAL_FILLER}

    marker = _fresh_words(rng, 1, used_stems)[0]
    topics = []
    for pair in range((n_topics + 1) // 2):
        shared = _fresh_words(rng, 3, used_stems)
        for _ in range(2):
            if len(topics) == n_topics:
                break
            words = _fresh_words(rng, 9, used_stems)
            head = words[0]
            # Token-disjoint phrase bank: 3 unigrams + 3 bigrams + 2 trigrams
            # over distinct topic words, so no phrase is a span of another.
            extra = _fresh_words(rng, 7, used_stems)
            pool = words + extra
            bank = [
                pool[0],
                pool[1],
                pool[2],
                f"{pool[3]} {pool[4]}",
                f"{pool[5]} {pool[6]}",
                f"{pool[7]} {pool[8]}",
                f"{pool[9]} {pool[10]} {pool[11]}",
                f"{pool[12]} {pool[13]} {pool[14]}",
            ]
            topics.append({"head": head, "bank": bank, "shared": shared})

    records = []
    for index in range(n_docs):
        topic = topics[index % n_topics]
        picked = list(rng.choice(len(topic["bank"]), size=5, replace=False))
        phrases = [topic["bank"][i] for i in picked]
        if topic["head"] not in " ".join(phrases).split():
            phrases[0] = topic["head"]  # head word must appear in the text

        title_words = phrases[0].split() + [str(rng.choice(topic["shared"]))]
        sentences = []
        for phrase in phrases:
            filler_a = str(rng.choice(_GLOBAL_FILLER))
            filler_b = str(rng.choice(topic["shared"]))
            connective = str(rng.choice(["of", "the", "and", "for", "with"]))
            sentences.append(f"{filler_a} {phrase} {connective} {filler_b} .")
        rng.shuffle(sentences)
        abstract = " ".join(sentences)

        absent = f"{marker} {topic['head']}"
        records.append(
            {
                "id": f"syn{index:04d}",
                "title": " ".join(title_words),
                "abstract": abstract,
                "keyphrases": phrases + [absent],
            }
        )

    order = rng.permutation(n_docs)
    n_train = int(n_docs * 0.8)
    n_valid = int(n_docs * 0.1)
    train = [records[i] for i in sorted(order[:n_train])]
    valid = [records[i] for i in sorted(order[n_train : n_train + n_valid])]
    test = [records[i] for i in sorted(order[n_train + n_valid :])]
    return train, valid, test


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="generate the synthetic planted-keyphrase corpus"
    )
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--n-docs", type=int, default=200)
    parser.add_argument("--n-topics", type=int, default=16)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    import os

    os.makedirs(args.out_dir, exist_ok=True)
    train, valid, test = make_corpus(args.n_docs, args.n_topics, args.seed)
    for name, records in (("train", train), ("valid", valid), ("test", test)):
        write_jsonl(os.path.join(args.out_dir, f"{name}.jsonl"), records)
    print(f"wrote {len(train)}/{len(valid)}/{len(test)} records to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
