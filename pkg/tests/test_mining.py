"""Candidate mining: chunking, span enumeration, and the brute-force
subspan oracle."""

import time

import numpy as np
import pytest

from kpforge.corpus import partition_keyphrases, tokenize
from kpforge.mining import (
    MinerConfig,
    chunk_phrases,
    enumerate_spans,
    label_candidates,
    mine_candidates,
)
from kpforge.stem import stem_word
from kpforge.tagging import TagCategory, TaggedToken, TagSetTable, tag_tokens

TABLE = TagSetTable.default()


def tt(pairs):
    return [TaggedToken(w, t) for w, t in pairs]


def surfaces(candidates):
    return {c.surface for c in candidates}


class TestChunking:
    def test_punctuation_splits_runs(self):
        tagged = tt([("a", "DT"), ("b", "NN"), ("c", "NN"), (".", "."), ("d", "NN")])
        chunks = chunk_phrases(tagged)
        assert [(c.start, c.end) for c in chunks] == [(0, 3), (4, 5)]

    def test_runs_without_independent_tags_are_dropped(self):
        tagged = tt([("in", "IN"), ("of", "IN")])
        assert chunk_phrases(tagged) == []

    def test_figure1_fixture_covers_key_span(self, figure1_doc):
        tokenized = tokenize(figure1_doc)
        tagged = tag_tokens(tokenized.tokens)
        chunks = chunk_phrases(tagged)
        joined = [" ".join(t.word for t in c.tokens) for c in chunks]
        assert any("boundary integral equation" in c for c in joined)


class TestMineCandidates:
    def test_paper_style_four_token_chunk(self):
        tagged = tt(
            [
                ("applications", "NNS"),
                ("of", "IN"),
                ("machine", "NN"),
                ("learning", "NN"),
            ]
        )
        mined = mine_candidates(tagged, MinerConfig(max_ngram=6))
        assert surfaces(mined) == {
            "applications",
            "machine",
            "learning",
            "applications of machine",
            "machine learning",
            "applications of machine learning",
        }
        excluded = {"applications of", "of", "of machine", "of machine learning"}
        assert not (surfaces(mined) & excluded)

    def test_overlapping_spans_both_registered(self):
        tagged = tt([("boundary", "NN"), ("integral", "NN"), ("equation", "NN")])
        mined = mine_candidates(tagged)
        assert "integral equation" in surfaces(mined)
        assert "boundary integral equation" in surfaces(mined)

    def test_single_token_chunk(self):
        mined = mine_candidates(tt([("networks", "NNS")]))
        assert len(mined) == 1
        assert mined[0].stemmed == "network"

    def test_duplicate_stems_keep_first_span(self):
        tagged = tt([("model", "NN"), (",", ","), ("models", "NNS")])
        mined = mine_candidates(tagged)
        spans = {c.stemmed: (c.start, c.end) for c in mined}
        assert spans["model"] == (0, 1)

    def test_length_cap(self):
        tagged = tt([(f"w{i}", "NN") for i in range(8)])
        mined = mine_candidates(tagged, MinerConfig(max_ngram=3))
        assert max(c.end - c.start for c in mined) == 3

    def test_contentless_spans_dropped_by_default(self):
        tagged = tt([("the", "DT"), ("model", "NN")])
        mined = mine_candidates(tagged)
        assert "the" not in surfaces(mined)
        assert "the model" in surfaces(mined)

    def test_contentless_spans_kept_on_request(self):
        tagged = tt([("the", "DT"), ("model", "NN")])
        config = MinerConfig(require_content_tag=False)
        assert "the" in surfaces(mine_candidates(tagged, config))

    def test_start_end_tag_invariants(self):
        tokens = "the quick fox jumps over the lazy dog and runs off now .".split()
        tagged = tag_tokens(tokens)
        for candidate in mine_candidates(tagged):
            first = TABLE.classify(tagged[candidate.start].tag)
            last = TABLE.classify(tagged[candidate.end - 1].tag)
            assert first in (TagCategory.INDEP, TagCategory.END_DEP)
            assert last in (TagCategory.INDEP, TagCategory.START_DEP)

    def test_figure1_candidates(self, figure1_doc):
        tokenized = tokenize(figure1_doc)
        tagged = tag_tokens(tokenized.tokens)
        mined = mine_candidates(tagged)
        stems = {c.stemmed for c in mined}
        assert "integr equat" in stems  # stem of "integral equations"
        assert "boundari integr equat" in stems
        assert "multipli connect problem" in stems


class TestLabelCandidates:
    def test_stemmed_equality_labels(self):
        tagged = tt([("machine", "NN"), ("learning", "NN")])
        mined = mine_candidates(tagged)
        labeled = label_candidates(mined, ["machine learning"], "d1")
        assert {c.stemmed for c in labeled.positives} == {"machin learn"}
        assert {c.stemmed for c in labeled.negatives} == {"machin", "learn"}
        assert not labeled.missed_gold

    def test_missed_gold_reported(self):
        mined = mine_candidates(tt([("other", "NN")]))
        labeled = label_candidates(mined, ["machine learning"])
        assert labeled.missed_gold == ["machine learning"]

    def test_figure1_multiword_positive(self, figure1_doc):
        tokenized = tokenize(figure1_doc)
        tagged = tag_tokens(tokenized.tokens)
        mined = mine_candidates(tagged)
        present, _ = partition_keyphrases(tokenized, figure1_doc.keyphrases)
        labeled = label_candidates(mined, present, figure1_doc.id)
        assert "multipli connect problem" in {c.stemmed for c in labeled.positives}


# ---------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------

ORACLE_TAGS = [
    "NN", "NNS", "VB", "JJ", "RBR", "CD",  # independent
    "IN", "CC", "HYPH",                    # dependent
    "RP",                                  # start-dependent
    "DT", "LS",                            # end-dependent
    ".", "SYM", "PRP",                     # invalid
]

ORACLE_WORDS = [
    "cats", "cat", "running", "runs", "quick", "model", "models",
    "the", "of", "and", "-", "up", "boundary", "fields",
]


def oracle_mine(tagged, config: MinerConfig):
    """All subspans passing the start/end/content/no-invalid filters,
    stem-deduplicated in scan order."""
    table = config.table
    categories = [table.classify(t.tag) for t in tagged]
    stems = [stem_word(t.word) for t in tagged]
    seen = {}
    for start in range(len(tagged)):
        for end in range(start + 1, min(len(tagged), start + config.max_ngram) + 1):
            window = categories[start:end]
            if any(c is TagCategory.INVALID for c in window):
                continue
            if window[0] not in (TagCategory.INDEP, TagCategory.END_DEP):
                continue
            if window[-1] not in (TagCategory.INDEP, TagCategory.START_DEP):
                continue
            if not any(c is TagCategory.INDEP for c in window):
                continue
            stemmed = " ".join(stems[start:end])
            if not stemmed.strip() or stemmed in seen:
                continue
            seen[stemmed] = (start, end, " ".join(t.word for t in tagged[start:end]))
    return seen


def random_tagged(rng, length):
    words = rng.choice(ORACLE_WORDS, size=length)
    tags = rng.choice(ORACLE_TAGS, size=length)
    return tt(list(zip(words, tags)))


def assert_matches_oracle(tagged, config):
    mined = mine_candidates(tagged, config)
    expected = oracle_mine(tagged, config)
    actual = {c.stemmed: (c.start, c.end, c.surface) for c in mined}
    assert actual == expected


class TestOracleEquivalence:
    def test_randomized_sequences_match_brute_force(self):
        rng = np.random.default_rng(123)
        start = time.perf_counter()
        for _ in range(500):
            length = int(rng.integers(1, 9))
            tagged = random_tagged(rng, length)
            max_ngram = int(rng.integers(1, 7))
            assert_matches_oracle(tagged, MinerConfig(max_ngram=max_ngram))
        assert time.perf_counter() - start < 5.0

    def test_oracle_on_real_text(self, mini_corpus):
        config = MinerConfig()
        for doc in mini_corpus:
            tokenized = tokenize(doc)
            tagged = tag_tokens(tokenized.tokens)
            assert_matches_oracle(tagged, config)
