"""Candidate phrase mining over tagged documents.

Documents are chunked into maximal runs of mining-valid tags, then every
run is swept for spans that start on an independent or end-dependent tag
and end on an independent or start-dependent tag, up to the configured
n-gram length. Everything mined that is not a gold keyphrase serves as a
hard negative for contrastive training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from kpforge.errors import UsageError
from kpforge.stem import stem_word
from kpforge.tagging import TagCategory, TaggedToken, TagSetTable

CHUNK_GRAMMARS = ("content-runs",)


@dataclass(frozen=True)
class MinerConfig:
    """Mining parameters: span length cap, chunk grammar, and tag table.

    ``require_content_tag`` drops spans containing no independent tag
    (e.g. a lone determiner); disable it to get the raw sweep behavior.
    """

    max_ngram: int = 6
    pattern: str = "content-runs"
    table: TagSetTable = field(default_factory=TagSetTable.default)
    require_content_tag: bool = True

    def __post_init__(self) -> None:
        if not 1 <= self.max_ngram <= 10:
            raise UsageError(f"max_ngram must be in [1, 10], got {self.max_ngram}")
        if self.pattern not in CHUNK_GRAMMARS:
            raise UsageError(
                f"unknown chunk grammar {self.pattern!r}; valid: {CHUNK_GRAMMARS}"
            )


@dataclass(frozen=True)
class PhraseCandidate:
    """A document span: [start, end) token indices plus surface and stem."""

    start: int
    end: int
    stemmed: str
    surface: str


@dataclass(frozen=True)
class Chunk:
    start: int
    tokens: tuple[TaggedToken, ...]

    @property
    def end(self) -> int:
        return self.start + len(self.tokens)


@dataclass
class LabeledCandidates:
    doc_id: str
    positives: list[PhraseCandidate]
    negatives: list[PhraseCandidate]
    missed_gold: list[str]


def chunk_phrases(tagged, config: MinerConfig | None = None) -> list[Chunk]:
    """Split a tagged token list into maximal non-invalid runs that
    contain at least one independent tag."""
    config = config or MinerConfig()
    table = config.table
    chunks: list[Chunk] = []
    run_start = None
    has_indep = False
    tagged = list(tagged)

    def flush(end: int) -> None:
        nonlocal run_start, has_indep
        if run_start is not None and has_indep:
            chunks.append(Chunk(run_start, tuple(tagged[run_start:end])))
        run_start = None
        has_indep = False

    for i, token in enumerate(tagged):
        category = table.classify(token.tag)
        if category is TagCategory.INVALID:
            flush(i)
            continue
        if run_start is None:
            run_start = i
        if category is TagCategory.INDEP:
            has_indep = True
    flush(len(tagged))
    return chunks


def enumerate_spans(tagged, config: MinerConfig | None = None) -> list[PhraseCandidate]:
    """All mineable spans in sweep order, duplicate stems included."""
    config = config or MinerConfig()
    table = config.table
    spans: list[PhraseCandidate] = []

    for chunk in chunk_phrases(tagged, config):
        words = [t.word for t in chunk.tokens]
        stems = [stem_word(w) for w in words]
        categories = [table.classify(t.tag) for t in chunk.tokens]

        for i, start_cat in enumerate(categories):
            if start_cat not in (TagCategory.INDEP, TagCategory.END_DEP):
                continue
            has_content = start_cat is TagCategory.INDEP
            ends_at = [i + 1]
            content_at = [has_content]
            length = 1
            for j in range(i + 1, len(chunk.tokens)):
                if length >= config.max_ngram:
                    break
                category = categories[j]
                length += 1
                if category in (TagCategory.DEP, TagCategory.END_DEP):
                    continue
                has_content = has_content or category is TagCategory.INDEP
                ends_at.append(j + 1)
                content_at.append(has_content)
            for end, content in zip(ends_at, content_at):
                if config.require_content_tag and not content:
                    continue
                stemmed = " ".join(stems[i:end])
                if not stemmed.strip():
                    continue
                spans.append(
                    PhraseCandidate(
                        start=chunk.start + i,
                        end=chunk.start + end,
                        stemmed=stemmed,
                        surface=" ".join(words[i:end]),
                    )
                )
    return spans


def mine_candidates(tagged, config: MinerConfig | None = None) -> list[PhraseCandidate]:
    """Unique candidates keyed by stemmed form; the earliest span wins."""
    seen: set[str] = set()
    unique: list[PhraseCandidate] = []
    for span in enumerate_spans(tagged, config):
        if span.stemmed in seen:
            continue
        seen.add(span.stemmed)
        unique.append(span)
    return unique


def label_candidates(
    candidates, present_gold, doc_id: str = ""
) -> LabeledCandidates:
    """Split candidates into positives (stem-matching a gold present
    keyphrase) and negatives, reporting gold phrases the miner missed."""
    from kpforge.stem import stem_phrase

    gold_stems = {}
    for phrase in present_gold:
        gold_stems.setdefault(stem_phrase(phrase), phrase)

    positives, negatives = [], []
    found: set[str] = set()
    for candidate in candidates:
        if candidate.stemmed in gold_stems:
            positives.append(candidate)
            found.add(candidate.stemmed)
        else:
            negatives.append(candidate)
    missed = [gold_stems[s] for s in gold_stems if s not in found]
    return LabeledCandidates(
        doc_id=doc_id, positives=positives, negatives=negatives, missed_gold=missed
    )
