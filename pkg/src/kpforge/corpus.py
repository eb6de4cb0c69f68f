"""Corpus loading, tokenization, and present/absent keyphrase partitioning."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from kpforge.errors import DataError
from kpforge.stem import stem_word

# Lowercase words become maximal alphanumeric runs; every maximal run of
# non-space punctuation (hyphens included) is its own token.
_TOKEN_RE = re.compile(r"[0-9a-zÀ-￿]+|[^\s0-9a-zÀ-￿]+")


def tokenize_text(text: str) -> list[str]:
    """Lowercase and split into word and punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class LabeledDocument:
    """A title+abstract record with its gold keyphrases.

    ``pre_tokens``/``pre_tags`` carry optional externally supplied
    tokenization and POS tags; when present they are used verbatim
    instead of the built-in tokenizer and tagger.
    """

    id: str
    title: str
    abstract: str
    keyphrases: tuple[str, ...]
    pre_tokens: tuple[str, ...] | None = None
    pre_tags: tuple[str, ...] | None = None

    @property
    def text(self) -> str:
        return f"{self.title} {self.abstract}"


@dataclass(frozen=True)
class TokenizedDocument:
    tokens: tuple[str, ...]
    stems: tuple[str, ...]
    source: str


@dataclass(frozen=True)
class RecordError:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


@dataclass
class CorpusLoadResult:
    documents: list[LabeledDocument] = field(default_factory=list)
    errors: list[RecordError] = field(default_factory=list)


def _dedup_keyphrases(keyphrases) -> tuple[str, ...]:
    """Drop keyphrases whose stemmed form was already seen, keeping the first."""
    seen: set[str] = set()
    kept = []
    for phrase in keyphrases:
        key = " ".join(stem_word(t) for t in tokenize_text(phrase))
        if key in seen:
            continue
        seen.add(key)
        kept.append(phrase)
    return tuple(kept)


def _parse_record(record: dict, line_no: int) -> LabeledDocument:
    for name in ("title", "abstract", "keyphrases"):
        if name not in record:
            raise DataError(f"missing required field {name!r}")
    title, abstract = record["title"], record["abstract"]
    if not isinstance(title, str) or not isinstance(abstract, str):
        raise DataError("title and abstract must be strings")
    keyphrases = record["keyphrases"]
    if not isinstance(keyphrases, list) or not all(isinstance(k, str) for k in keyphrases):
        raise DataError("keyphrases must be an array of strings")

    pre_tokens = pre_tags = None
    if "tokens" in record or "pos_tags" in record:
        tokens, tags = record.get("tokens"), record.get("pos_tags")
        if tokens is None or tags is None:
            raise DataError("tokens and pos_tags must be provided together")
        if len(tokens) != len(tags):
            raise DataError(
                f"tokens/pos_tags length mismatch ({len(tokens)} vs {len(tags)})"
            )
        pre_tokens = tuple(str(t).lower() for t in tokens)
        pre_tags = tuple(str(t) for t in tags)

    return LabeledDocument(
        id=str(record.get("id", f"doc{line_no:06d}")),
        title=title,
        abstract=abstract,
        keyphrases=_dedup_keyphrases(keyphrases),
        pre_tokens=pre_tokens,
        pre_tags=pre_tags,
    )


def load_corpus(path) -> CorpusLoadResult:
    """Read a JSONL corpus, reporting malformed records by line number.

    An unreadable file raises :class:`DataError`; per-record problems are
    collected in the result so valid documents still load.
    """
    result = CorpusLoadResult()
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc}") from exc

    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            result.errors.append(RecordError(line_no, f"invalid JSON: {exc.msg}"))
            continue
        if not isinstance(record, dict):
            result.errors.append(RecordError(line_no, "record is not an object"))
            continue
        if set(record) == {"meta"}:
            continue  # artifact header line
        try:
            result.documents.append(_parse_record(record, line_no))
        except DataError as exc:
            result.errors.append(RecordError(line_no, str(exc)))
    return result


def tokenize(document: LabeledDocument) -> TokenizedDocument:
    """Tokenize a document (or honor its pre-supplied tokens) and stem."""
    if document.pre_tokens is not None:
        tokens = tuple(t.lower() for t in document.pre_tokens)
    else:
        tokens = tuple(tokenize_text(document.text))
    stems = tuple(stem_word(token) for token in tokens)
    return TokenizedDocument(tokens=tokens, stems=stems, source=document.id)


def _contains_contiguous(haystack: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    first = needle[0]
    for start in range(len(haystack) - len(needle) + 1):
        if haystack[start] == first and haystack[start : start + len(needle)] == needle:
            return True
    return False


def phrase_stems(phrase: str) -> tuple[str, ...]:
    return tuple(stem_word(t) for t in tokenize_text(phrase))


def partition_keyphrases(
    doc: TokenizedDocument, keyphrases
) -> tuple[set[str], set[str]]:
    """Split keyphrases into (present, absent) by stemmed contiguous match."""
    present: set[str] = set()
    absent: set[str] = set()
    for phrase in keyphrases:
        if _contains_contiguous(doc.stems, phrase_stems(phrase)):
            present.add(phrase)
        else:
            absent.add(phrase)
    return present, absent


@dataclass(frozen=True)
class CorpusStats:
    """The dataset-summary columns: mean/stddev of keyphrase counts, mean
    keyphrase word length, percent absent, and sample count."""

    kp_count_mean: float
    kp_count_std: float
    kp_length_mean: float
    pct_absent: float
    n_samples: int

    def as_dict(self) -> dict:
        return {
            "kp_count_mean": self.kp_count_mean,
            "kp_count_std": self.kp_count_std,
            "kp_length_mean": self.kp_length_mean,
            "pct_absent": self.pct_absent,
            "n_samples": self.n_samples,
        }


def corpus_stats(corpus) -> CorpusStats:
    """Compute corpus summary statistics.

    Keyphrase length is the whitespace word count, averaged over all gold
    keyphrases in the corpus; percent absent is likewise a global ratio.
    The count standard deviation is the population form.
    """
    corpus = list(corpus)
    if not corpus:
        raise DataError("corpus_stats requires a non-empty corpus")

    counts = [len(doc.keyphrases) for doc in corpus]
    mean = sum(counts) / len(counts)
    variance = sum((c - mean) ** 2 for c in counts) / len(counts)

    lengths: list[int] = []
    n_absent = 0
    total = 0
    for doc in corpus:
        tokenized = tokenize(doc)
        _, absent = partition_keyphrases(tokenized, doc.keyphrases)
        n_absent += len(absent)
        for phrase in doc.keyphrases:
            lengths.append(len(phrase.split()))
            total += 1
    return CorpusStats(
        kp_count_mean=mean,
        kp_count_std=math.sqrt(variance),
        kp_length_mean=sum(lengths) / total if total else 0.0,
        pct_absent=100.0 * n_absent / total if total else 0.0,
        n_samples=len(corpus),
    )
