"""Input coercion and validation helpers for the estimator API."""

from __future__ import annotations

from kpforge.corpus import LabeledDocument
from kpforge.errors import DataError


def coerce_documents(X, y=None) -> list[LabeledDocument]:
    """Normalize estimator input into labeled documents.

    ``X`` may hold raw text strings, corpus-record dicts, or
    :class:`LabeledDocument` instances; ``y`` optionally supplies one
    keyphrase list per document and overrides any labels already in X.
    """
    X = list(X)
    if y is not None:
        y = list(y)
        if len(y) != len(X):
            raise DataError(f"X has {len(X)} documents but y has {len(y)} label lists")

    documents: list[LabeledDocument] = []
    for i, item in enumerate(X):
        keyphrases = tuple(y[i]) if y is not None else None
        if isinstance(item, LabeledDocument):
            doc = item
            if keyphrases is not None:
                doc = LabeledDocument(
                    id=doc.id,
                    title=doc.title,
                    abstract=doc.abstract,
                    keyphrases=keyphrases,
                    pre_tokens=doc.pre_tokens,
                    pre_tags=doc.pre_tags,
                )
        elif isinstance(item, dict):
            doc = LabeledDocument(
                id=str(item.get("id", f"doc{i:06d}")),
                title=str(item.get("title", "")),
                abstract=str(item.get("abstract", "")),
                keyphrases=keyphrases or tuple(item.get("keyphrases", ())),
            )
        elif isinstance(item, str):
            doc = LabeledDocument(
                id=f"doc{i:06d}",
                title="",
                abstract=item,
                keyphrases=keyphrases or (),
            )
        else:
            raise DataError(
                f"document {i} has unsupported type {type(item).__name__}; "
                "expected str, dict, or LabeledDocument"
            )
        documents.append(doc)
    return documents


def require_labels(documents) -> None:
    if not any(doc.keyphrases for doc in documents):
        raise DataError("fitting requires gold keyphrases (pass y or labeled records)")
