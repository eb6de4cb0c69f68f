"""Macro-averaged F1@5 / F1@M, oracle recall, and threshold calibration.

All scoring happens over stemmed, deduplicated phrases. Documents with
an empty gold set for a metric are excluded from that macro average.
F1@5 pads short prediction lists to exactly five with sentinel phrases
that can never match gold, so its precision denominator is always five.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from kpforge.errors import DataError
from kpforge.stem import stem_phrase

PAD_SENTINELS = ("<pad-1>", "<pad-2>", "<pad-3>", "<pad-4>")


def dedup_stems(phrases) -> list[str]:
    """Stem each surface phrase exactly once and drop later duplicates,
    preserving order. Callers must pass raw (unstemmed) phrases, since
    the stemmer is not idempotent."""
    seen: set[str] = set()
    out: list[str] = []
    for phrase in phrases:
        stemmed = stem_phrase(phrase)
        if stemmed and stemmed not in seen:
            seen.add(stemmed)
            out.append(stemmed)
    return out


def _f1(n_correct: int, n_pred: int, n_gold: int) -> float:
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_at_m(predictions, gold) -> float | None:
    """F1 over however many predictions were made; None when gold is
    empty (the document drops out of the macro average)."""
    gold = set(gold)
    if not gold:
        return None
    predictions = list(predictions)
    if not predictions:
        return 0.0
    n_correct = sum(1 for p in predictions if p in gold)
    return _f1(n_correct, len(predictions), len(gold))


def f1_at_5(predictions, gold) -> float | None:
    """F1 over exactly five predictions, padding with sentinels that are
    guaranteed incorrect when fewer than five were made."""
    gold = set(gold)
    if not gold:
        return None
    top = list(predictions)[:5]
    pad_needed = 5 - len(top)
    if pad_needed > 0:
        top.extend(PAD_SENTINELS[:pad_needed])
    n_correct = sum(1 for p in top if p in gold)
    return _f1(n_correct, 5, len(gold))


def recall_at_n(candidates, gold, n: int) -> float | None:
    """Share of gold phrases covered by the top-n candidates."""
    gold = set(gold)
    if not gold:
        return None
    top = list(candidates)[:n]
    return sum(1 for g in gold if g in set(top)) / len(gold)


def select_by_threshold(scored, threshold: float, min_k: int = 5):
    """All phrases scoring >= threshold, topped up with the next-highest
    scorers to min_k (or everything available), in descending order."""
    ranked = sorted(scored, key=lambda p: (-p.score, p.stemmed))
    n_above = sum(1 for p in ranked if p.score >= threshold)
    keep = max(n_above, min(min_k, len(ranked)))
    return ranked[:keep]


def best_threshold_for_document(scored, gold) -> tuple[float, float]:
    """(threshold, F1@M) maximizing F1@M over this document's own score
    set; ties prefer the larger threshold."""
    if not scored:
        raise DataError("cannot calibrate on a document with no candidates")
    values = sorted({p.score for p in scored}, reverse=True)
    best_t, best_f1 = values[0], -1.0
    for t in values:
        picked = [p.stemmed for p in scored if p.score >= t]
        f1 = f1_at_m(picked, gold)
        f1 = 0.0 if f1 is None else f1
        if f1 > best_f1:
            best_t, best_f1 = t, f1
    return best_t, best_f1


def calibrate_threshold(validation_docs) -> float:
    """Mean of the per-document F1@M-maximizing thresholds.

    ``validation_docs`` is a sequence of (scored phrases, gold stems).
    """
    thresholds = []
    for scored, gold in validation_docs:
        if not scored:
            continue
        threshold, _ = best_threshold_for_document(scored, gold)
        thresholds.append(threshold)
    if not thresholds:
        raise DataError("threshold calibration needs at least one scored document")
    return float(sum(thresholds) / len(thresholds))


@dataclass
class DocumentScore:
    doc_id: str
    n_predictions: int
    n_gold: int
    f1_at_5: float | None
    f1_at_m: float | None


@dataclass
class EvalReport:
    """Macro scores plus the per-document records behind them."""

    f1_at_5: float
    f1_at_m: float
    n_documents: int
    n_scored: int
    per_document: list[DocumentScore] = field(default_factory=list)
    recall: float | None = None
    recall_n: int | None = None

    def as_dict(self) -> dict:
        payload = {
            "f1_at_5": self.f1_at_5,
            "f1_at_m": self.f1_at_m,
            "n_documents": self.n_documents,
            "n_scored": self.n_scored,
            "per_document": [
                {
                    "doc_id": d.doc_id,
                    "n_predictions": d.n_predictions,
                    "n_gold": d.n_gold,
                    "f1_at_5": d.f1_at_5,
                    "f1_at_m": d.f1_at_m,
                }
                for d in self.per_document
            ],
        }
        if self.recall_n is not None:
            payload["recall_n"] = self.recall_n
            payload["recall"] = self.recall
        return payload


def evaluate_documents(doc_predictions) -> EvalReport:
    """Macro-average F1@5/F1@M over (doc_id, predictions, gold) triples.

    Predictions and gold may be surface strings; both sides are stemmed
    and deduplicated here.
    """
    per_document = []
    f5_values, fm_values = [], []
    for doc_id, predictions, gold in doc_predictions:
        pred = dedup_stems(predictions)
        gold_stems = set(dedup_stems(gold))
        f5 = f1_at_5(pred, gold_stems)
        fm = f1_at_m(pred, gold_stems)
        per_document.append(
            DocumentScore(doc_id, len(pred), len(gold_stems), f5, fm)
        )
        if f5 is not None:
            f5_values.append(f5)
        if fm is not None:
            fm_values.append(fm)
    return EvalReport(
        f1_at_5=sum(f5_values) / len(f5_values) if f5_values else 0.0,
        f1_at_m=sum(fm_values) / len(fm_values) if fm_values else 0.0,
        n_documents=len(per_document),
        n_scored=len(fm_values),
        per_document=per_document,
    )
