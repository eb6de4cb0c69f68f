"""Metric exactness, padding rules, and threshold-calibration oracle."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kpforge.errors import DataError
from kpforge.evaluation import (
    best_threshold_for_document,
    calibrate_threshold,
    dedup_stems,
    evaluate_documents,
    f1_at_5,
    f1_at_m,
    recall_at_n,
    select_by_threshold,
)
from kpforge.extractor import ScoredPhrase


class TestF1AtM:
    def test_perfect(self):
        assert f1_at_m(["a", "b"], {"a", "b"}) == 1.0

    def test_hand_computed(self):
        assert f1_at_m(["a", "b", "c"], {"a", "b"}) == pytest.approx(0.8)

    def test_empty_predictions(self):
        assert f1_at_m([], {"a"}) == 0.0

    def test_empty_gold_excluded(self):
        assert f1_at_m(["a"], set()) is None

    def test_bounds(self):
        rng = np.random.default_rng(0)
        pool = list("abcdefgh")
        for _ in range(200):
            preds = list(rng.choice(pool, size=rng.integers(0, 6), replace=False))
            gold = set(rng.choice(pool, size=rng.integers(1, 5), replace=False))
            value = f1_at_m(preds, gold)
            assert 0.0 <= value <= 1.0
            if not set(preds) & gold:
                assert value == 0.0


class TestF1At5:
    def test_hand_computed_five_predictions(self):
        value = f1_at_5(["a", "c", "d", "e", "f"], {"a", "b"})
        assert value == pytest.approx(0.28571, abs=5e-6)

    def test_padding_matches_full_list(self):
        padded = f1_at_5(["a"], {"a", "b"})
        full = f1_at_5(["a", "c", "d", "e", "f"], {"a", "b"})
        assert padded == pytest.approx(full, abs=1e-12)
        assert padded == pytest.approx(0.28571, abs=5e-6)

    def test_perfect_five(self):
        gold = {"a", "b", "c", "d", "e"}
        assert f1_at_5(list("abcde"), gold) == 1.0

    def test_truncates_to_top_five(self):
        gold = {"f", "g"}
        assert f1_at_5(["a", "b", "c", "d", "e", "f", "g"], gold) == 0.0

    def test_padding_never_changes_scores_with_five_or_more(self):
        rng = np.random.default_rng(1)
        pool = list("abcdefghij")
        for _ in range(100):
            n = int(rng.integers(5, 9))
            preds = list(rng.choice(pool, size=n, replace=False))
            gold = set(rng.choice(pool, size=4, replace=False))
            assert f1_at_5(preds, gold) == f1_at_5(preds[:5], gold)

    def test_equals_f1_at_m_with_exactly_five(self):
        rng = np.random.default_rng(2)
        pool = list("abcdefghij")
        for _ in range(100):
            preds = list(rng.choice(pool, size=5, replace=False))
            gold = set(rng.choice(pool, size=int(rng.integers(1, 6)), replace=False))
            assert f1_at_5(preds, gold) == pytest.approx(
                f1_at_m(preds, gold), abs=1e-12
            )


class TestRecallAtN:
    def test_half(self):
        assert recall_at_n(["a"], {"a", "b"}, 50) == 0.5

    def test_n_larger_than_candidates(self):
        assert recall_at_n(["a", "b"], {"a", "b"}, 10) == 1.0

    def test_monotone_in_n(self):
        candidates = list("abcdef")
        gold = {"b", "d", "f"}
        values = [recall_at_n(candidates, gold, n) for n in range(1, 8)]
        assert values == sorted(values)

    def test_empty_gold_excluded(self):
        assert recall_at_n(["a"], set(), 5) is None


def sp(stemmed, score):
    return ScoredPhrase(stemmed, stemmed, score)


class TestSelectByThreshold:
    def test_selects_and_tops_up(self):
        scored = [sp("a", 0.9), sp("b", 0.6), sp("c", 0.2)]
        assert [p.stemmed for p in select_by_threshold(scored, 0.5, 5)] == ["a", "b", "c"]

    def test_threshold_minus_one_selects_all(self):
        scored = [sp("a", 0.9), sp("b", 0.6), sp("c", 0.2)]
        assert len(select_by_threshold(scored, -1.0, 2)) == 3

    def test_empty_input(self):
        assert select_by_threshold([], 0.5, 5) == []

    def test_no_top_up_beyond_selection_when_enough(self):
        scored = [sp(c, 1.0 - 0.1 * i) for i, c in enumerate("abcdefg")]
        picked = select_by_threshold(scored, 0.65, 3)
        assert [p.stemmed for p in picked] == ["a", "b", "c", "d"]


class TestCalibrateThreshold:
    def test_documented_example(self):
        scored = [sp("a", 0.9), sp("b", 0.5), sp("c", 0.3)]
        gold = {"a", "c"}
        threshold, best_f1 = best_threshold_for_document(scored, gold)
        assert threshold == pytest.approx(0.3)
        assert best_f1 == pytest.approx(0.8)

    def test_all_correct_takes_min_score(self):
        scored = [sp("a", 0.9), sp("b", 0.4)]
        threshold, best_f1 = best_threshold_for_document(scored, {"a", "b"})
        assert threshold == pytest.approx(0.4)
        assert best_f1 == 1.0

    def test_ties_prefer_larger_threshold(self):
        # Selecting {a} at 0.9 and {a, b} at 0.5 both give F1 = 2/3 when
        # gold is {a, x}; the larger threshold must win.
        scored = [sp("a", 0.9), sp("b", 0.5)]
        gold = {"a", "x"}
        threshold, _ = best_threshold_for_document(scored, gold)
        assert threshold == pytest.approx(0.9)

    def test_mean_over_documents(self):
        docs = [
            ([sp("a", 0.8)], {"a"}),
            ([sp("b", 0.4)], {"b"}),
        ]
        assert calibrate_threshold(docs) == pytest.approx(0.6)

    def test_requires_scored_documents(self):
        with pytest.raises(DataError):
            calibrate_threshold([([], {"a"})])

    def test_matches_dense_sweep_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n_docs = int(rng.integers(1, 6))
            docs = []
            for d in range(n_docs):
                n = int(rng.integers(1, 20))
                # Two-decimal score lattice keeps every inter-score gap
                # wider than the dense grid spacing.
                scores = np.round(rng.uniform(-1, 1, size=n), 2)
                names = [f"p{d}_{i}" for i in range(n)]
                scored = [sp(name, float(s)) for name, s in zip(names, scores)]
                gold = {name for name in names if rng.random() < 0.4}
                gold.add(names[int(rng.integers(0, n))])
                docs.append((scored, gold))

            exact = calibrate_threshold(docs)

            # Dense oracle: 1000 evenly spaced thresholds per document.
            dense_thresholds = []
            max_gap = 0.0
            for scored, gold in docs:
                values = [p.score for p in scored]
                lo, hi = min(values) - 1e-3, max(values) + 1e-3
                grid = np.linspace(lo, hi, 1000)
                best = (-1.0, lo)
                for t in grid:
                    picked = [p.stemmed for p in scored if p.score >= t]
                    f1 = f1_at_m(picked, gold) or 0.0
                    if f1 > best[0] or (f1 == best[0] and t > best[1]):
                        best = (f1, t)
                exact_t, exact_f1 = best_threshold_for_document(scored, gold)
                assert exact_f1 == pytest.approx(best[0], abs=1e-12)
                dense_thresholds.append(best[1])
                max_gap = max(max_gap, (hi - lo) / 999)
            dense_mean = float(np.mean(dense_thresholds))
            assert abs(exact - dense_mean) <= max_gap + 1e-12


class TestEvaluateDocuments:
    def test_surfaces_are_stemmed_and_deduped(self):
        report = evaluate_documents(
            [("d1", ["integral equations", "integral equation"], ["integral equations"])]
        )
        assert report.per_document[0].n_predictions == 1
        assert report.f1_at_m == 1.0

    def test_macro_is_permutation_invariant(self):
        docs = [
            ("a", ["x"], ["x", "y"]),
            ("b", ["z"], ["q"]),
            ("c", [], ["m"]),
        ]
        forward = evaluate_documents(docs)
        backward = evaluate_documents(list(reversed(docs)))
        assert forward.f1_at_m == pytest.approx(backward.f1_at_m)
        assert forward.f1_at_5 == pytest.approx(backward.f1_at_5)

    def test_documents_without_gold_excluded(self):
        report = evaluate_documents([("a", ["x"], []), ("b", ["y"], ["y"])])
        assert report.n_scored == 1
        assert report.f1_at_m == 1.0


class TestDedupStems:
    def test_keeps_first_surface_order(self):
        assert dedup_stems(["models", "model", "graph"]) == ["model", "graph"]

    @given(st.lists(st.sampled_from(["cats", "cat", "dogs", "dog run"]), max_size=6))
    def test_output_unique(self, phrases):
        out = dedup_stems(phrases)
        assert len(out) == len(set(out))
