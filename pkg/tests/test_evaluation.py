import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from predcode.evaluation import (
    DEFAULT_RECALL_TARGETS, build_curve, check_recall_targets, model_summary,
    percent_reviewed_at_recall, precision_at_recall, required_relevant, write_curve_csv,
)


def curve_from_labels(labels):
    """Curve whose ranking is exactly ``labels`` (first is ranked highest)."""
    n = len(labels)
    scores = {f"d{i:04d}": float(n - i) for i in range(n)}
    return build_curve(scores, [(f"d{i:04d}", bool(y)) for i, y in enumerate(labels)])


def prefix_scan(labels, r):
    """Quadratic oracle: try every prefix length until recall r is reached."""
    total = sum(labels)
    for k in range(1, len(labels) + 1):
        found = sum(labels[:k])
        if found * 100 >= round(r * 100) * total:
            return 100.0 * k / len(labels), 100.0 * found / k
    raise AssertionError("unreachable")


def test_ordering_by_score_then_id():
    c = build_curve({"b": 1.0, "a": 1.0, "c": 2.0}, [("a", True), ("b", False), ("c", False)])
    assert c.doc_ids == ("c", "a", "b")
    assert c.cum_relevant.tolist() == [0, 1, 1]


def test_all_equal_scores_give_id_order():
    ids = ["x3", "x1", "x2"]
    c = build_curve(dict.fromkeys(ids, 0.0), [(i, True) for i in ids])
    assert c.doc_ids == ("x1", "x2", "x3")


def test_documents_from_corpus(toy_corpus):
    val = toy_corpus.validation()
    c = build_curve({d.id: float(i) for i, d in enumerate(val)}, val)
    assert c.total_relevant == sum(d.relevant for d in val)


def test_missing_score_and_no_relevant():
    with pytest.raises(KeyError):
        build_curve({}, [("a", True)])
    with pytest.raises(ValueError, match="no relevant"):
        build_curve({"a": 1.0}, [("a", False)])
    with pytest.raises(ValueError, match="NaN"):
        build_curve({"a": float("nan")}, [("a", True)])


def test_fixture_at_80_percent():
    c = curve_from_labels([1, 0, 1, 1, 0, 0, 1, 0, 1, 0])
    assert percent_reviewed_at_recall(c, 0.8) == 70.0
    assert precision_at_recall(c, 0.8) == 400 / 7


def test_perfect_and_worst_rankings():
    perfect = curve_from_labels([1] * 4 + [0] * 6)
    assert percent_reviewed_at_recall(perfect, 0.5) == 20.0
    assert all(precision_at_recall(perfect, r) == 100.0 for r in DEFAULT_RECALL_TARGETS)
    worst = curve_from_labels([0] * 6 + [1] * 4)
    assert percent_reviewed_at_recall(worst, 1.0) == 100.0
    assert percent_reviewed_at_recall(worst, 0.1) == 70.0


def test_summary_perfect_ranking_half_prevalence():
    c = curve_from_labels([1] * 50 + [0] * 50)
    assert model_summary(c) == pytest.approx(30.0, abs=1e-12)
    assert model_summary(c, [0.6]) == percent_reviewed_at_recall(c, 0.6)


def test_required_relevant_uses_decimal_recall():
    # 0.7 * 10 is 7.000000000000001 in floating point
    assert required_relevant(0.7, 10) == 7
    assert required_relevant(0.3, 10) == 3
    assert required_relevant(0.35, 3) == 2


def test_scrambled_twenty_doc_fixture():
    rng = np.random.default_rng(20)
    labels = (rng.random(20) < 0.4).astype(int).tolist()
    c = curve_from_labels(labels)
    assert (percent_reviewed_at_recall(c, 0.7), precision_at_recall(c, 0.7)) == prefix_scan(labels, 0.7)


@pytest.mark.parametrize("targets", [[], [0.5, 0.4], [0.0], [1.2], [0.3, 0.3]])
def test_bad_targets(targets):
    with pytest.raises(ValueError):
        check_recall_targets(targets)


label_lists = st.lists(st.booleans(), min_size=1, max_size=200).filter(any)


@given(label_lists, st.sampled_from(DEFAULT_RECALL_TARGETS + (1.0, 0.05)))
@settings(max_examples=300)
def test_metrics_match_prefix_scan(labels, r):
    c = curve_from_labels(labels)
    assert (percent_reviewed_at_recall(c, r), precision_at_recall(c, r)) == prefix_scan(labels, r)


@given(label_lists)
@settings(max_examples=200)
def test_percent_reviewed_non_decreasing(labels):
    c = curve_from_labels(labels)
    values = [percent_reviewed_at_recall(c, r) for r in DEFAULT_RECALL_TARGETS + (1.0,)]
    assert values == sorted(values)
    k = sum(labels)
    assert values[0] >= 100.0 * math.ceil(0.3 * k - 1e-9) / len(labels)


@given(st.lists(st.tuples(st.floats(-5, 5), st.booleans()), min_size=1, max_size=60).filter(
    lambda rows: any(y for _, y in rows)))
@settings(max_examples=200)
def test_cumulative_counts_match_recount(rows):
    scores = {f"d{i:03d}": s for i, (s, _) in enumerate(rows)}
    c = build_curve(scores, [(f"d{i:03d}", y) for i, (_, y) in enumerate(rows)])
    truth = dict((f"d{i:03d}", y) for i, (_, y) in enumerate(rows))
    expected = np.cumsum([truth[d] for d in c.doc_ids])
    assert c.cum_relevant.tolist() == expected.tolist()
    assert list(c.doc_ids) == sorted(scores, key=lambda d: (-scores[d], d))


def test_random_ranking_precision_near_base_rate():
    rng = np.random.default_rng(123)
    values = []
    for _ in range(50):
        labels = (rng.random(2000) < 0.2).tolist()
        c = curve_from_labels(labels)
        values.append(precision_at_recall(c, 0.8) - 100.0 * sum(labels) / len(labels))
    assert abs(np.mean(values)) < 1.0


def test_write_curve_csv(tmp_path):
    c = curve_from_labels([1, 0, 1])
    path = tmp_path / "curve.csv"
    write_curve_csv(c, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "rank,doc_id,score,label,cum_relevant"
    assert lines[1] == "1,d0000,3.0,relevant,1"
    assert len(lines) == 4
