import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import featopt.evaluation as ev


def brute_force_confusion(y_true, y_pred, K):
    """Oracle: nested-loop count."""
    cm = np.zeros((K, K), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        cm[t][p] += 1
    return cm


def test_perfect_predictions_diagonal():
    y = np.array([0, 1, 2, 1, 0, 2, 2])
    cm = ev.confusion(y, y, 3)
    assert np.array_equal(cm.counts, np.diag([2, 2, 3]))
    assert np.array_equal(cm.supports, [2, 2, 3])


def test_hand_counted_case():
    cm = ev.confusion([0, 0, 1, 2], [0, 1, 1, 2], 3)
    assert cm.counts.tolist() == [[1, 1, 0], [0, 1, 0], [0, 0, 1]]


def test_matches_nested_loop_oracle():
    rng = np.random.default_rng(0)
    y_true = rng.integers(0, 5, size=1000)
    y_pred = rng.integers(0, 5, size=1000)
    cm = ev.confusion(y_true, y_pred, 5)
    assert np.array_equal(cm.counts, brute_force_confusion(y_true, y_pred, 5))


def test_sample_order_irrelevant():
    rng = np.random.default_rng(1)
    y_true = rng.integers(0, 3, size=200)
    y_pred = rng.integers(0, 3, size=200)
    perm = rng.permutation(200)
    a = ev.confusion(y_true, y_pred, 3)
    b = ev.confusion(y_true[perm], y_pred[perm], 3)
    assert np.array_equal(a.counts, b.counts)


def test_length_mismatch_and_range_errors():
    with pytest.raises(ValueError, match="length"):
        ev.confusion([0, 1], [0], 2)
    with pytest.raises(ValueError, match="outside"):
        ev.confusion([0, 3], [0, 1], 3)


def test_diagonal_metrics_all_one():
    m = ev.metrics(ev.ConfusionMatrix(np.diag([4, 5, 6])))
    assert m.accuracy == 1.0
    assert m.f1_macro == m.precision_weighted == m.recall_macro == 1.0


def test_hand_arithmetic_two_class():
    m = ev.metrics(ev.ConfusionMatrix(np.array([[50, 10], [10, 30]])))
    assert m.accuracy == pytest.approx(0.8)
    assert m.precision_macro == pytest.approx((50 / 60 + 30 / 40) / 2)
    assert m.recall_macro == pytest.approx((50 / 60 + 30 / 40) / 2)
    assert m.precision[0] == pytest.approx(50 / 60)
    assert m.recall[1] == pytest.approx(30 / 40)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2 ** 31 - 1))
def test_weighted_recall_equals_accuracy(K, seed):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 30, size=(K, K))
    if counts.sum() == 0:
        counts[0, 0] = 1
    m = ev.metrics(ev.ConfusionMatrix(counts))
    assert m.recall_weighted == m.accuracy
    # the telescoped value must agree with the literal weighted mean
    explicit = float((m.recall * counts.sum(axis=1) / counts.sum()).sum())
    assert m.recall_weighted == pytest.approx(explicit, abs=1e-12)


def test_zero_column_gives_zero_precision():
    cm = ev.ConfusionMatrix(np.array([[0, 3], [0, 5]]))
    m = ev.metrics(cm)
    assert m.precision[0] == 0.0
    assert m.f1[0] == 0.0


def test_swapped_binary_labels_swap_roles():
    counts = np.array([[40, 7], [12, 21]])
    m = ev.metrics(ev.ConfusionMatrix(counts))
    swapped = ev.metrics(ev.ConfusionMatrix(counts[::-1, ::-1]))
    assert m.precision[0] == swapped.precision[1]
    assert m.recall[1] == swapped.recall[0]


def test_macro_f1_between_min_and_max():
    rng = np.random.default_rng(3)
    for _ in range(50):
        counts = rng.integers(0, 20, size=(4, 4))
        counts[np.arange(4), np.arange(4)] += 1
        m = ev.metrics(ev.ConfusionMatrix(counts))
        assert m.f1.min() - 1e-12 <= m.f1_macro <= m.f1.max() + 1e-12


# --- report assembly -------------------------------------------------------------

def _cell(selector, fraction, dim, kind, accuracy, n=100, K=3):
    """Cell with an exact accuracy built from a synthetic confusion matrix."""
    correct = round(accuracy * n)
    counts = np.zeros((K, K), dtype=np.int64)
    base = correct // K
    counts[np.arange(K), np.arange(K)] = base
    counts[0, 0] += correct - base * K
    off = n - correct
    counts[0, 1] += off // 2
    counts[1, 2] += off - off // 2
    cm = ev.ConfusionMatrix(counts)
    return ev.CellResult(selector, fraction, dim, kind, ev.metrics(cm), cm)


def test_single_cell_report_is_baseline_only():
    cells = [_cell("none", 1.0, 64, "et", 0.84)]
    report = ev.build_report(cells, selectors=[])
    assert "Baseline" in ev.impact_table(cells, "none")[0]
    assert report.csv_text.count("\n") == 2  # header + one row


def test_impact_format_plus_009():
    cells = [
        _cell("none", 1.0, 768, "et", 0.8590, n=10000),
        _cell("gbdt", 0.5, 384, "rf", 0.8599, n=10000),
    ]
    text, csv_text = ev.impact_table(cells, "gbdt")
    assert "+0.09%" in text
    assert "Baseline" in text
    assert csv_text.splitlines()[1].endswith("Baseline")


def test_signed_percent_rendering():
    assert ev.signed_pct_points(0.0009) == "+0.09%"
    assert ev.signed_pct_points(-0.0023) == "-0.23%"
    assert ev.signed_pct_points(0.0) == "+0.00%"
    assert ev.signed_pct_points(0.0011) == "+0.11%"
    assert ev.pct(0.8599) == "85.99"
    # 0.65625 = 21/32 is exact in binary; its third decimal is a true 5,
    # so half-up must round upward (banker's rounding would give 65.62)
    assert ev.pct(0.65625) == "65.63"
    assert ev.pct(1.0) == "100.00"


def test_report_csv_deterministic():
    cells = [_cell("none", 1.0, 64, k, 0.8) for k in ("lr", "rf")]
    cells += [_cell("rf", 0.5, 32, "lr", 0.82)]
    a = ev.report_csv(cells)
    b = ev.report_csv(list(cells))
    assert a == b
    header = a.splitlines()[0]
    assert header == ",".join(ev.CSV_COLUMNS)


def test_confusion_csv_layout():
    cm = ev.ConfusionMatrix(np.array([[2, 1], [0, 3]]))
    text = ev.confusion_csv(cm, ["Fresh", "Not fresh"])
    lines = text.strip().splitlines()
    assert lines[0] == "true\\pred,Fresh,Not fresh"
    assert lines[1] == "Fresh,2,1"
    assert lines[2] == "Not fresh,0,3"
