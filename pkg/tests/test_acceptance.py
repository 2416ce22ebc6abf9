"""Acceptance criteria, one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.
"""

import shutil
import time
from pathlib import Path

import numpy as np
import pytest

import featopt.classifiers as clf
import featopt.evaluation as ev
import featopt.feature_selection as fs
from featopt import cli
from featopt.classifiers.mlp import loss_and_grad
from featopt.dataset import standardize_fit, stratified_split
from featopt.pooling import global_average_pool
from featopt.rng import Rng
from featopt.synthetic import benchmark_3class
from featopt.tensor_io import Tensor
from featopt.tuning import default_search_space, random_search

from golden_cells import golden_cells

GOLDEN = Path(__file__).parent / "golden"
MINI_CFG = str(Path(__file__).parent / "fixtures" / "mini" / "experiment.cfg")


def _verdict(name: str, ok: bool, detail: str, started: float, limit: float):
    elapsed = time.perf_counter() - started
    status = "PASS" if ok and elapsed <= limit else "FAIL"
    print(f"[{name}] {status} ({elapsed:.1f}s / limit {limit:.0f}s) {detail}")
    assert ok, f"{name}: {detail}"
    assert elapsed <= limit, f"{name}: exceeded time limit ({elapsed:.1f}s)"


def test_p1_subset_count_arithmetic():
    started = time.perf_counter()
    published = [(768, 0.50, 384), (768, 0.40, 308), (768, 0.30, 231),
                 (768, 0.20, 154), (768, 0.10, 77), (768, 0.05, 39),
                 (1024, 0.10, 103), (2048, 0.10, 205), (320, 0.50, 160)]
    bad = [(d, p, fs.subset_size(d, p), want)
           for d, p, want in published if fs.subset_size(d, p) != want]
    _verdict("P1", not bad, f"9 published dimensions exact; failures={bad}",
             started, 1.0)


def test_p2_split_arithmetic():
    started = time.perf_counter()
    sizes = (1764, 1320, 1306)
    y = np.concatenate([np.full(m, c) for c, m in enumerate(sizes)])
    s = stratified_split(y, (0.64, 0.16, 0.20), seed=0)
    got = (len(s.train), len(s.val), len(s.test))
    ok = got == (2807, 701, 882) and sum(got) == 4390
    _verdict("P2", ok, f"totals {got}, sum {sum(got)}", started, 1.0)


def test_p3_gap_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        c = int(rng.integers(1, 9))
        h = int(rng.integers(1, 8))
        w = int(rng.integers(1, 8))
        data = rng.normal(size=(c, h, w))
        got = global_average_pool(Tensor.from_array(data))
        want = np.array([[float(sum(sum(data[ci, i, j] for j in range(w))
                                    for i in range(h))) / (h * w)]
                         for ci in range(c)]).ravel()
        worst = max(worst, float(np.max(np.abs(got - want))))
    _verdict("P3", worst <= 1e-12, f"worst |diff| = {worst:.2e}", started, 5.0)


def test_p4_metric_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(11)
    ok = True
    for _ in range(100):
        K = int(rng.integers(2, 6))
        n = int(rng.integers(5, 200))
        y_true = rng.integers(0, K, size=n)
        y_pred = rng.integers(0, K, size=n)
        cm = ev.confusion(y_true, y_pred, K)
        brute = np.zeros((K, K), dtype=np.int64)
        for t, p in zip(y_true, y_pred):
            brute[t][p] += 1
        ok &= np.array_equal(cm.counts, brute)
        m = ev.metrics(cm)
        acc_brute = float((y_true == y_pred).mean())
        ok &= abs(m.accuracy - acc_brute) < 1e-12
        ok &= m.recall_weighted == m.accuracy
        per_class_recall = [brute[c][c] / brute[c].sum() if brute[c].sum() else 0.0
                            for c in range(K)]
        ok &= np.allclose(m.recall, per_class_recall)
    _verdict("P4", ok, "100 random vectors match nested-loop oracle; "
             "weighted recall == accuracy", started, 5.0)


def test_p5_classifier_floor():
    started = time.perf_counter()
    X, y = benchmark_3class(seed=42)
    split = stratified_split(y, (0.64, 0.16, 0.20), seed=42)
    scaler = standardize_fit(X[split.train])
    results = {}
    for kind in clf.KINDS:
        std = kind in ("lr", "knn", "svm", "mlp")
        parts = []
        for idx in (split.train, split.val, split.test):
            parts.append(scaler.apply(X[idx]) if std else X[idx])
        Xtr, Xv, Xte = parts
        seed = Rng(42).spawn("acceptance-p5", kind).seed
        search = random_search(kind, default_search_space(kind), 30,
                               Xtr, y[split.train], Xv, y[split.val], seed)
        model = clf.fit(kind, Xtr, y[split.train], search.best_params,
                        seed=Rng(seed).spawn("final").seed)
        results[kind] = float((clf.predict(model, Xte) == y[split.test]).mean())
    bad = {k: v for k, v in results.items() if v < 0.95}
    detail = " ".join(f"{k}={v:.3f}" for k, v in results.items())
    _verdict("P5", not bad, detail, started, 300.0)


def test_p6_injected_signal_selection():
    started = time.perf_counter()
    gbdt_hits = rf_hits = 0
    lasso_ok = True
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        X = rng.normal(size=(400, 64))
        y = rng.integers(0, 2, size=400).astype(np.int64)
        X[:, 31] = y
        if fs.rank_by_gbdt(X, y, seed=seed).order[0] == 31:
            gbdt_hits += 1
        if fs.rank_by_rf(X, y, seed=seed).order[0] == 31:
            rf_hits += 1
        Xs = standardize_fit(X).apply(X)
        lam = 0.1 * fs.lasso_lambda_max(Xs, y)
        r = fs.rank_by_lasso(Xs, y, fs.LassoParams(lam))
        noise = np.delete(r.scores, 31)
        lasso_ok &= r.scores[31] > 0 and (noise == 0).mean() >= 0.80
    ok = gbdt_hits == 10 and rf_hits == 10 and lasso_ok
    _verdict("P6", ok, f"gbdt {gbdt_hits}/10, rf {rf_hits}/10, "
             f"lasso sparse-recovery ok={lasso_ok}", started, 120.0)


def test_p7_lasso_solver_and_mlp_gradients():
    started = time.perf_counter()
    rng = np.random.default_rng(17)
    X = rng.normal(size=(120, 10))
    y = rng.integers(0, 2, size=120).astype(np.int64)
    X[:, 0] = y
    X = standardize_fit(X).apply(X)
    lam_mid = 0.05 * fs.lasso_lambda_max(X, y)
    fit = fs.fit_lasso(X, y, fs.LassoParams(lam_mid))
    hist = fit.objective_history
    monotone = all(b <= a + 1e-10 for a, b in zip(hist, hist[1:]))
    all_zero = np.all(fs.fit_lasso(
        X, y, fs.LassoParams(fs.lasso_lambda_max(X, y) * 1.0001)).W == 0)
    # generic non-separable fixture for the lambda=0 dense endpoint
    Xg = rng.normal(size=(150, 6))
    yg = ((1.5 * Xg[:, 0] - Xg[:, 3] + rng.normal(size=150)) > 0).astype(np.int64)
    Xg = standardize_fit(Xg).apply(Xg)
    dense = fs.fit_lasso(Xg, yg, fs.LassoParams(0.0, max_iter=2000))
    nonzero_full = int((np.abs(dense.W).max(axis=0) > 0).sum()) == 6

    Xm = rng.normal(size=(5, 4))
    ym = np.array([0, 1, 2, 1, 0])
    Y = np.eye(3)[ym]
    gen = Rng(3)
    params = [gen.normals(6 * 4).reshape(6, 4) * 0.5, gen.normals(6) * 0.1,
              gen.normals(3 * 6).reshape(3, 6) * 0.5, gen.normals(3) * 0.1]
    _, grads = loss_and_grad(params, Xm, Y)
    eps = 1e-6
    grad_ok = True
    for p, g in zip(params, grads):
        flat, gflat = p.ravel(), g.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lp, _ = loss_and_grad(params, Xm, Y)
            flat[idx] = orig - eps
            lm, _ = loss_and_grad(params, Xm, Y)
            flat[idx] = orig
            numeric = (lp - lm) / (2 * eps)
            denom = max(abs(numeric), abs(gflat[idx]), 1e-8)
            grad_ok &= abs(numeric - gflat[idx]) / denom < 1e-4
    ok = monotone and all_zero and nonzero_full and grad_ok
    _verdict("P7", ok, f"monotone={monotone} zero-at-lambda-max={all_zero} "
             f"dense-at-zero={nonzero_full} mlp-grad={grad_ok}", started, 60.0)


@pytest.mark.slow
def test_p8_pipeline_determinism(tmp_path):
    started = time.perf_counter()
    run_a, run_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["all", "--config", MINI_CFG, "--out", str(run_a),
                     "--jobs", "1"]) == 0
    assert cli.main(["all", "--config", MINI_CFG, "--out", str(run_b),
                     "--jobs", "8"]) == 0
    cell_count = len(list((run_a / "sweep" / "cells").glob("*.json"))) + 7
    report_files = sorted(p.relative_to(run_a)
                          for p in (run_a / "report").rglob("*.csv"))
    report_files += [Path("report/classifier_table.txt")]
    diffs = [str(rel) for rel in report_files
             if (run_a / rel).read_bytes() != (run_b / rel).read_bytes()]
    ok = cell_count == 133 and not diffs
    _verdict("P8", ok, f"{cell_count} cells; jobs=1 vs jobs=8 over "
             f"{len(report_files)} report files, diffs={diffs}", started, 600.0)
    shutil.rmtree(tmp_path, ignore_errors=True)


def test_p9_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(29)
    Xtr = rng.normal(size=(120, 6))
    ytr = rng.integers(0, 3, size=120).astype(np.int64)
    Xq = rng.normal(size=(50, 6))
    model = clf.fit("knn", Xtr, ytr, {"k": 5, "metric": "euclidean"}, seed=0)
    got = clf.predict(model, Xq)
    want = np.empty(50, dtype=np.int64)
    for i in range(50):
        dists = [(float(((Xq[i] - Xtr[j]) ** 2).sum()), j) for j in range(120)]
        dists.sort()
        votes = np.zeros(3, dtype=np.int64)
        for _, j in dists[:5]:
            votes[ytr[j]] += 1
        want[i] = int(np.argmax(votes))
    knn_ok = np.array_equal(got, want)

    from featopt.trees import grow_tree
    t = grow_tree(np.array([[1.0], [2.0], [3.0], [4.0]]),
                  np.array([0, 0, 1, 1]), np.arange(4),
                  threshold_mode="exhaustive", n_classes=2)
    tree_ok = (t.feature[0] == 0 and 2.0 < t.threshold[0] < 3.0
               and t.dist[t.left[0]].tolist() == [1.0, 0.0]
               and t.dist[t.right[0]].tolist() == [0.0, 1.0])
    _verdict("P9", knn_ok and tree_ok,
             f"knn-oracle={knn_ok} tree-fixture={tree_ok}", started, 10.0)


def test_p10_report_shape_golden_files():
    started = time.perf_counter()
    cells = golden_cells()
    diffs = []
    got = {
        "classifier_table.txt": ev.classifier_table(cells),
        "report.csv": ev.report_csv(cells),
    }
    got["impact_table.txt"], got["impact_table.csv"] = ev.impact_table(cells,
                                                                       "gbdt")
    for name, text in got.items():
        if (GOLDEN / name).read_text() != text:
            diffs.append(name)
    impact = got["impact_table.txt"]
    shape_ok = ("Baseline" in impact and "+0.34%" in impact
                and "-2.85%" in impact
                and got["classifier_table.txt"].splitlines()[0].split()
                == ["Model", "Accuracy", "Recall", "Precision", "F1-score"])
    _verdict("P10", not diffs and shape_ok,
             f"golden diffs={diffs} shape_ok={shape_ok}", started, 1.0)
