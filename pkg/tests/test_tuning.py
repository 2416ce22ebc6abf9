import pytest

import featopt.classifiers as clf
from featopt.tuning import (Categorical, IntRange, LogUniform, SearchSpace,
                            Uniform, default_search_space, random_search,
                            trial_log_csv)


def test_budget_one_returns_the_single_point(benchmark):
    space = default_search_space("knn")
    res = random_search("knn", space, 1, benchmark["Xtr_s"], benchmark["ytr"],
                        benchmark["Xv_s"], benchmark["yv"], seed=5)
    assert res.best_trial == 0
    assert res.best_params == res.records[0].params
    assert len(res.records) == 1


def test_degenerate_space_forces_point(benchmark):
    space = SearchSpace(k=Categorical((3,)), metric=Categorical(("euclidean",)))
    res = random_search("knn", space, 4, benchmark["Xtr_s"], benchmark["ytr"],
                        benchmark["Xv_s"], benchmark["yv"], seed=1)
    assert res.best_params == {"k": 3, "metric": "euclidean"}
    assert all(r.params == res.best_params for r in res.records)


def test_prefix_property_budget_20_beats_budget_1(benchmark):
    space = default_search_space("knn")
    args = (benchmark["Xtr_s"], benchmark["ytr"], benchmark["Xv_s"],
            benchmark["yv"])
    r1 = random_search("knn", space, 1, *args, seed=9)
    r20 = random_search("knn", space, 20, *args, seed=9)
    assert r20.records[0].params == r1.records[0].params
    assert r20.best_accuracy >= r1.best_accuracy


def test_running_max_non_decreasing(benchmark):
    space = default_search_space("lr")
    res = random_search("lr", space, 8, benchmark["Xtr_s"], benchmark["ytr"],
                        benchmark["Xv_s"], benchmark["yv"], seed=2)
    running = -1.0
    best_trial = None
    for r in res.records:
        if r.val_accuracy > running:
            running = r.val_accuracy
            best_trial = r.trial
    assert running == res.best_accuracy
    assert best_trial == res.best_trial  # ties resolve to the earliest trial


def test_identical_inputs_identical_trials(benchmark):
    space = default_search_space("gbdt")
    args = (benchmark["Xtr"][:90], benchmark["ytr"][:90], benchmark["Xv"],
            benchmark["yv"])
    a = random_search("gbdt", space, 5, *args, seed=3)
    b = random_search("gbdt", space, 5, *args, seed=3)
    assert [r.params for r in a.records] == [r.params for r in b.records]
    assert [r.val_accuracy for r in a.records] == [r.val_accuracy for r in b.records]


def test_fit_failure_recorded_not_raised(benchmark, monkeypatch):
    calls = {"n": 0}
    real_fit = clf.fit

    def flaky_fit(kind, X, y, params, seed=0):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("boom")
        return real_fit(kind, X, y, params, seed=seed)

    monkeypatch.setattr("featopt.tuning.clf.fit", flaky_fit)
    space = default_search_space("knn")
    res = random_search("knn", space, 4, benchmark["Xtr_s"], benchmark["ytr"],
                        benchmark["Xv_s"], benchmark["yv"], seed=8)
    assert len(res.records) == 4
    assert res.records[1].val_accuracy == 0.0
    assert "boom" in res.records[1].error
    assert res.best_accuracy > 0


def test_trial_log_format(benchmark):
    space = default_search_space("knn")
    res = random_search("knn", space, 2, benchmark["Xtr_s"], benchmark["ytr"],
                        benchmark["Xv_s"], benchmark["yv"], seed=4)
    text = trial_log_csv(res.records)
    lines = text.strip().splitlines()
    assert lines[0] == "trial,seed,params_json,val_accuracy,fit_seconds"
    assert len(lines) == 3
    assert lines[1].startswith("0,")


def test_distribution_validation():
    with pytest.raises(ValueError):
        SearchSpace(x=Uniform(2.0, 1.0))
    with pytest.raises(ValueError):
        SearchSpace(x=LogUniform(1.0, 1.0))
    with pytest.raises(ValueError):
        SearchSpace(x=Categorical(()))
    with pytest.raises(ValueError):
        SearchSpace(x=IntRange(5, 4))


def test_sampled_values_respect_ranges():
    from featopt.rng import Rng
    space = SearchSpace(a=Uniform(-1.0, 1.0), b=LogUniform(1e-3, 1e3),
                        c=IntRange(2, 9), d=Categorical(("x", "y")))
    rng = Rng(0)
    for _ in range(200):
        p = space.sample(rng)
        assert -1.0 <= p["a"] < 1.0
        assert 1e-3 <= p["b"] <= 1e3
        assert 2 <= p["c"] <= 9
        assert p["d"] in ("x", "y")


def test_budget_zero_rejected(benchmark):
    with pytest.raises(ValueError):
        random_search("knn", default_search_space("knn"), 0,
                      benchmark["Xtr_s"], benchmark["ytr"],
                      benchmark["Xv_s"], benchmark["yv"], seed=0)
