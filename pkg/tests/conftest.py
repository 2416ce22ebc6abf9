import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from featopt.dataset import standardize_fit, stratified_split
from featopt.synthetic import benchmark_3class

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def benchmark():
    """The fixed 3-class Gaussian benchmark with its split and scaled views."""
    X, y = benchmark_3class(seed=42)
    split = stratified_split(y, (0.64, 0.16, 0.20), seed=42)
    scaler = standardize_fit(X[split.train])
    return {
        "X": X, "y": y, "split": split,
        "Xtr": X[split.train], "ytr": y[split.train],
        "Xv": X[split.val], "yv": y[split.val],
        "Xte": X[split.test], "yte": y[split.test],
        "Xtr_s": scaler.apply(X[split.train]),
        "Xv_s": scaler.apply(X[split.val]),
        "Xte_s": scaler.apply(X[split.test]),
    }


@pytest.fixture(scope="session")
def mini_fixture_dir():
    return FIXTURES / "mini"
