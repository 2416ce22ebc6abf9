"""Regenerate the bundled 300x64 demo fixture under tests/fixtures/mini.

The fixture is committed; rerunning this script reproduces it byte-for-byte.
"""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from featopt.synthetic import gaussian_blobs
from featopt.tensor_io import Tensor, write_array

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "mini"
CLASSES = ["Highly fresh", "Fresh", "Not fresh"]


def main():
    X, y = gaussian_blobs(300, 64, n_classes=3, separation=3.0, seed=20240,
                          informative=12, class_weights=(0.40, 0.30, 0.30))
    feat_dir = OUT / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(X.shape[0]):
        name = f"s{i:04d}.npy"
        vec = X[i].astype(np.float32)
        (feat_dir / name).write_bytes(write_array(Tensor.from_array(vec)))
        entries.append({
            "sample_id": f"s{i:04d}",
            "label_name": CLASSES[int(y[i])],
            "feature_path": f"features/{name}",
            "backbone": "synthetic",
            "stage": "high",
        })
    manifest = {"class_names": CLASSES, "feature_dim": 64, "entries": entries}
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    print(f"wrote {len(entries)} tensors under {OUT}")


if __name__ == "__main__":
    main()
