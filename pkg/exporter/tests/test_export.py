import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from featexport.backbones import FeatureTap, build_model, get_point
from featexport.export import ExportSpec, export, preprocess

PRIMARY_SRC = Path(__file__).resolve().parents[2] / "src"

# Table of expected channel counts per (backbone, mid, high)
EXPECTED_CHANNELS = {
    "swin_tiny": (384, 768),
    "convnext_base": (512, 1024),
    "efficientnet_b0": (192, 320),
    "densenet121": (1024, 1024),
    "resnet50": (1024, 2048),
}


def make_images(root: Path, per_class: int = 3, size: int = 64):
    rng = np.random.default_rng(5)
    classes = ["Highly fresh", "Fresh", "Not fresh"]
    for ci, cls in enumerate(classes):
        d = root / cls
        d.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            arr = rng.integers(0, 120, size=(size, size, 3), dtype=np.uint8)
            arr[..., ci % 3] += 100  # per-class tint
            Image.fromarray(arr).save(d / f"img{i:02d}.png")
    return classes


@pytest.fixture(scope="module")
def image_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("imgs")
    make_images(root)
    return root


def run_primary(*args, cwd=None):
    env = dict(os.environ, PYTHONPATH=str(PRIMARY_SRC))
    return subprocess.run([sys.executable, "-m", "featopt.cli", *args],
                          capture_output=True, text=True, env=env, cwd=cwd)


def test_s1_channel_counts_all_backbones(image_dir):
    """Acceptance S1: per-backbone channel counts on a single test image."""
    started = time.perf_counter()
    x = preprocess(Image.open(next((image_dir / "Fresh").iterdir())))
    results = {}
    import torch
    for backbone, (want_mid, want_high) in EXPECTED_CHANNELS.items():
        model = build_model(backbone, pretrained=False)
        got = []
        for stage in ("mid", "high"):
            tap = FeatureTap(model, get_point(backbone, stage))
            with torch.no_grad():
                model(x)
            fmap = tap.take()
            tap.close()
            assert fmap.dim() == 3
            got.append(fmap.shape[0])
        results[backbone] = tuple(got)
        assert results[backbone] == (want_mid, want_high), \
            f"{backbone}: got {results[backbone]}"
    elapsed = time.perf_counter() - started
    print(f"[S1] PASS ({elapsed:.1f}s / limit 300s) {results}")
    assert elapsed < 300


def test_s2_export_ingests_cleanly_and_pooling_paths_agree(image_dir, tmp_path):
    """Acceptance S2: manifest+tensors pass cmd_ingest; pooled-on-export and
    pooled-by-primary vectors agree within 1e-5."""
    started = time.perf_counter()
    maps_dir, pooled_dir = tmp_path / "maps", tmp_path / "pooled"
    for pool, out in ((False, maps_dir), (True, pooled_dir)):
        export(ExportSpec("efficientnet_b0", "mid", image_dir, out,
                          pool=pool, pretrained=False))
    # both manifests must ingest with zero validation errors via the CLI
    stores = {}
    for name, out in (("maps", maps_dir), ("pooled", pooled_dir)):
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text(f"[data]\nmanifest = {out / 'manifest.json'}\n"
                       f"[run]\nseed = 1\n")
        run_dir = tmp_path / f"run_{name}"
        proc = run_primary("ingest", "--config", str(cfg), "--out", str(run_dir))
        assert proc.returncode == 0, proc.stderr
        stores[name] = np.load(run_dir / "store" / "features.npy")
    agree = np.max(np.abs(stores["maps"] - stores["pooled"]))
    assert stores["maps"].shape == (9, 192)
    assert agree <= 1e-5, f"pooling paths differ by {agree}"
    elapsed = time.perf_counter() - started
    print(f"[S2] PASS ({elapsed:.1f}s) max pooling-path gap {agree:.2e}")


def test_manifest_layout_matches_ingest_schema(image_dir, tmp_path):
    export(ExportSpec("efficientnet_b0", "mid", image_dir, tmp_path,
                      pool=True, pretrained=False))
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["feature_dim"] == 192
    assert doc["class_names"] == ["Fresh", "Highly fresh", "Not fresh"]
    assert len(doc["entries"]) == 9
    first = doc["entries"][0]
    assert set(first) == {"sample_id", "label_name", "feature_path",
                          "backbone", "stage"}
    assert doc["export_info"]["hook"] == "features.6"
    # lexicographic order by path
    paths = [e["feature_path"] for e in doc["entries"]]
    assert paths == sorted(paths)


def test_identical_images_give_identical_tensors(image_dir, tmp_path):
    src = next((image_dir / "Fresh").iterdir())
    dup_root = tmp_path / "dups"
    (dup_root / "only").mkdir(parents=True)
    data = src.read_bytes()
    (dup_root / "only" / "a.png").write_bytes(data)
    (dup_root / "only" / "b.png").write_bytes(data)
    export(ExportSpec("efficientnet_b0", "high", dup_root, tmp_path / "out",
                      pool=False, pretrained=False))
    a = np.load(tmp_path / "out" / "features" / "only_a.npy")
    b = np.load(tmp_path / "out" / "features" / "only_b.npy")
    assert a.shape[0] == 320
    assert a.tobytes() == b.tobytes()


def test_undecodable_image_skipped_with_log(image_dir, tmp_path):
    broken_root = tmp_path / "imgs"
    (broken_root / "Fresh").mkdir(parents=True)
    good = next((image_dir / "Fresh").iterdir())
    (broken_root / "Fresh" / "good.png").write_bytes(good.read_bytes())
    (broken_root / "Fresh" / "broken.png").write_bytes(b"not an image")
    out = tmp_path / "out"
    export(ExportSpec("efficientnet_b0", "mid", broken_root, out,
                      pool=True, pretrained=False))
    doc = json.loads((out / "manifest.json").read_text())
    assert len(doc["entries"]) == 1
    assert "broken.png" in (out / "skipped.txt").read_text()


def test_unknown_backbone_rejected():
    with pytest.raises(ValueError, match="unknown backbone"):
        get_point("vgg16", "mid")
    with pytest.raises(ValueError, match="unknown stage"):
        get_point("resnet50", "low")
