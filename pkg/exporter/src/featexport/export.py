"""Run a backbone over an image folder and dump per-sample feature tensors.

The image directory must hold one subfolder per class. Outputs are one
.npy file per sample ([C, H, W] float32, or [C] when pooling on export)
plus a manifest.json binding files to labels, in the exact format the
downstream pipeline ingests. These features come from ImageNet-pretrained
weights only; they stand in for task-fine-tuned embeddings, so absolute
accuracies will sit below what fine-tuned backbones can reach.
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbones import FeatureTap, build_model, get_point

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
IMAGE_SIZE = 224


@dataclass(frozen=True)
class ExportSpec:
    backbone: str
    stage: str
    images: Path
    out: Path
    pool: bool = False
    pretrained: bool = True


def preprocess(image: Image.Image) -> torch.Tensor:
    image = image.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE),
                                        Image.Resampling.BILINEAR)
    x = torch.from_numpy(np.asarray(image, dtype=np.float32) / 255.0)
    x = x.permute(2, 0, 1)
    mean = torch.tensor(IMAGENET_MEAN).view(3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(3, 1, 1)
    return ((x - mean) / std).unsqueeze(0)


def _atomic_save_npy(path: Path, arr: np.ndarray) -> None:
    buf = io.BytesIO()
    np.save(buf, arr)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)


def list_images(images_dir: Path):
    """(relative_path, class_name) pairs, lexicographic by path."""
    classes = sorted(p.name for p in images_dir.iterdir() if p.is_dir())
    if not classes:
        raise ValueError(f"no class subfolders under {images_dir}")
    found = []
    for cls in classes:
        for p in sorted((images_dir / cls).iterdir()):
            if p.is_file():
                found.append((p.relative_to(images_dir), cls))
    return classes, found


def export(spec: ExportSpec) -> Path:
    """Returns the manifest path; skipped images are listed in skipped.txt."""
    point = get_point(spec.backbone, spec.stage)
    model = build_model(spec.backbone, pretrained=spec.pretrained)
    tap = FeatureTap(model, point)
    classes, images = list_images(spec.images)
    feat_dir = spec.out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    skipped = []
    with torch.no_grad():
        for rel, cls in images:
            try:
                img = Image.open(spec.images / rel)
                x = preprocess(img)
            except Exception as exc:
                print(f"warning: skipping undecodable image {rel}: {exc}")
                skipped.append(f"{rel}\t{exc}")
                continue
            model(x)
            fmap = tap.take()
            if fmap.shape[0] != point.channels:
                raise RuntimeError(
                    f"hook {point.hook} produced {fmap.shape[0]} channels, "
                    f"expected {point.channels}")
            if spec.pool:
                arr = fmap.mean(dim=(1, 2)).numpy().astype(np.float32)
            else:
                arr = fmap.numpy().astype(np.float32)
            sample_id = str(rel).replace(os.sep, "_").rsplit(".", 1)[0]
            fname = f"{sample_id}.npy"
            _atomic_save_npy(feat_dir / fname, arr)
            entries.append({
                "sample_id": sample_id,
                "label_name": cls,
                "feature_path": f"features/{fname}",
                "backbone": spec.backbone,
                "stage": spec.stage,
            })
    tap.close()
    if not entries:
        raise ValueError("no decodable images found")
    manifest = {
        "class_names": classes,
        "feature_dim": point.channels,
        "entries": entries,
        "export_info": {
            "backbone": spec.backbone,
            "stage": spec.stage,
            "hook": point.hook,
            "pooled_on_export": spec.pool,
            "pretrained": spec.pretrained,
            "image_size": IMAGE_SIZE,
        },
    }
    manifest_path = spec.out / "manifest.json"
    tmp = manifest_path.with_name("manifest.json.tmp")
    tmp.write_text(json.dumps(manifest, indent=1) + "\n")
    os.replace(tmp, manifest_path)
    if skipped:
        (spec.out / "skipped.txt").write_text("\n".join(skipped) + "\n")
    print(f"exported {len(entries)} samples "
          f"({spec.backbone}/{spec.stage}, dim {point.channels}) "
          f"-> {manifest_path}")
    return manifest_path
