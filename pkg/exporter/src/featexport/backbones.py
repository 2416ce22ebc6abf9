"""Backbone registry: extraction points, channel counts, and model builders.

Features come from ImageNet-pretrained torchvision models with a forward
hook at the named block. Transformer-style blocks emit NHWC token grids;
those are permuted to CHW before leaving this module, so downstream code
always sees [C, H, W].
"""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass(frozen=True)
class ExtractionPoint:
    backbone: str
    stage: str       # 'mid' | 'high'
    hook: str        # dotted module path inside the model
    channels: int
    channels_last: bool = False  # output layout is NHWC (token grid)


POINTS = {
    ("resnet50", "mid"): ExtractionPoint("resnet50", "mid", "layer3", 1024),
    ("resnet50", "high"): ExtractionPoint("resnet50", "high", "layer4", 2048),
    ("densenet121", "mid"): ExtractionPoint("densenet121", "mid",
                                            "features.denseblock3", 1024),
    ("densenet121", "high"): ExtractionPoint("densenet121", "high",
                                             "features.denseblock4", 1024),
    ("efficientnet_b0", "mid"): ExtractionPoint("efficientnet_b0", "mid",
                                                "features.6", 192),
    ("efficientnet_b0", "high"): ExtractionPoint("efficientnet_b0", "high",
                                                 "features.7", 320),
    ("swin_tiny", "mid"): ExtractionPoint("swin_tiny", "mid", "features.5",
                                          384, channels_last=True),
    ("swin_tiny", "high"): ExtractionPoint("swin_tiny", "high", "features.7",
                                           768, channels_last=True),
    ("convnext_base", "mid"): ExtractionPoint("convnext_base", "mid",
                                              "features.5", 512),
    ("convnext_base", "high"): ExtractionPoint("convnext_base", "high",
                                               "features.7", 1024),
}

BACKBONES = sorted({b for b, _ in POINTS})
STAGES = ("mid", "high")


def build_model(backbone: str, pretrained: bool = True) -> torch.nn.Module:
    from torchvision import models

    builders = {
        "resnet50": (models.resnet50, models.ResNet50_Weights.IMAGENET1K_V2),
        "densenet121": (models.densenet121,
                        models.DenseNet121_Weights.IMAGENET1K_V1),
        "efficientnet_b0": (models.efficientnet_b0,
                            models.EfficientNet_B0_Weights.IMAGENET1K_V1),
        "swin_tiny": (models.swin_t, models.Swin_T_Weights.IMAGENET1K_V1),
        "convnext_base": (models.convnext_base,
                          models.ConvNeXt_Base_Weights.IMAGENET1K_V1),
    }
    if backbone not in builders:
        raise ValueError(f"unknown backbone {backbone!r}; "
                         f"valid: {', '.join(BACKBONES)}")
    builder, weights = builders[backbone]
    model = builder(weights=weights if pretrained else None)
    model.eval()
    return model


def get_point(backbone: str, stage: str) -> ExtractionPoint:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}; valid: mid, high")
    try:
        return POINTS[(backbone, stage)]
    except KeyError:
        raise ValueError(f"unknown backbone {backbone!r}; "
                         f"valid: {', '.join(BACKBONES)}") from None


def resolve_module(model: torch.nn.Module, dotted: str) -> torch.nn.Module:
    node = model
    for part in dotted.split("."):
        node = node[int(part)] if part.isdigit() else getattr(node, part)
    return node


class FeatureTap:
    """Registers a forward hook and exposes the captured [C, H, W] map."""

    def __init__(self, model: torch.nn.Module, point: ExtractionPoint):
        self.point = point
        self._out = None
        self._handle = resolve_module(model, point.hook).register_forward_hook(
            self._capture)

    def _capture(self, _module, _inputs, output):
        self._out = output

    def take(self) -> torch.Tensor:
        if self._out is None:
            raise RuntimeError("hook did not fire; wrong extraction point?")
        out = self._out
        self._out = None
        out = out[0] if out.dim() == 4 else out
        if self.point.channels_last:
            out = out.permute(2, 0, 1)
        return out.contiguous()

    def close(self):
        self._handle.remove()
