"""Frozen feature backbones shared by the similarity net, the perceptual
loss, and reference selection.

Pretrained classifier weights are used when they can be loaded (local cache
or network); otherwise the backbone falls back to a fixed-seed random
initialization so every run stays deterministic. The fallback keeps all
shape contracts and gradient paths intact; only the perceptual quality of
the features changes.
"""

from __future__ import annotations

import contextlib
import io
import logging

import torch
import torch.nn as nn
import torchvision.models as tvm

log = logging.getLogger(__name__)

_FALLBACK_SEED = 0x5EED

# vgg19.features indices of relu2_2, relu3_2, relu4_2, relu5_2
VGG_STAGE_END = (8, 13, 22, 31)


def _try_pretrained(factory, weights):
    try:
        # the hub loader chats on stdout/stderr; keep CLI output clean
        with contextlib.redirect_stdout(io.StringIO()), \
                contextlib.redirect_stderr(io.StringIO()):
            return factory(weights=weights), True
    except Exception as exc:  # weights unavailable offline
        log.warning("pretrained weights unavailable (%s); using seeded random init",
                    type(exc).__name__)
        with torch.random.fork_rng():
            torch.manual_seed(_FALLBACK_SEED)
            return factory(weights=None), False


def resnet34_backbone(pretrained: bool = True) -> nn.Module:
    """Four-stage residual backbone (layer1..layer4), frozen."""
    if pretrained:
        net, _ = _try_pretrained(tvm.resnet34, tvm.ResNet34_Weights.IMAGENET1K_V1)
    else:
        with torch.random.fork_rng():
            torch.manual_seed(_FALLBACK_SEED)
            net = tvm.resnet34(weights=None)
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net


def vgg19_features(pretrained: bool = True) -> nn.Module:
    """VGG19 convolutional trunk up to relu5_2, frozen."""
    if pretrained:
        net, _ = _try_pretrained(tvm.vgg19, tvm.VGG19_Weights.IMAGENET1K_V1)
    else:
        with torch.random.fork_rng():
            torch.manual_seed(_FALLBACK_SEED)
            net = tvm.vgg19(weights=None)
    feats = net.features[: VGG_STAGE_END[-1] + 1]
    feats.eval()
    for p in feats.parameters():
        p.requires_grad_(False)
    return feats


def vgg_stage_features(feats: nn.Module, x: torch.Tensor) -> list[torch.Tensor]:
    """Run the VGG trunk, collecting the four stage outputs."""
    out = []
    ends = set(VGG_STAGE_END)
    for i, layer in enumerate(feats):
        x = layer(x)
        if i in ends:
            out.append(x)
    return out


def gray_to_3ch(x: torch.Tensor) -> torch.Tensor:
    """Replicate a (B, 1, H, W) luminance batch to three channels."""
    if x.ndim != 4 or x.shape[1] != 1:
        raise ValueError(f"expected (B, 1, H, W), got {tuple(x.shape)}")
    return x.expand(-1, 3, -1, -1)
