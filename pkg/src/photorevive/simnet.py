"""Similarity sub-net.

Extracts four-stage deep features from input and reference luminance with a
frozen residual backbone, projects each stage to a common channel count,
mixes the scales with a learnable 4x4 coefficient matrix and a shared
convolution, then builds row-stochastic similarity maps from centered cosine
correlation. Reference per-pixel histograms are warped into input space by
multiplying with those maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .backbones import gray_to_3ch, resnet34_backbone
from .sphist import SpHist

EPS = 1e-8


class InvalidInputError(ValueError):
    pass


@dataclass
class FeaturePyramid:
    """Stage features f_1..f_4 at strictly decreasing resolutions, C channels."""

    feats: list[torch.Tensor]  # each (B, C, H_i, W_i)
    source: str = "input"

    def __post_init__(self):
        if len(self.feats) != 4:
            raise InvalidInputError("pyramid needs exactly four stages")
        sizes = [f.shape[-1] * f.shape[-2] for f in self.feats]
        if any(later >= earlier for later, earlier in zip(sizes[1:], sizes[:-1])):
            raise InvalidInputError("stage resolutions must strictly decrease")


@dataclass
class SimilarityMap:
    """Row-stochastic (N_i x N_i) map from input locations to reference ones."""

    phi: torch.Tensor
    scale: int


class FeatureExtractor(nn.Module):
    """Frozen four-stage backbone plus trainable 1x1 projections to C channels."""

    STAGE_CHANNELS = (64, 128, 256, 512)

    def __init__(self, channels: int = 64, pretrained: bool = True):
        super().__init__()
        self.channels = channels
        self.backbone = resnet34_backbone(pretrained=pretrained)
        self.proj = nn.ModuleList(
            [nn.Conv2d(c, channels, kernel_size=1) for c in self.STAGE_CHANNELS]
        )

    def forward(self, L: torch.Tensor, source: str = "input") -> FeaturePyramid:
        """L: (B, 1, H, W) luminance in [0, 1], H and W >= 32."""
        if L.ndim != 4 or L.shape[1] != 1:
            raise InvalidInputError(f"expected (B, 1, H, W), got {tuple(L.shape)}")
        if L.shape[-2] < 32 or L.shape[-1] < 32:
            raise InvalidInputError("input must be at least 32x32")
        x = gray_to_3ch(L)
        b = self.backbone
        with torch.no_grad():
            x = b.maxpool(b.relu(b.bn1(b.conv1(x))))
            stages = []
            for layer in (b.layer1, b.layer2, b.layer3, b.layer4):
                x = layer(x)
                stages.append(x)
        # backbone is frozen; gradients flow only through the projections
        feats = [proj(s.detach()) for proj, s in zip(self.proj, stages)]
        return FeaturePyramid(feats, source)


class ScaleMixer(nn.Module):
    """Learnable per-target-scale mixing of the four pyramid stages.

    For target scale i, each stage f_j is scaled by A[i, j], resampled
    bilinearly to the scale-i size, concatenated (4C channels) and reduced
    back to C channels by one convolution shared across all four targets.
    """

    def __init__(self, channels: int = 64):
        super().__init__()
        self.A = nn.Parameter(torch.ones(4, 4))
        self.shared_conv = nn.Conv2d(4 * channels, channels, 3, padding=1)

    def forward(self, pyramid: FeaturePyramid, i: int) -> torch.Tensor:
        if not 1 <= i <= 4:
            raise InvalidInputError(f"scale index must be 1..4, got {i}")
        target = pyramid.feats[i - 1].shape[-2:]
        parts = []
        for j, f in enumerate(pyramid.feats):
            g = self.A[i - 1, j] * f
            if g.shape[-2:] != target:
                g = F.interpolate(g, size=target, mode="bilinear",
                                  align_corners=False)
            parts.append(g)
        return self.shared_conv(torch.cat(parts, dim=1))


def similarity_map(M_I: torch.Tensor, M_R: torch.Tensor, scale: int = 1,
                   temperature: float = 0.01) -> SimilarityMap:
    """Centered-cosine correlation of two (C, H, W) fused feature maps,
    softmaxed over reference locations for each input location."""
    if M_I.shape != M_R.shape:
        raise InvalidInputError(
            f"feature shapes differ: {tuple(M_I.shape)} vs {tuple(M_R.shape)}"
        )
    if M_I.ndim != 3:
        raise InvalidInputError("expected (C, H, W) feature maps")
    raw = raw_similarity(M_I, M_R)
    phi = F.softmax(raw / temperature, dim=1)
    return SimilarityMap(phi=phi, scale=scale)


def raw_similarity(M_I: torch.Tensor, M_R: torch.Tensor) -> torch.Tensor:
    """Pre-softmax similarity matrix, entries in [-1, 1]."""
    C = M_I.shape[0]
    a = M_I.reshape(C, -1).T  # (N, C)
    b = M_R.reshape(C, -1).T
    a = a - a.mean(dim=0, keepdim=True)
    b = b - b.mean(dim=0, keepdim=True)
    a = a / (a.norm(dim=1, keepdim=True) + EPS)
    b = b / (b.norm(dim=1, keepdim=True) + EPS)
    return a @ b.T


def warp_histogram(phi: SimilarityMap, h_ref: SpHist) -> SpHist:
    """Warp a reference histogram field through the similarity map.

    Row-stochastic phi times row-stochastic histogram rows keeps every
    output pixel's bin distribution a convex combination.
    """
    H, W, K = h_ref.h.shape
    n = phi.phi.shape[0]
    if phi.phi.shape[1] != H * W or n != H * W:
        raise InvalidInputError(
            f"similarity map size {tuple(phi.phi.shape)} does not match "
            f"histogram pixel count {H * W}"
        )
    warped = phi.phi @ h_ref.h.reshape(H * W, K)
    return SpHist(warped.reshape(H, W, K), h_ref.source_channel)


class SimilarityNet(nn.Module):
    """Extractor + scale mixer bundled for training and checkpointing."""

    def __init__(self, channels: int = 64, pretrained: bool = True,
                 temperature: float = 0.01):
        super().__init__()
        self.extractor = FeatureExtractor(channels, pretrained=pretrained)
        self.mixer = ScaleMixer(channels)
        self.temperature = temperature

    def similarity_pyramid(self, L_in: torch.Tensor,
                           L_ref: torch.Tensor) -> list[SimilarityMap]:
        """Four per-scale similarity maps for a single image pair.

        L_in, L_ref: (1, 1, H, W) luminance batches of identical size.
        """
        p_in = self.extractor(L_in, "input")
        p_ref = self.extractor(L_ref, "reference")
        maps = []
        for i in range(1, 5):
            m_i = self.mixer(p_in, i)[0]
            m_r = self.mixer(p_ref, i)[0]
            maps.append(similarity_map(m_i, m_r, scale=i,
                                       temperature=self.temperature))
        return maps
