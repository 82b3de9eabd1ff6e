"""Colorization sub-net.

A U-Net-shaped dense-block encoder/decoder that predicts ab chroma from the
restored luminance. After each encoder dense block the warped reference
histograms for that scale (a and b channels, 2K planes) are concatenated and
passed through a fusion module (a small dense block plus a 3x3 convolution)
whose output replaces the encoder features. The decoder mirrors the encoder
with bilinear upsampling and skip connections from the pre-fusion encoder
features. Output is tanh-activated, so ab is always inside [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .colorspace import LabImage
from .restorenet import DenseUnit
from .sphist import SpHist


class InvalidInputError(ValueError):
    pass


@dataclass
class ColorizeConfig:
    encoder_units: tuple[int, int, int, int] = (6, 12, 24, 16)
    fusion_units: int = 6
    histogram_bins: int = 64
    growth_rate: int = 16
    base_channels: int = 32


def tiny_colorize_config(K: int = 8) -> ColorizeConfig:
    """Desk-scale configuration for tests and CPU smoke training."""
    return ColorizeConfig(encoder_units=(2, 2, 2, 2), fusion_units=2,
                          histogram_bins=K, growth_rate=8, base_channels=16)


class DenseBlock(nn.Module):
    """Stack of dense units followed by a 1x1 projection to out_ch."""

    def __init__(self, in_ch, out_ch, n_units, growth):
        super().__init__()
        self.units = nn.Sequential(
            *[DenseUnit(in_ch + i * growth, growth) for i in range(n_units)]
        )
        self.proj = nn.Conv2d(in_ch + n_units * growth, out_ch, 1)

    def forward(self, x):
        return F.relu(self.proj(self.units(x)))


class FusionModule(nn.Module):
    """Combines encoder features with warped histogram planes."""

    def __init__(self, feat_ch, hist_ch, n_units, growth):
        super().__init__()
        self.block = DenseBlock(feat_ch + hist_ch, feat_ch, n_units, growth)
        self.conv = nn.Conv2d(feat_ch, feat_ch, 3, padding=1)

    def forward(self, feat, hist):
        return F.relu(self.conv(self.block(torch.cat([feat, hist], dim=1))))


class ColorizationNet(nn.Module):
    def __init__(self, cfg: ColorizeConfig | None = None):
        super().__init__()
        self.cfg = cfg or ColorizeConfig()
        c = self.cfg.base_channels
        g = self.cfg.growth_rate
        hist_ch = 2 * self.cfg.histogram_bins

        # stem brings the luminance to 1/4 resolution, matching scale 1
        self.stem = nn.Sequential(
            nn.Conv2d(1, c, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(c, c, 3, stride=2, padding=1), nn.ReLU(),
        )
        self.enc_blocks = nn.ModuleList()
        self.fusions = nn.ModuleList()
        for n_units in self.cfg.encoder_units:
            self.enc_blocks.append(DenseBlock(c, c, n_units, g))
            self.fusions.append(
                FusionModule(c, hist_ch, self.cfg.fusion_units, g)
            )
        self.down = nn.ModuleList(
            [nn.Conv2d(c, c, 3, stride=2, padding=1) for _ in range(3)]
        )
        # decoder mirrors the encoder unit counts in reverse
        self.dec_blocks = nn.ModuleList(
            [DenseBlock(2 * c, c, n, g)
             for n in reversed(self.cfg.encoder_units[:-1])]
        )
        self.head = nn.Sequential(
            nn.Conv2d(c, c, 3, padding=1), nn.ReLU(),
            nn.Conv2d(c, 2, 3, padding=1),
        )

    def forward(self, L_restored: torch.Tensor,
                warped_hists: list[torch.Tensor]) -> torch.Tensor:
        """Predict (B, 2, H, W) chroma in [-1, 1].

        warped_hists: four (B, 2K, H/4 / 2^i, W/4 / 2^i) tensors, one per
        encoder scale, a- and b-channel histogram planes concatenated.
        """
        if L_restored.ndim != 4 or L_restored.shape[1] != 1:
            raise InvalidInputError(
                f"expected (B, 1, H, W), got {tuple(L_restored.shape)}"
            )
        if len(warped_hists) != 4:
            raise InvalidInputError("need warped histograms at four scales")
        H, W = L_restored.shape[-2:]

        x = self.stem(L_restored)
        skips = []
        for i in range(4):
            x = self.enc_blocks[i](x)
            h = warped_hists[i]
            if h.shape[-2:] != x.shape[-2:]:
                raise InvalidInputError(
                    f"warped histogram scale {i + 1} has size {tuple(h.shape[-2:])}, "
                    f"expected {tuple(x.shape[-2:])}"
                )
            skips.append(x)
            x = self.fusions[i](x, h)
            if i < 3:
                x = F.relu(self.down[i](x))

        for i, dec in enumerate(self.dec_blocks):
            skip = skips[2 - i]
            x = F.interpolate(x, size=skip.shape[-2:], mode="bilinear",
                              align_corners=False)
            x = dec(torch.cat([x, skip], dim=1))

        x = F.interpolate(x, size=(H, W), mode="bilinear", align_corners=False)
        return torch.tanh(self.head(x))


def pack_hist_pair(h_a: SpHist, h_b: SpHist) -> torch.Tensor:
    """Stack a- and b-channel histogram fields into a (1, 2K, H, W) tensor."""
    if h_a.h.shape != h_b.h.shape:
        raise InvalidInputError("a/b histogram shapes differ")
    t = torch.cat([h_a.h, h_b.h], dim=-1)  # (H, W, 2K)
    return t.permute(2, 0, 1).unsqueeze(0)


def assemble_output(L_restored, ab) -> LabImage:
    """Join restored luminance and predicted chroma into a LabImage."""
    import numpy as np

    L = L_restored.detach().cpu().numpy() if isinstance(L_restored, torch.Tensor) \
        else np.asarray(L_restored)
    a = ab.detach().cpu().numpy() if isinstance(ab, torch.Tensor) else np.asarray(ab)
    L = np.squeeze(L)
    if a.ndim == 4:
        a = a[0]
    if a.shape[0] == 2 and a.ndim == 3:
        a = np.moveaxis(a, 0, -1)
    if L.ndim != 2 or a.shape != L.shape + (2,):
        raise InvalidInputError(
            f"shape mismatch: L {L.shape}, ab {a.shape}"
        )
    return LabImage(L=np.clip(L, 0.0, 1.0), ab=np.clip(a, -1.0, 1.0))
