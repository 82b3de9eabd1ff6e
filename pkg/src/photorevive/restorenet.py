"""Restoration sub-net: a multi-level residual dense network.

The degraded luminance is processed at full, 1/4 and 1/8 resolution by
independent stacks of residual dense blocks; the coarse branches are
bilinearly upsampled, everything is concatenated and fused by a final
convolution. A global additive skip from the input plus a sigmoid keeps the
output in [0, 1]. Inputs not divisible by 8 are reflect-padded and cropped
back, so output shape always equals input shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


class InvalidInputError(ValueError):
    pass


@dataclass
class RestoreConfig:
    levels: int = 3
    downsample_factors: tuple[int, ...] = (1, 4, 8)
    blocks_per_level: int = 3
    units_per_block: int = 4
    growth_rate: int = 16
    base_channels: int = 32

    def __post_init__(self):
        if len(self.downsample_factors) != self.levels:
            raise ValueError("need one downsample factor per level")


def tiny_restore_config() -> RestoreConfig:
    """Desk-scale configuration for tests and CPU smoke training."""
    return RestoreConfig(blocks_per_level=1, units_per_block=2,
                         growth_rate=8, base_channels=16)


class DenseUnit(nn.Module):
    def __init__(self, in_ch, growth):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, growth, 3, padding=1)

    def forward(self, x):
        return torch.cat([x, F.relu(self.conv(x))], dim=1)


class ResidualDenseBlock(nn.Module):
    """Dense units with local feature fusion and a residual connection."""

    def __init__(self, channels, growth, n_units):
        super().__init__()
        self.units = nn.Sequential(
            *[DenseUnit(channels + i * growth, growth) for i in range(n_units)]
        )
        self.fuse = nn.Conv2d(channels + n_units * growth, channels, 1)

    def forward(self, x):
        return x + self.fuse(self.units(x))


class _Level(nn.Module):
    def __init__(self, cfg: RestoreConfig):
        super().__init__()
        self.head = nn.Conv2d(1, cfg.base_channels, 3, padding=1)
        self.blocks = nn.Sequential(
            *[ResidualDenseBlock(cfg.base_channels, cfg.growth_rate,
                                 cfg.units_per_block)
              for _ in range(cfg.blocks_per_level)]
        )

    def forward(self, x):
        return self.blocks(self.head(x))


class RestorationNet(nn.Module):
    def __init__(self, cfg: RestoreConfig | None = None):
        super().__init__()
        self.cfg = cfg or RestoreConfig()
        self.levels = nn.ModuleList(
            [_Level(self.cfg) for _ in range(self.cfg.levels)]
        )
        self.fuse = nn.Conv2d(self.cfg.base_channels * self.cfg.levels, 1, 3,
                              padding=1)

    def forward(self, L_in: torch.Tensor) -> torch.Tensor:
        """(B, 1, H, W) degraded luminance in [0, 1] -> restored, same shape."""
        if L_in.ndim != 4 or L_in.shape[1] != 1:
            raise InvalidInputError(f"expected (B, 1, H, W), got {tuple(L_in.shape)}")
        H, W = L_in.shape[-2:]
        if H < 32 or W < 32:
            raise InvalidInputError("input must be at least 32x32")

        pad_h = (-H) % 8
        pad_w = (-W) % 8
        x = F.pad(L_in, (0, pad_w, 0, pad_h), mode="reflect")

        outs = []
        for level, factor in zip(self.levels, self.cfg.downsample_factors):
            xi = x if factor == 1 else F.avg_pool2d(x, factor)
            yi = level(xi)
            if factor != 1:
                yi = F.interpolate(yi, size=x.shape[-2:], mode="bilinear",
                                   align_corners=False)
            outs.append(yi)

        # global input skip in logit space: sigmoid(logit(x) + 0) == x, so the
        # net starts near the identity and stays in (0, 1)
        eps = 1e-4
        logit_x = torch.logit(x.clamp(eps, 1 - eps))
        y = torch.sigmoid(self.fuse(torch.cat(outs, dim=1)) + logit_x)
        return y[..., :H, :W]


def restore(L_in: torch.Tensor, net: RestorationNet) -> torch.Tensor:
    """Functional wrapper over a constructed RestorationNet (eval mode)."""
    with torch.no_grad():
        return net(L_in)
