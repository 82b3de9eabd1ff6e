"""Differentiable space-preserving color histograms.

Each pixel of a chroma channel is soft-assigned to K bins via a Gaussian
expansion followed by a softmax over bins. Bin centers are learnable; they
start equally spaced on [v_min, v_max] and drift during training. The module
also provides global pooling to a 1-D histogram, the squared-CDF earth mover
distance between two such histograms, and average-pool downsampling that
keeps per-pixel distributions convex.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F


class InvalidConfigError(ValueError):
    pass


class InvalidInputError(ValueError):
    pass


class BinCenters(nn.Module):
    """Learnable histogram bin centers with a fixed Gaussian spread."""

    def __init__(self, K: int, v_min: float = -1.0, v_max: float = 1.0,
                 sigma: float = 0.1):
        super().__init__()
        if K < 1:
            raise InvalidConfigError(f"K must be >= 1, got {K}")
        if v_min >= v_max:
            raise InvalidConfigError(f"need v_min < v_max, got {v_min}, {v_max}")
        if sigma <= 0:
            raise InvalidConfigError(f"sigma must be positive, got {sigma}")
        self.K = K
        self.v_min = float(v_min)
        self.v_max = float(v_max)
        self.sigma = float(sigma)
        init = v_min + (v_max - v_min) / K * torch.arange(K, dtype=torch.float32)
        self.u = nn.Parameter(init)

    def extra_repr(self):
        return f"K={self.K}, v_min={self.v_min}, v_max={self.v_max}, sigma={self.sigma}"


def init_bin_centers(K: int, v_min: float = -1.0, v_max: float = 1.0,
                     sigma: float = 0.1) -> BinCenters:
    """Equally spaced centers: u_k = v_min + (v_max - v_min) / K * k."""
    return BinCenters(K, v_min, v_max, sigma)


@dataclass
class SpHist:
    """Per-pixel soft histogram h of shape (H, W, K); rows sum to 1."""

    h: torch.Tensor
    source_channel: str = field(default="a")

    def __post_init__(self):
        if self.h.ndim != 3:
            raise InvalidInputError(f"h must be (H, W, K), got {tuple(self.h.shape)}")

    @property
    def K(self) -> int:
        return self.h.shape[-1]


def soft_histogram(values: torch.Tensor, centers: BinCenters) -> torch.Tensor:
    """Soft-bin `values` (any shape) into shape values.shape + (K,).

    h(..., k) = softmax_k( -(v - u_k)^2 / (2 sigma^2) ), differentiable in
    both the values and the centers.
    """
    if not torch.isfinite(values).all():
        raise InvalidInputError("non-finite channel values")
    d = values.unsqueeze(-1) - centers.u
    logits = -(d * d) / (2.0 * centers.sigma**2)
    return F.softmax(logits, dim=-1)


def compute_sphist(channel: torch.Tensor, centers: BinCenters,
                   source_channel: str = "a") -> SpHist:
    """Per-pixel soft histogram of a single (H, W) chroma channel."""
    if channel.ndim != 2:
        raise InvalidInputError(f"channel must be (H, W), got {tuple(channel.shape)}")
    return SpHist(soft_histogram(channel, centers), source_channel)


def pool_global(h: SpHist | torch.Tensor) -> torch.Tensor:
    """Spatial mean per bin: the 1-D differentiable histogram (sums to 1)."""
    t = h.h if isinstance(h, SpHist) else h
    return t.reshape(-1, t.shape[-1]).mean(dim=0)


def emd_loss(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    """Squared-CDF earth mover distance: sum_k (CDF_p(k) - CDF_q(k))^2."""
    if p.shape != q.shape:
        raise InvalidInputError(f"shape mismatch {tuple(p.shape)} vs {tuple(q.shape)}")
    for name, v in (("p", p), ("q", q)):
        total = float(v.detach().sum())
        if abs(total - 1.0) > 1e-3:
            raise InvalidInputError(f"{name} is not normalized (sum={total:.6f})")
    diff = torch.cumsum(p, dim=-1) - torch.cumsum(q, dim=-1)
    return (diff * diff).sum()


def downsample_sphist(h: SpHist, target: tuple[int, int]) -> SpHist:
    """Average-pool a histogram field to `target` spatial size.

    Averaging convex combinations keeps every pixel's bin distribution
    convex, so no renormalization is needed.
    """
    H, W, K = h.h.shape
    th, tw = target
    if th < 1 or tw < 1 or H % th != 0 or W % tw != 0:
        raise InvalidConfigError(
            f"target {target} must divide source size ({H}, {W})"
        )
    x = h.h.permute(2, 0, 1).unsqueeze(0)  # (1, K, H, W)
    x = F.avg_pool2d(x, kernel_size=(H // th, W // tw))
    return SpHist(x.squeeze(0).permute(1, 2, 0), h.source_channel)
