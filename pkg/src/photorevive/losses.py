"""Training objectives: luminance/chroma reconstruction, perceptual,
histogram (earth mover) and adversarial losses, plus the weighted total and
a 70x70-receptive-field patch discriminator.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .backbones import gray_to_3ch, vgg19_features, vgg_stage_features
from .sphist import SpHist, emd_loss, pool_global


class InvalidInputError(ValueError):
    pass


@dataclass
class LossWeights:
    alpha: float = 1.0   # luminance reconstruction
    beta: float = 0.2    # perceptual
    lam: float = 0.5     # histogram EMD
    gamma: float = 1.0   # chroma reconstruction
    eta: float = 0.2     # adversarial

    def __post_init__(self):
        for name in ("alpha", "beta", "lam", "gamma", "eta"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be >= 0")


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def rec_l(pred_L: torch.Tensor, target_L: torch.Tensor) -> torch.Tensor:
    """Mean absolute luminance error."""
    _check_same_shape(pred_L, target_L)
    return (pred_L - target_L).abs().mean()


def rec_ab(pred_ab: torch.Tensor, target_ab: torch.Tensor) -> torch.Tensor:
    """Mean absolute chroma error over both channels."""
    _check_same_shape(pred_ab, target_ab)
    return (pred_ab - target_ab).abs().mean()


class PerceptualLoss(nn.Module):
    """Squared feature distance at four stages of a frozen VGG19 trunk,
    each stage normalized by its C*H*W."""

    def __init__(self, pretrained: bool = True):
        super().__init__()
        self.features = vgg19_features(pretrained=pretrained)

    def forward(self, pred_L: torch.Tensor, target_L: torch.Tensor) -> torch.Tensor:
        _check_same_shape(pred_L, target_L)
        fp = vgg_stage_features(self.features, gray_to_3ch(pred_L))
        ft = vgg_stage_features(self.features, gray_to_3ch(target_L))
        total = pred_L.new_zeros(())
        for a, b in zip(fp, ft):
            _, c, h, w = a.shape
            total = total + ((a - b) ** 2).sum(dim=(1, 2, 3)).mean() / (c * h * w)
        return total


def hist_l(h_out_a: SpHist, h_out_b: SpHist,
           h_ref_a: SpHist, h_ref_b: SpHist) -> torch.Tensor:
    """Earth mover distance between globally pooled histograms, summed over
    the a and b channels."""
    if h_out_a.K != h_ref_a.K or h_out_b.K != h_ref_b.K:
        raise InvalidInputError("histogram bin counts differ")
    loss_a = emd_loss(pool_global(h_out_a), pool_global(h_ref_a))
    loss_b = emd_loss(pool_global(h_out_b), pool_global(h_ref_b))
    return loss_a + loss_b


class PatchDiscriminator(nn.Module):
    """PatchGAN over Lab stacks (L + ab, 3 planes): four stride-2-ish conv
    blocks giving a 70x70 receptive field and a grid of patch logits."""

    def __init__(self, in_ch: int = 3, base: int = 64):
        super().__init__()
        layers = [
            nn.Conv2d(in_ch, base, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        ch = base
        for mult in (2, 4):
            layers += [
                nn.Conv2d(ch, base * mult, 4, stride=2, padding=1),
                nn.InstanceNorm2d(base * mult),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            ch = base * mult
        layers += [
            nn.Conv2d(ch, base * 8, 4, stride=1, padding=1),
            nn.InstanceNorm2d(base * 8),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(base * 8, 1, 4, stride=1, padding=1),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, lab: torch.Tensor) -> torch.Tensor:
        return self.net(lab)


def adv_losses(D: nn.Module, real_lab: torch.Tensor,
               fake_lab: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Non-saturating GAN losses averaged over the patch grid.

    Returns (d_loss, g_loss). d_loss is computed on a detached fake so the
    discriminator step cannot touch generator parameters; g_loss pushes
    D(fake) toward the real label.
    """
    _check_same_shape(real_lab, fake_lab)
    real_logits = D(real_lab)
    fake_logits_d = D(fake_lab.detach())
    ones = torch.ones_like(real_logits)
    zeros = torch.zeros_like(real_logits)
    d_loss = (F.binary_cross_entropy_with_logits(real_logits, ones)
              + F.binary_cross_entropy_with_logits(fake_logits_d, zeros))
    g_loss = F.binary_cross_entropy_with_logits(D(fake_lab), ones)
    return d_loss, g_loss


@dataclass
class LossComponents:
    rec_l: torch.Tensor
    perceptual: torch.Tensor
    hist: torch.Tensor
    rec_ab: torch.Tensor
    adv: torch.Tensor

    def detached(self) -> dict[str, float]:
        return {k: float(getattr(self, k).detach()) for k in
                ("rec_l", "perceptual", "hist", "rec_ab", "adv")}


def total_loss(components: LossComponents, w: LossWeights) -> torch.Tensor:
    """alpha*rec_L + beta*perc + lambda*EMD + gamma*rec_ab + eta*adv."""
    return (w.alpha * components.rec_l
            + w.beta * components.perceptual
            + w.lam * components.hist
            + w.gamma * components.rec_ab
            + w.eta * components.adv)
