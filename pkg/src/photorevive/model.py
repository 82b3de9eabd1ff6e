"""Full repair model: restoration net, similarity net, learnable histogram
bin centers, and colorization net composed into one trainable module, plus
checkpoint serialization.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
import torch.nn as nn

from .colornet import ColorizationNet, ColorizeConfig, pack_hist_pair, tiny_colorize_config
from .restorenet import RestorationNet, RestoreConfig, tiny_restore_config
from .simnet import SimilarityMap, SimilarityNet, warp_histogram
from .sphist import BinCenters, SpHist, compute_sphist, downsample_sphist

CHECKPOINT_SCHEMA = 1


@dataclass
class AblationToggles:
    single_scale_hist: bool = False
    single_scale_similarity: bool = False
    single_level_rdn: bool = False
    no_similarity_map: bool = False
    raw_ab_fusion: bool = False


@dataclass
class ModelConfig:
    histogram_bins: int = 64
    sim_channels: int = 64
    sim_temperature: float = 0.01
    pretrained_backbones: bool = True
    restore: RestoreConfig = field(default_factory=RestoreConfig)
    colorize: ColorizeConfig = field(default_factory=ColorizeConfig)
    ablation: AblationToggles = field(default_factory=AblationToggles)

    def __post_init__(self):
        if self.ablation.single_level_rdn:
            self.restore.levels = 1
            self.restore.downsample_factors = (1,)
        if self.ablation.raw_ab_fusion:
            # fusion sees raw ab planes (2 channels) instead of 2K hist planes
            self.colorize.histogram_bins = 1
        else:
            self.colorize.histogram_bins = self.histogram_bins

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["restore"] = RestoreConfig(**{k: tuple(v) if isinstance(v, list) else v
                                        for k, v in d["restore"].items()})
        d["colorize"] = ColorizeConfig(**{k: tuple(v) if isinstance(v, list) else v
                                          for k, v in d["colorize"].items()})
        d["ablation"] = AblationToggles(**d["ablation"])
        return cls(**d)


def tiny_model_config(K: int = 8, pretrained: bool = False) -> ModelConfig:
    """Small configuration for CPU tests and smoke training."""
    return ModelConfig(histogram_bins=K, sim_channels=16,
                       pretrained_backbones=pretrained,
                       restore=tiny_restore_config(),
                       colorize=tiny_colorize_config(K))


class RepairModel(nn.Module):
    """End-to-end generator: degraded L + reference Lab -> restored L + ab."""

    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        self.restorer = RestorationNet(self.cfg.restore)
        self.simnet = SimilarityNet(self.cfg.sim_channels,
                                    pretrained=self.cfg.pretrained_backbones,
                                    temperature=self.cfg.sim_temperature)
        self.colorizer = ColorizationNet(self.cfg.colorize)
        self.centers_a = BinCenters(self.cfg.histogram_bins)
        self.centers_b = BinCenters(self.cfg.histogram_bins)

    def reference_histograms(self, ref_ab: torch.Tensor) -> tuple[SpHist, SpHist]:
        """Full-resolution per-pixel histograms of a (H, W, 2) reference."""
        return (compute_sphist(ref_ab[..., 0], self.centers_a, "a"),
                compute_sphist(ref_ab[..., 1], self.centers_b, "b"))

    def _hist_scales(self, H: int, W: int) -> list[tuple[int, int]]:
        return [(H // s, W // s) for s in (4, 8, 16, 32)]

    def warped_histograms(self, L_restored: torch.Tensor, ref_L: torch.Tensor,
                          ref_ab: torch.Tensor) -> list[torch.Tensor]:
        """Per-scale fusion tensors for the colorization net (one image).

        L_restored, ref_L: (1, 1, H, W); ref_ab: (H, W, 2) in [-1, 1].
        """
        H, W = L_restored.shape[-2:]
        scales = self._hist_scales(H, W)
        ab_tog = self.cfg.ablation

        if ab_tog.raw_ab_fusion:
            planes = ref_ab.permute(2, 0, 1).unsqueeze(0)
            return [torch.nn.functional.interpolate(
                        planes, size=sz, mode="bilinear", align_corners=False)
                    for sz in scales]

        h_a, h_b = self.reference_histograms(ref_ab)
        sims: list[SimilarityMap] | None = None
        if not ab_tog.no_similarity_map:
            sims = self.simnet.similarity_pyramid(L_restored, ref_L)

        if ab_tog.single_scale_hist or ab_tog.single_scale_similarity:
            # compute only the finest scale, then average-pool downward
            ha_1 = downsample_sphist(h_a, scales[0])
            hb_1 = downsample_sphist(h_b, scales[0])
            if sims is not None:
                ha_1 = warp_histogram(sims[0], ha_1)
                hb_1 = warp_histogram(sims[0], hb_1)
            out = []
            for sz in scales:
                out.append(pack_hist_pair(downsample_sphist(ha_1, sz),
                                          downsample_sphist(hb_1, sz)))
            return out

        out = []
        for i, sz in enumerate(scales):
            ha_i = downsample_sphist(h_a, sz)
            hb_i = downsample_sphist(h_b, sz)
            if sims is not None:
                ha_i = warp_histogram(sims[i], ha_i)
                hb_i = warp_histogram(sims[i], hb_i)
            out.append(pack_hist_pair(ha_i, hb_i))
        return out

    def forward(self, L_in: torch.Tensor, ref_L: torch.Tensor,
                ref_ab: torch.Tensor, skip_restore: bool = False
                ) -> tuple[torch.Tensor, torch.Tensor]:
        """One image: (1, 1, H, W) degraded L -> (restored L, predicted ab).

        H and W must be multiples of 32 (similarity/histogram scale grid).
        """
        L_restored = L_in if skip_restore else self.restorer(L_in)
        hists = self.warped_histograms(L_restored, ref_L, ref_ab)
        ab = self.colorizer(L_restored, hists)
        return L_restored, ab


def save_checkpoint(path: str | Path, model: RepairModel,
                    discriminator: nn.Module | None = None,
                    optimizers: dict[str, torch.optim.Optimizer] | None = None,
                    epoch: int = 0, extra: dict | None = None) -> None:
    """Atomic checkpoint write (temp file + rename)."""
    path = Path(path)
    payload = {
        "schema": CHECKPOINT_SCHEMA,
        "config": model.cfg.to_dict(),
        "model": model.state_dict(),
        "discriminator": discriminator.state_dict() if discriminator else None,
        "optimizers": {k: o.state_dict() for k, o in (optimizers or {}).items()},
        "epoch": epoch,
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> dict:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    if payload.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema {payload.get('schema')}")
    return payload


def model_from_checkpoint(path: str | Path) -> RepairModel:
    payload = load_checkpoint(path)
    model = RepairModel(ModelConfig.from_dict(payload["config"]))
    model.load_state_dict(payload["model"])
    model.eval()
    return model
