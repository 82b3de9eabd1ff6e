"""Evaluation: PSNR, SSIM, a learned-feature perceptual distance, and the
report harness (per-image rows, aggregates, rank-k reference sweeps, CSV and
Markdown table emitters).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from scipy import ndimage

from .backbones import vgg19_features, vgg_stage_features

log = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0


class MetricError(ValueError):
    pass


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/MSE) for images in [0, 1]; capped at 100 dB when identical."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse))


def _gaussian_window_filter(img, sigma, truncate):
    return ndimage.gaussian_filter(img, sigma, mode="reflect", truncate=truncate)


def ssim(a: np.ndarray, b: np.ndarray, k1: float = 0.01, k2: float = 0.03,
         sigma: float = 1.5) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5).

    Color inputs are averaged per channel.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 3:
        return float(np.mean([ssim(a[..., c], b[..., c], k1, k2, sigma)
                              for c in range(a.shape[-1])]))
    if min(a.shape) < 11:
        raise MetricError("images smaller than the 11x11 SSIM window")

    # truncate 3.5 makes the Gaussian kernel exactly 11 taps wide at sigma 1.5
    truncate = 3.5
    c1 = k1**2
    c2 = k2**2
    mu_a = _gaussian_window_filter(a, sigma, truncate)
    mu_b = _gaussian_window_filter(b, sigma, truncate)
    var_a = _gaussian_window_filter(a * a, sigma, truncate) - mu_a**2
    var_b = _gaussian_window_filter(b * b, sigma, truncate) - mu_b**2
    cov = _gaussian_window_filter(a * b, sigma, truncate) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    # window radius worth of border is excluded from the mean
    pad = 5
    return float(np.mean((num / den)[pad:-pad, pad:-pad]))


class PerceptualDistance:
    """LPIPS-style distance: mean squared difference of channel-normalized
    deep features over four backbone stages. Pluggable: pass any callable
    (rgb_a, rgb_b) -> float as `backend` to override the built-in."""

    def __init__(self, pretrained: bool = True, backend=None):
        self.backend = backend
        self.features = None if backend else vgg19_features(pretrained=pretrained)

    def __call__(self, a: np.ndarray, b: np.ndarray) -> float:
        if self.backend is not None:
            return float(self.backend(a, b))
        fa = self._stage_features(a)
        fb = self._stage_features(b)
        total = 0.0
        for x, y in zip(fa, fb):
            x = x / (x.norm(dim=1, keepdim=True) + 1e-10)
            y = y / (y.norm(dim=1, keepdim=True) + 1e-10)
            total += float(((x - y) ** 2).sum(dim=1).mean())
        return total

    def _stage_features(self, rgb: np.ndarray) -> list[torch.Tensor]:
        x = torch.from_numpy(np.asarray(rgb, dtype=np.float32))
        if x.ndim != 3 or x.shape[-1] != 3:
            raise MetricError(f"expected (H, W, 3) RGB, got {tuple(x.shape)}")
        x = x.permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            return vgg_stage_features(self.features, x)


@dataclass
class EvalRow:
    image_id: str
    psnr: float
    ssim: float
    perceptual: float | None = None


@dataclass
class EvalReport:
    dataset_id: str
    checkpoint_id: str
    rows: list[EvalRow] = field(default_factory=list)
    ref_rank: int | None = None

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr for r in self.rows]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.rows]))

    @property
    def mean_perceptual(self) -> float | None:
        vals = [r.perceptual for r in self.rows if r.perceptual is not None]
        return float(np.mean(vals)) if vals else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["image_id", "psnr", "ssim", "perceptual",
                         "dataset", "checkpoint", "ref_rank"])
        for r in self.rows:
            writer.writerow([r.image_id, f"{r.psnr:.6f}", f"{r.ssim:.6f}",
                             "" if r.perceptual is None else f"{r.perceptual:.6f}",
                             self.dataset_id, self.checkpoint_id,
                             "" if self.ref_rank is None else self.ref_rank])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EvalReport":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise MetricError("empty report CSV")
        first = rows[0]
        rank = first["ref_rank"]
        report = cls(dataset_id=first["dataset"],
                     checkpoint_id=first["checkpoint"],
                     ref_rank=int(rank) if rank else None)
        for r in rows:
            report.rows.append(EvalRow(
                image_id=r["image_id"], psnr=float(r["psnr"]),
                ssim=float(r["ssim"]),
                perceptual=float(r["perceptual"]) if r["perceptual"] else None))
        return report

    def to_markdown(self) -> str:
        perc = self.mean_perceptual
        lines = [
            "| Dataset | PSNR | SSIM | Perceptual |",
            "|---|---|---|---|",
            f"| {self.dataset_id} | {self.mean_psnr:.2f} | {self.mean_ssim:.3f} "
            f"| {'-' if perc is None else f'{perc:.3f}'} |",
        ]
        return "\n".join(lines)


def evaluate(repair_fn, samples, dataset_id: str = "dataset",
             checkpoint_id: str = "checkpoint",
             perceptual: PerceptualDistance | None = None,
             ref_rank: int | None = None) -> EvalReport:
    """Run repair over (image_id, input, ground_truth_rgb) samples.

    repair_fn(input, rank) -> RGB prediction in [0, 1]. When the perceptual
    backend is unavailable the column is omitted with a warning.
    """
    report = EvalReport(dataset_id, checkpoint_id, ref_rank=ref_rank)
    for image_id, inp, gt_rgb in samples:
        pred = repair_fn(inp, ref_rank)
        row = EvalRow(image_id=image_id, psnr=psnr(pred, gt_rgb),
                      ssim=ssim(pred, gt_rgb))
        if perceptual is not None:
            try:
                row.perceptual = perceptual(pred, gt_rgb)
            except Exception as exc:
                log.warning("perceptual backend failed (%s); omitting column", exc)
                perceptual = None
        report.rows.append(row)
    return report


def rank_sweep(repair_fn, samples, max_rank: int,
               dataset_id: str = "dataset",
               checkpoint_id: str = "checkpoint") -> list[EvalReport]:
    """Evaluate with the rank-1 .. rank-max_rank reference for sensitivity
    analysis; one report per rank."""
    return [evaluate(repair_fn, samples, dataset_id, checkpoint_id,
                     ref_rank=k)
            for k in range(1, max_rank + 1)]
