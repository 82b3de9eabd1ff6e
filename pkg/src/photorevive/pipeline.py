"""Inference orchestration: degraded image in, restored and colorized RGB
out, with automatic or explicit reference selection.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .colorspace import LabImage, lab_to_rgb, rgb_to_lab
from .model import RepairModel
from .refselect import CorpusIndex, ReferenceSelector

MAX_LONG_SIDE = 1024


class PipelineError(ValueError):
    pass


@dataclass
class RepairRequest:
    image: np.ndarray                 # grayscale (H, W) or RGB (H, W, 3), [0, 1]
    reference: np.ndarray | None = None   # explicit RGB reference
    auto_rank: int = 1                # rank-k pick when selecting automatically
    restore_only: bool = False
    colorize_only: bool = False

    def __post_init__(self):
        if self.restore_only and self.colorize_only:
            raise PipelineError("restore_only and colorize_only are exclusive")
        if self.reference is not None and (
                self.reference.ndim != 3 or self.reference.shape[-1] != 3):
            raise PipelineError("explicit reference must be a color image")


@dataclass
class RepairResult:
    rgb: np.ndarray | None            # None in restore-only mode
    gray: np.ndarray                  # restored (or pass-through) luminance
    reference_id: str | None = None
    timings: dict[str, float] = field(default_factory=dict)


def _to_multiple_of_32(L: np.ndarray) -> tuple[np.ndarray, tuple[int, int]]:
    H, W = L.shape
    ph = (-H) % 32
    pw = (-W) % 32
    if ph or pw:
        L = np.pad(L, ((0, ph), (0, pw)), mode="reflect")
    return L, (H, W)


class RepairPipeline:
    """Shares one immutable model between concurrent repair calls."""

    def __init__(self, model: RepairModel,
                 corpus_index: CorpusIndex | None = None,
                 selector: ReferenceSelector | None = None):
        self.model = model
        self.model.eval()
        self.corpus_index = corpus_index
        self.selector = selector

    def _input_gray(self, image: np.ndarray) -> np.ndarray:
        if image.ndim == 3 and image.shape[-1] == 3:
            return rgb_to_lab(image).L
        if image.ndim == 2:
            return np.clip(image, 0.0, 1.0)
        raise PipelineError(f"unsupported image shape {image.shape}")

    def _resolve_reference(self, req: RepairRequest,
                           gray: np.ndarray) -> tuple[LabImage, str]:
        if req.reference is not None:
            return rgb_to_lab(req.reference), "explicit"
        if self.corpus_index is None:
            raise PipelineError("no reference given and no corpus index loaded")
        ranked = self.corpus_index.rank(gray, k=req.auto_rank)
        pick = ranked[req.auto_rank - 1]
        from .data import load_image  # avoids cycle at module import

        rgb = load_image(self.corpus_index.directory / pick.corpus_id)
        return rgb_to_lab(rgb), pick.corpus_id

    def repair(self, req: RepairRequest) -> RepairResult:
        t0 = time.monotonic()
        gray = self._input_gray(req.image)
        orig_hw = gray.shape

        # cap resolution: the similarity maps are quadratic in pixel count
        scale = MAX_LONG_SIDE / max(orig_hw)
        work = gray
        if scale < 1.0:
            t = torch.from_numpy(gray).float()[None, None]
            t = F.interpolate(t, scale_factor=scale, mode="bilinear",
                              align_corners=False)
            work = t[0, 0].numpy().astype(np.float64)

        work, pre_pad_hw = _to_multiple_of_32(work)
        L_in = torch.from_numpy(work).float()[None, None]

        with torch.no_grad():
            if req.colorize_only:
                L_restored = L_in
                # keep the caller's float64 luminance bit-exact
                gray_out = work[:pre_pad_hw[0], :pre_pad_hw[1]]
            else:
                L_restored = self.model.restorer(L_in)
                gray_out = L_restored[0, 0].numpy()[
                    :pre_pad_hw[0], :pre_pad_hw[1]]
            t_restore = time.monotonic()

            if req.restore_only:
                out = _resize_plane(gray_out, orig_hw)
                return RepairResult(rgb=None, gray=out,
                                    timings={"restore": t_restore - t0})

            ref_lab, ref_id = self._resolve_reference(req, gray)
            ref_L, ref_ab = _reference_tensors(ref_lab, work.shape)
            hists = self.model.warped_histograms(L_restored, ref_L, ref_ab)
            ab = self.model.colorizer(L_restored, hists)

        ab_np = ab[0].numpy()[:, :pre_pad_hw[0], :pre_pad_hw[1]]
        gray_full = _resize_plane(gray_out, orig_hw)
        ab_full = np.stack(
            [_resize_plane(ab_np[c], orig_hw) for c in range(2)], axis=-1)
        lab = LabImage(L=np.clip(gray_full, 0, 1), ab=np.clip(ab_full, -1, 1))
        rgb = lab_to_rgb(lab)
        return RepairResult(
            rgb=rgb, gray=gray_full, reference_id=ref_id,
            timings={"restore": t_restore - t0,
                     "colorize": time.monotonic() - t_restore})


def _resize_plane(plane: np.ndarray, hw: tuple[int, int]) -> np.ndarray:
    if plane.shape == hw:
        return plane.astype(np.float64)
    t = torch.from_numpy(np.ascontiguousarray(plane)).float()[None, None]
    t = F.interpolate(t, size=hw, mode="bilinear", align_corners=False)
    return t[0, 0].numpy().astype(np.float64)


def _reference_tensors(ref: LabImage, hw: tuple[int, int]
                       ) -> tuple[torch.Tensor, torch.Tensor]:
    """Resize a reference Lab image to the working resolution."""
    L = torch.from_numpy(_resize_plane(ref.L, hw)).float()[None, None]
    ab = np.stack([_resize_plane(ref.ab[..., c], hw) for c in range(2)],
                  axis=-1)
    return L, torch.from_numpy(ab).float()
