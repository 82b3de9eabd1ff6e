"""Dataset handling: paired clean/degraded loading, 256x256 random crops,
and the two reference-generation strategies (jittered second crop of the
same image, or a random other training image).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageEnhance

from .colorspace import LabImage, rgb_to_lab


class DataError(ValueError):
    pass


@dataclass
class TrainingSample:
    input_L: np.ndarray        # degraded (or clean) luminance, 256x256
    target: LabImage           # ground-truth Lab
    reference: LabImage        # reference Lab
    provenance: str            # "jittered-crop" | "corpus-draw"


def load_image(path: str | Path) -> np.ndarray:
    """RGB float image in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing image file {path}")
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0


def random_crop(rgb: np.ndarray, size: int,
                rng: np.random.Generator) -> tuple[np.ndarray, tuple[int, int]]:
    """Random size x size crop fully inside the image; returns (crop, (y, x))."""
    H, W = rgb.shape[:2]
    if H < size or W < size:
        raise DataError(f"image {H}x{W} smaller than crop size {size}")
    y = int(rng.integers(0, H - size + 1))
    x = int(rng.integers(0, W - size + 1))
    return rgb[y:y + size, x:x + size], (y, x)


def _color_jitter(img: Image.Image, rng: np.random.Generator,
                  magnitude: float) -> Image.Image:
    if magnitude <= 0:
        return img
    img = ImageEnhance.Brightness(img).enhance(
        1.0 + float(rng.uniform(-magnitude, magnitude)))
    img = ImageEnhance.Color(img).enhance(
        1.0 + float(rng.uniform(-magnitude, magnitude)))
    # hue shift via HSV roll
    hsv = np.asarray(img.convert("HSV"), dtype=np.int16)
    hsv[..., 0] = (hsv[..., 0]
                   + int(round(rng.uniform(-magnitude, magnitude) * 255))) % 256
    return Image.fromarray(hsv.astype(np.uint8), "HSV").convert("RGB")


def _small_affine(img: Image.Image, rng: np.random.Generator,
                  max_rotate_deg: float, scale_range: tuple[float, float]
                  ) -> Image.Image:
    angle = float(rng.uniform(-max_rotate_deg, max_rotate_deg))
    scale = float(rng.uniform(*scale_range))
    if angle == 0.0 and scale == 1.0:
        return img
    w, h = img.size
    out = img.rotate(angle, resample=Image.BILINEAR, expand=False)
    sw, sh = max(1, int(round(w * scale))), max(1, int(round(h * scale)))
    out = out.resize((sw, sh), Image.BILINEAR)
    # center-crop or pad back to the original size
    canvas = Image.new("RGB", (w, h))
    canvas.paste(out, ((w - sw) // 2, (h - sh) // 2))
    return canvas


def make_reference(source_rgb: np.ndarray, mode: str, rng: np.random.Generator,
                   crop_size: int = 256, avoid_location: tuple[int, int] | None = None,
                   corpus: dict[str, np.ndarray] | None = None,
                   ground_truth_id: str | None = None,
                   jitter_magnitude: float = 0.1,
                   max_rotate_deg: float = 10.0,
                   scale_range: tuple[float, float] = (0.9, 1.1)) -> LabImage:
    """Build a reference Lab image.

    jitter mode: a second crop of the same RGB image at a different
    location, color-jittered and slightly affine-transformed. corpus mode:
    a random training image other than the ground truth.
    """
    if mode == "jitter":
        for _ in range(20):
            crop, loc = random_crop(source_rgb, crop_size, rng)
            if loc != avoid_location:
                break
        img = Image.fromarray((crop * 255).round().astype(np.uint8))
        img = _color_jitter(img, rng, jitter_magnitude)
        img = _small_affine(img, rng, max_rotate_deg, scale_range)
        return rgb_to_lab(np.asarray(img, dtype=np.float64) / 255.0)
    if mode == "corpus":
        if corpus is None or len(corpus) < 2:
            raise DataError("corpus mode needs at least two corpus images")
        ids = sorted(cid for cid in corpus if cid != ground_truth_id)
        if not ids:
            raise DataError("corpus contains only the ground-truth image")
        pick = ids[int(rng.integers(len(ids)))]
        rgb = corpus[pick]
        if rgb.shape[0] >= crop_size and rgb.shape[1] >= crop_size:
            rgb, _ = random_crop(rgb, crop_size, rng)
        return rgb_to_lab(rgb)
    raise DataError(f"unknown reference mode {mode!r}")


@dataclass
class SplitSpec:
    train: int
    val: int
    seed: int = 0


def load_split(root: str | Path, spec: SplitSpec
               ) -> tuple[list[Path], list[Path]]:
    """Deterministic train/val split of the image files under `root`.

    Pairs with a degraded/ sibling layout are honored by the training loop;
    this function only partitions file ids.
    """
    root = Path(root)
    if not root.exists():
        raise DataError(f"dataset root {root} does not exist")
    files = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    needed = spec.train + spec.val
    if len(files) < needed:
        raise DataError(f"need {needed} images, found {len(files)}")
    order = np.random.default_rng(spec.seed).permutation(len(files))
    train = [files[i] for i in order[:spec.train]]
    val = [files[i] for i in order[spec.train:needed]]
    return train, val
