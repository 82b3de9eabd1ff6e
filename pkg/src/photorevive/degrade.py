"""Synthetic old-photo generator.

Turns a clean RGB image into a damaged grayscale photo: grayscale
conversion, alpha-compositing of a crack/scratch overlay, Gaussian blur, and
pure-white polygonal damage, in that order. Every sampled choice is recorded
in a DegradationRecipe so any output can be replayed bit-identically.

The overlay bank is procedural by default: seeded random-walk cracks with
width jitter. A directory of grayscale scratch textures can be used instead.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .colorspace import rgb_to_gray


class ConfigError(ValueError):
    pass


@dataclass
class DegradationRecipe:
    """Seeded, fully replayable description of one synthetic degradation."""

    seed: int
    overlay_id: str | None = None       # "crack:<seed>" or "file:<name>"
    alpha: float = 0.0                  # overlay opacity in [0, 1]
    blur_sigma: float = 0.0
    polygons: list[list[tuple[float, float]]] = field(default_factory=list)
    grayscale: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DegradationRecipe":
        d = json.loads(text)
        d["polygons"] = [[tuple(p) for p in poly] for poly in d["polygons"]]
        return cls(**d)


@dataclass
class DegradeParams:
    """Sampling ranges for synthesize(); all configurable."""

    overlay_prob: float = 0.8
    alpha_range: tuple[float, float] = (0.2, 0.8)
    blur_sigma_range: tuple[float, float] = (0.0, 2.0)
    max_polygons: int = 3
    polygon_vertices: tuple[int, int] = (3, 8)
    polygon_max_area_frac: float = 0.10


class OverlayBank:
    """Source of crack/scratch overlays: procedural walks or texture files."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory else None
        self.files: list[Path] = []
        if self.directory is not None:
            self.files = sorted(
                p for p in self.directory.iterdir()
                if p.suffix.lower() in (".png", ".jpg", ".jpeg")
            )

    def sample_id(self, rng: np.random.Generator) -> str:
        if self.files:
            return f"file:{self.files[rng.integers(len(self.files))].name}"
        return f"crack:{int(rng.integers(0, 2**31 - 1))}"

    def render(self, overlay_id: str, shape: tuple[int, int]) -> np.ndarray:
        """Overlay as (H, W) opacity mask in [0, 1] times darkness."""
        kind, _, arg = overlay_id.partition(":")
        if kind == "crack":
            return _procedural_cracks(int(arg), shape)
        if kind == "file":
            if self.directory is None:
                raise ConfigError(f"overlay {overlay_id} needs an overlay directory")
            path = self.directory / arg
            if not path.exists():
                raise ConfigError(f"missing overlay file {path}")
            img = Image.open(path).convert("L").resize(shape[::-1], Image.BILINEAR)
            return np.asarray(img, dtype=np.float64) / 255.0
        raise ConfigError(f"unknown overlay id {overlay_id!r}")


def _procedural_cracks(seed: int, shape: tuple[int, int]) -> np.ndarray:
    """Random-walk crack mask with width jitter, values in [0, 1]."""
    rng = np.random.default_rng(seed)
    H, W = shape
    mask = np.zeros((H, W), dtype=np.float64)
    n_cracks = int(rng.integers(1, 5))
    for _ in range(n_cracks):
        y = float(rng.uniform(0, H))
        x = float(rng.uniform(0, W))
        angle = float(rng.uniform(0, 2 * np.pi))
        steps = int(rng.integers(H + W, 2 * (H + W)))
        width = float(rng.uniform(0.5, 2.0))
        for _ in range(steps):
            angle += float(rng.normal(0, 0.25))
            y += np.sin(angle)
            x += np.cos(angle)
            if not (0 <= y < H and 0 <= x < W):
                break
            w = max(0, int(round(width + rng.normal(0, 0.4))))
            yy, xx = int(y), int(x)
            mask[max(0, yy - w):yy + w + 1, max(0, xx - w):xx + w + 1] = 1.0
    # soften edges so composites look like hairline cracks, not blocks
    return np.clip(ndimage.gaussian_filter(mask, 0.7), 0.0, 1.0)


def _sample_polygons(rng: np.random.Generator, shape: tuple[int, int],
                     params: DegradeParams) -> list[list[tuple[float, float]]]:
    H, W = shape
    max_r = np.sqrt(params.polygon_max_area_frac * H * W / np.pi)
    polys = []
    for _ in range(int(rng.integers(0, params.max_polygons + 1))):
        n = int(rng.integers(params.polygon_vertices[0],
                             params.polygon_vertices[1] + 1))
        cy = float(rng.uniform(0, H))
        cx = float(rng.uniform(0, W))
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=n))
        radii = rng.uniform(0.3 * max_r, max_r, size=n)
        poly = [(float(cx + r * np.cos(a)), float(cy + r * np.sin(a)))
                for a, r in zip(angles, radii)]
        polys.append(poly)
    return polys


def _polygon_mask(shape: tuple[int, int],
                  polygons: list[list[tuple[float, float]]]) -> np.ndarray:
    img = Image.new("1", (shape[1], shape[0]), 0)
    draw = ImageDraw.Draw(img)
    for poly in polygons:
        if len(poly) >= 3:
            draw.polygon([(x, y) for x, y in poly], fill=1)
    return np.asarray(img, dtype=bool)


def apply_recipe(clean_rgb: np.ndarray, recipe: DegradationRecipe,
                 bank: OverlayBank | None = None) -> np.ndarray:
    """Deterministically apply a recipe to a clean RGB image in [0, 1]."""
    bank = bank or OverlayBank()
    gray = rgb_to_gray(clean_rgb)
    out = gray.copy()
    if recipe.overlay_id is not None and recipe.alpha > 0:
        overlay = bank.render(recipe.overlay_id, gray.shape)
        # cracks darken: composite toward black with per-pixel opacity
        out = out * (1.0 - recipe.alpha * overlay)
    if recipe.blur_sigma > 0:
        out = ndimage.gaussian_filter(out, recipe.blur_sigma)
    if recipe.polygons:
        out = out.copy()
        out[_polygon_mask(gray.shape, recipe.polygons)] = 1.0
    return np.clip(out, 0.0, 1.0)


def synthesize(clean_rgb: np.ndarray, seed: int,
               bank: OverlayBank | None = None,
               params: DegradeParams | None = None
               ) -> tuple[np.ndarray, DegradationRecipe]:
    """Sample a degradation for one image and apply it.

    Returns (degraded luminance in [0, 1], recipe). Replaying the recipe via
    apply_recipe() reproduces the output bit-exactly.
    """
    clean_rgb = np.asarray(clean_rgb, dtype=np.float64)
    if clean_rgb.shape[0] < 64 or clean_rgb.shape[1] < 64:
        raise ConfigError("clean image must be at least 64x64")
    bank = bank or OverlayBank()
    params = params or DegradeParams()
    rng = np.random.default_rng(seed)

    recipe = DegradationRecipe(seed=seed)
    if rng.uniform() < params.overlay_prob:
        recipe.overlay_id = bank.sample_id(rng)
        recipe.alpha = float(rng.uniform(*params.alpha_range))
    recipe.blur_sigma = float(rng.uniform(*params.blur_sigma_range))
    recipe.polygons = _sample_polygons(rng, clean_rgb.shape[:2], params)
    return apply_recipe(clean_rgb, recipe, bank), recipe


def replay(clean_rgb: np.ndarray, recipe: DegradationRecipe,
           bank: OverlayBank | None = None) -> np.ndarray:
    """Alias of apply_recipe, named for the reproduce-from-disk workflow."""
    return apply_recipe(clean_rgb, recipe, bank)


def degrade_directory(in_dir: str | Path, out_dir: str | Path, seed: int,
                      bank: OverlayBank | None = None,
                      params: DegradeParams | None = None) -> int:
    """Degrade every image in a directory into clean/ degraded/ recipes/.

    Per-item seeds derive from the root seed, so the run is reproducible and
    order-independent. Returns the number of images processed.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    for sub in ("clean", "degraded", "recipes"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    count = 0
    for path in sorted(in_dir.iterdir()):
        if path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
            continue
        rgb = np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
        item_seed = int(np.random.default_rng([seed, count]).integers(2**31 - 1))
        degraded, recipe = synthesize(rgb, item_seed, bank, params)
        stem = path.stem
        Image.fromarray((rgb * 255).round().astype(np.uint8)).save(
            out_dir / "clean" / f"{stem}.png")
        Image.fromarray((degraded * 255).round().astype(np.uint8)).save(
            out_dir / "degraded" / f"{stem}.png")
        (out_dir / "recipes" / f"{stem}.json").write_text(recipe.to_json())
        count += 1
    return count
