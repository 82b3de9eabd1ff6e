"""Automatic reference curation.

Candidate color images are ranked against a grayscale query by comparing
per-channel global statistics of deep features: a texture term built from
channel means and a structure term built from variances and the
cross-covariance, averaged over channels and backbone stages. Both terms
equal 1 for identical images, so the score lies in [0, 1] with 1 meaning a
statistical match. Candidates are compared through their luminance so the
query and candidates live in the same space.

A corpus can be indexed once (per-image feature maps cached to disk, keyed
by content hash) so repeated ranking queries avoid re-extraction.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .backbones import gray_to_3ch, vgg19_features, vgg_stage_features
from .colorspace import rgb_to_gray

log = logging.getLogger(__name__)

_STAT_SIZE = 224  # images are resized before feature extraction so stats align


class RefSelectError(ValueError):
    pass


@dataclass
class RankedReference:
    corpus_id: str
    score: float
    rank: int


class ReferenceSelector:
    def __init__(self, pretrained: bool = True, w_texture: float = 0.5,
                 w_structure: float = 0.5, c1: float = 1e-6, c2: float = 1e-6,
                 stages: tuple[int, ...] = (0, 1, 2, 3)):
        self.features = vgg19_features(pretrained=pretrained)
        self.w_t = w_texture
        self.w_s = w_structure
        self.c1 = c1
        self.c2 = c2
        self.stages = stages

    def _stage_maps(self, L: np.ndarray) -> list[torch.Tensor]:
        """Per-stage feature maps, each flattened to (C, N)."""
        if L.shape[0] < 32 or L.shape[1] < 32:
            raise RefSelectError("images must be at least 32x32")
        img = Image.fromarray((np.clip(L, 0, 1) * 255).astype(np.uint8))
        img = img.resize((_STAT_SIZE, _STAT_SIZE), Image.BILINEAR)
        x = torch.from_numpy(np.asarray(img, dtype=np.float32) / 255.0)
        x = x.unsqueeze(0).unsqueeze(0)
        with torch.no_grad():
            maps = vgg_stage_features(self.features, gray_to_3ch(x))
        return [maps[i][0].reshape(maps[i].shape[1], -1) for i in self.stages]

    def similarity_score(self, query_L: np.ndarray,
                         candidate: np.ndarray) -> float:
        """Texture+structure similarity in [0, 1]; candidate is RGB or gray."""
        cand_L = rgb_to_gray(candidate) if candidate.ndim == 3 else candidate
        return self._score_maps(self._stage_maps(query_L),
                                self._stage_maps(cand_L))

    def _score_maps(self, maps_x: list[torch.Tensor],
                    maps_y: list[torch.Tensor]) -> float:
        terms = []
        for fx, fy in zip(maps_x, maps_y):
            mx = fx.mean(dim=1)
            my = fy.mean(dim=1)
            vx = fx.var(dim=1, unbiased=False)
            vy = fy.var(dim=1, unbiased=False)
            cov = ((fx - mx[:, None]) * (fy - my[:, None])).mean(dim=1)
            t = (2 * mx * my + self.c1) / (mx * mx + my * my + self.c1)
            s = (2 * cov + self.c2) / (vx + vy + self.c2)
            terms.append((self.w_t * t + self.w_s * s).mean())
        return float(torch.stack(terms).mean().clamp(0.0, 1.0))

    def rank_references(self, query_L: np.ndarray, corpus: dict[str, np.ndarray],
                        k: int) -> list[RankedReference]:
        """Top-k corpus entries by score, ties broken by id."""
        if not corpus:
            raise RefSelectError("corpus is empty")
        if k > len(corpus):
            raise RefSelectError(f"k={k} exceeds corpus size {len(corpus)}")
        qmaps = self._stage_maps(query_L)
        scored = []
        for cid, img in corpus.items():
            cand_L = rgb_to_gray(img) if img.ndim == 3 else img
            scored.append((cid, self._score_maps(qmaps, self._stage_maps(cand_L))))
        scored.sort(key=lambda cs: (-cs[1], cs[0]))
        return [RankedReference(cid, score, rank + 1)
                for rank, (cid, score) in enumerate(scored[:k])]


class CorpusIndex:
    """On-disk cache of per-image stage feature maps, keyed by content hash."""

    VERSION = 1

    def __init__(self, selector: ReferenceSelector, directory: str | Path):
        self.selector = selector
        self.directory = Path(directory)
        self.index_path = self.directory / ".refindex"
        self.entries: dict[str, dict] = {}

    @staticmethod
    def _content_hash(path: Path) -> str:
        return hashlib.sha256(path.read_bytes()).hexdigest()[:16]

    def build(self) -> int:
        """Index every readable image; unchanged files are skipped."""
        self.index_path.mkdir(exist_ok=True)
        meta_path = self.index_path / "meta.json"
        old = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        old_entries = old.get("entries", {}) if old.get("version") == self.VERSION else {}

        self.entries = {}
        for path in sorted(self.directory.iterdir()):
            if path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            chash = self._content_hash(path)
            cached = old_entries.get(path.name)
            blob = self.index_path / f"{chash}.npz"
            if cached and cached["hash"] == chash and blob.exists():
                self.entries[path.name] = cached
                continue
            try:
                rgb = np.asarray(Image.open(path).convert("RGB"),
                                 dtype=np.float64) / 255.0
                maps = self.selector._stage_maps(rgb_to_gray(rgb))
            except (OSError, RefSelectError) as exc:
                log.warning("skipping unreadable image %s: %s", path.name, exc)
                continue
            np.savez_compressed(
                blob, **{f"stage{i}": m.numpy() for i, m in enumerate(maps)}
            )
            self.entries[path.name] = {"hash": chash}
        meta_path.write_text(json.dumps(
            {"version": self.VERSION, "entries": self.entries}, indent=2))
        return len(self.entries)

    def load(self) -> None:
        meta_path = self.index_path / "meta.json"
        if not meta_path.exists():
            raise RefSelectError(f"no index at {self.index_path}; run build first")
        meta = json.loads(meta_path.read_text())
        if meta.get("version") != self.VERSION:
            raise RefSelectError("index version mismatch; rebuild required")
        self.entries = meta["entries"]

    def _maps_for(self, name: str) -> list[torch.Tensor]:
        blob = np.load(self.index_path / f"{self.entries[name]['hash']}.npz")
        return [torch.from_numpy(blob[f"stage{i}"])
                for i in range(len(blob.files))]

    def rank(self, query_L: np.ndarray, k: int) -> list[RankedReference]:
        if not self.entries:
            raise RefSelectError("corpus index is empty")
        if k > len(self.entries):
            raise RefSelectError(f"k={k} exceeds corpus size {len(self.entries)}")
        qmaps = self.selector._stage_maps(query_L)
        scored = [(name, self.selector._score_maps(qmaps, self._maps_for(name)))
                  for name in self.entries]
        scored.sort(key=lambda cs: (-cs[1], cs[0]))
        return [RankedReference(cid, score, rank + 1)
                for rank, (cid, score) in enumerate(scored[:k])]
