"""Train a tiny model for two short epochs on synthetic data, then repair an
image with the resulting checkpoint.

This is the full training loop (alternating generator/discriminator updates,
per-epoch checkpoints, CSV metric log) shrunk to run on a laptop CPU in
about a minute.
"""

import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from photorevive import RepairPipeline, RepairRequest, model_from_checkpoint
from photorevive.model import tiny_model_config
from photorevive.train import TrainConfig, fit, make_epoch_batches

rng = np.random.default_rng(0)
work = Path(tempfile.mkdtemp(prefix="photorevive_demo_"))
data = work / "data"
data.mkdir()
for i in range(3):
    arr = (rng.uniform(0, 1, (96, 96, 3)) * 255).astype(np.uint8)
    Image.fromarray(arr).save(data / f"img{i}.png")

cfg = TrainConfig(model=tiny_model_config(), epochs=2, batch_size=1)
run = {"dataset_root": str(data), "out_dir": str(work / "run"),
       "crop_size": 64, "steps_per_epoch": 2,
       "reference_jitter_prob": 0.5, "degrade": True}
ckpts = fit(cfg, make_epoch_batches(cfg, run), run["out_dir"])
print("checkpoints:", [c.name for c in ckpts])
print((work / "run" / "metrics.csv").read_text())

model = model_from_checkpoint(ckpts[-1])
pipeline = RepairPipeline(model)
gray = rng.uniform(0, 1, (64, 64))
reference = rng.uniform(0, 1, (64, 64, 3))
result = pipeline.repair(RepairRequest(gray, reference=reference))
print("repaired RGB shape:", result.rgb.shape, "timings:", result.timings)
