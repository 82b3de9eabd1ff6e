"""End-to-end training loop: alternating generator/discriminator updates
under the weighted loss, Adam with beta1=0.99, exponential learning-rate
decay (x0.99 per epoch), per-epoch checkpoints and a CSV metric log.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .losses import (LossComponents, LossWeights, PatchDiscriminator,
                     PerceptualLoss, adv_losses, hist_l, rec_ab, rec_l,
                     total_loss)
from .metrics import psnr
from .model import ModelConfig, RepairModel, load_checkpoint, save_checkpoint
from .sphist import SpHist, compute_sphist

log = logging.getLogger(__name__)


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.99
    beta2: float = 0.999
    lr_decay: float = 0.99
    epochs: int = 20
    batch_size: int = 8
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class Batch:
    """Tensors for one batch: lists because similarity maps are per-image."""

    input_L: list[torch.Tensor]   # (1, 1, H, W) each
    target_L: list[torch.Tensor]  # (1, 1, H, W)
    target_ab: list[torch.Tensor]  # (1, 2, H, W)
    ref_L: list[torch.Tensor]     # (1, 1, H, W)
    ref_ab: list[torch.Tensor]    # (H, W, 2)


class TrainState:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        torch.manual_seed(cfg.seed)
        self.model = RepairModel(cfg.model)
        self.discriminator = PatchDiscriminator()
        self.perceptual = PerceptualLoss(
            pretrained=cfg.model.pretrained_backbones)
        betas = (cfg.beta1, cfg.beta2)
        self.opt_g = torch.optim.Adam(self.model.parameters(), lr=cfg.lr,
                                      betas=betas)
        self.opt_d = torch.optim.Adam(self.discriminator.parameters(),
                                      lr=cfg.lr, betas=betas)
        self.sched_g = torch.optim.lr_scheduler.ExponentialLR(
            self.opt_g, gamma=cfg.lr_decay)
        self.sched_d = torch.optim.lr_scheduler.ExponentialLR(
            self.opt_d, gamma=cfg.lr_decay)
        self.epoch = 0
        self.step = 0

    @property
    def lr(self) -> float:
        return self.opt_g.param_groups[0]["lr"]

    def save(self, path):
        save_checkpoint(
            path, self.model, self.discriminator,
            optimizers={"g": self.opt_g, "d": self.opt_d},
            epoch=self.epoch,
            extra={"step": self.step,
                   "sched_g": self.sched_g.state_dict(),
                   "sched_d": self.sched_d.state_dict(),
                   "torch_rng": torch.get_rng_state()})

    @classmethod
    def load(cls, path, cfg: TrainConfig) -> "TrainState":
        state = cls(cfg)
        payload = load_checkpoint(path)
        state.model.load_state_dict(payload["model"])
        state.discriminator.load_state_dict(payload["discriminator"])
        state.opt_g.load_state_dict(payload["optimizers"]["g"])
        state.opt_d.load_state_dict(payload["optimizers"]["d"])
        state.sched_g.load_state_dict(payload["extra"]["sched_g"])
        state.sched_d.load_state_dict(payload["extra"]["sched_d"])
        state.epoch = payload["epoch"]
        state.step = payload["extra"]["step"]
        torch.set_rng_state(payload["extra"]["torch_rng"])
        return state


def _predicted_histograms(model: RepairModel, ab: torch.Tensor
                          ) -> tuple[SpHist, SpHist]:
    return (compute_sphist(ab[0, 0], model.centers_a, "a"),
            compute_sphist(ab[0, 1], model.centers_b, "b"))


def train_step(batch: Batch, state: TrainState) -> dict[str, float]:
    """One generator update plus one discriminator update.

    Returns the logged loss components. Non-finite total loss aborts with a
    diagnostic.
    """
    model = state.model
    w = state.cfg.weights
    model.train()

    comp_sum = {"rec_l": 0.0, "perceptual": 0.0, "hist": 0.0,
                "rec_ab": 0.0, "adv": 0.0, "d_loss": 0.0}
    n = len(batch.input_L)

    g_total = None
    fakes, reals = [], []
    for i in range(n):
        L_r, ab = model(batch.input_L[i], batch.ref_L[i], batch.ref_ab[i])
        loss_rec_l = rec_l(L_r, batch.target_L[i])
        loss_perc = state.perceptual(L_r, batch.target_L[i])
        h_out_a, h_out_b = _predicted_histograms(model, ab)
        h_ref_a, h_ref_b = model.reference_histograms(batch.ref_ab[i])
        loss_hist = hist_l(h_out_a, h_out_b, h_ref_a, h_ref_b)
        loss_rec_ab = rec_ab(ab, batch.target_ab[i])

        fake = torch.cat([L_r, ab], dim=1)
        real = torch.cat([batch.target_L[i], batch.target_ab[i]], dim=1)
        fakes.append(fake)
        reals.append(real)
        d_loss_i, g_adv_i = adv_losses(state.discriminator, real, fake)

        comp = LossComponents(loss_rec_l, loss_perc, loss_hist, loss_rec_ab,
                              g_adv_i)
        total = total_loss(comp, w)
        g_total = total if g_total is None else g_total + total
        for k, v in comp.detached().items():
            comp_sum[k] += v
        comp_sum["d_loss"] += float(d_loss_i.detach())

    g_total = g_total / n
    if not torch.isfinite(g_total):
        raise TrainingAborted(
            f"non-finite generator loss at step {state.step}: "
            + str({k: v / n for k, v in comp_sum.items()}))

    state.opt_g.zero_grad()
    g_total.backward()
    state.opt_g.step()

    if w.eta > 0:
        d_total = None
        for real, fake in zip(reals, fakes):
            d_loss_i, _ = adv_losses(state.discriminator, real.detach(),
                                     fake.detach())
            d_total = d_loss_i if d_total is None else d_total + d_loss_i
        d_total = d_total / n
        if not torch.isfinite(d_total):
            raise TrainingAborted(f"non-finite discriminator loss at step {state.step}")
        state.opt_d.zero_grad()
        d_total.backward()
        state.opt_d.step()
        comp_sum["d_loss"] = float(d_total.detach())

    state.step += 1
    out = {k: v / n for k, v in comp_sum.items()}
    out["total"] = float(g_total.detach())
    return out


def fit(cfg: TrainConfig, batches_per_epoch, out_dir: str | Path,
        val_pairs=None, resume_from: str | Path | None = None) -> list[Path]:
    """Train for cfg.epochs epochs.

    batches_per_epoch: callable(epoch) -> iterable of Batch. Writes one
    checkpoint per epoch plus metrics.csv; returns the checkpoint paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state = (TrainState.load(resume_from, cfg) if resume_from
             else TrainState(cfg))

    metrics_path = out_dir / "metrics.csv"
    new_log = not metrics_path.exists()
    ckpts = []
    with metrics_path.open("a", newline="") as fh:
        writer = csv.writer(fh)
        if new_log:
            writer.writerow(["epoch", "lr", "total", "rec_l", "perceptual",
                             "hist", "rec_ab", "adv", "d_loss", "val_psnr"])
        for epoch in range(state.epoch, cfg.epochs):
            logs = []
            for batch in batches_per_epoch(epoch):
                logs.append(train_step(batch, state))
            mean = {k: float(np.mean([l[k] for l in logs])) for k in logs[0]} \
                if logs else {}
            val_psnr = _validate(state.model, val_pairs) if val_pairs else ""
            state.epoch = epoch + 1
            lr_now = state.lr
            state.sched_g.step()
            state.sched_d.step()
            ckpt = out_dir / f"epoch_{state.epoch:03d}.pt"
            state.save(ckpt)
            ckpts.append(ckpt)
            writer.writerow([state.epoch, f"{lr_now:.8f}"]
                            + [f"{mean.get(k, float('nan')):.6f}"
                               for k in ("total", "rec_l", "perceptual",
                                         "hist", "rec_ab", "adv", "d_loss")]
                            + [val_psnr])
            fh.flush()
            log.info("epoch %d done: %s", state.epoch, mean)
    return ckpts


def load_train_config(path: Path) -> tuple[TrainConfig, dict]:
    """Read a JSON run config.

    Recognized keys: dataset_root, out_dir, epochs, batch_size, lr, beta1,
    beta2, lr_decay, seed, crop_size, steps_per_epoch, tiny_model, weights
    (alpha/beta/lam/gamma/eta). Returns (TrainConfig, run options).
    """
    import json

    from .model import tiny_model_config

    raw = json.loads(Path(path).read_text())
    weights = LossWeights(**raw.get("weights", {}))
    model_cfg = (tiny_model_config() if raw.get("tiny_model")
                 else ModelConfig())
    cfg = TrainConfig(
        lr=raw.get("lr", 1e-4), beta1=raw.get("beta1", 0.99),
        beta2=raw.get("beta2", 0.999), lr_decay=raw.get("lr_decay", 0.99),
        epochs=raw.get("epochs", 20), batch_size=raw.get("batch_size", 8),
        seed=raw.get("seed", 0), weights=weights, model=model_cfg)
    run = {
        "dataset_root": raw["dataset_root"],
        "out_dir": raw.get("out_dir", "runs/default"),
        "crop_size": raw.get("crop_size", 256),
        "steps_per_epoch": raw.get("steps_per_epoch", 100),
        "reference_jitter_prob": raw.get("reference_jitter_prob", 0.5),
        "degrade": raw.get("degrade", True),
    }
    return cfg, run


def make_epoch_batches(cfg: TrainConfig, run: dict):
    """Batch generator over a directory of clean color images.

    Each epoch flips a seeded coin between jittered-crop references and
    corpus-draw references; degradation recipes are sampled per item.
    """
    from pathlib import Path as _P

    from .colorspace import rgb_to_lab
    from .data import load_image, make_reference, random_crop
    from .degrade import synthesize

    root = _P(run["dataset_root"])
    files = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
    if not files:
        raise TrainingAborted(f"no images under {root}")
    crop = run["crop_size"]

    def batches(epoch: int):
        rng = np.random.default_rng([cfg.seed, epoch])
        mode = ("jitter" if rng.uniform() < run["reference_jitter_prob"]
                else "corpus")
        corpus = None
        if mode == "corpus":
            corpus = {p.name: load_image(p) for p in files}
        for _ in range(run["steps_per_epoch"]):
            batch = Batch([], [], [], [], [])
            for _ in range(cfg.batch_size):
                pick = files[int(rng.integers(len(files)))]
                rgb = load_image(pick)
                patch, loc = random_crop(rgb, crop, rng)
                target = rgb_to_lab(patch)
                if run["degrade"]:
                    degraded, _ = synthesize(
                        patch, int(rng.integers(2**31 - 1)))
                else:
                    degraded = target.L
                ref = make_reference(
                    rgb, mode, rng, crop_size=crop, avoid_location=loc,
                    corpus=corpus, ground_truth_id=pick.name)
                batch.input_L.append(
                    torch.from_numpy(degraded).float()[None, None])
                batch.target_L.append(
                    torch.from_numpy(target.L).float()[None, None])
                batch.target_ab.append(
                    torch.from_numpy(target.ab).float().permute(2, 0, 1)[None])
                batch.ref_L.append(
                    torch.from_numpy(ref.L).float()[None, None])
                batch.ref_ab.append(torch.from_numpy(ref.ab).float())
            yield batch

    return batches


def _validate(model: RepairModel, pairs) -> str:
    model.eval()
    scores = []
    with torch.no_grad():
        for inp, ref_L, ref_ab, target_L in pairs:
            L_r, _ = model(inp, ref_L, ref_ab)
            scores.append(psnr(L_r.numpy(), target_L.numpy()))
    return f"{float(np.mean(scores)):.3f}"
