import math

import numpy as np
import pytest
import torch

from photorevive.losses import LossWeights
from photorevive.model import tiny_model_config
from photorevive.train import (Batch, TrainConfig, TrainState, fit,
                               load_train_config, make_epoch_batches,
                               train_step)


def _tiny_cfg(**kw):
    kw.setdefault("epochs", 1)
    kw.setdefault("batch_size", 2)
    return TrainConfig(model=tiny_model_config(), **kw)


def _toy_batch(rng, n=2, hw=64):
    # 64 is the smallest toy size the discriminator's normalization accepts
    t = lambda *s: torch.from_numpy(rng.uniform(0, 1, s)).float()
    return Batch(
        input_L=[t(1, 1, hw, hw) for _ in range(n)],
        target_L=[t(1, 1, hw, hw) for _ in range(n)],
        target_ab=[t(1, 2, hw, hw) * 2 - 1 for _ in range(n)],
        ref_L=[t(1, 1, hw, hw) for _ in range(n)],
        ref_ab=[t(hw, hw, 2) * 2 - 1 for _ in range(n)],
    )


class TestTrainStep:
    def test_logs_finite_loss_components(self, rng):
        state = TrainState(_tiny_cfg())
        logs = train_step(_toy_batch(rng), state)
        expected = {"total", "rec_l", "perceptual", "hist", "rec_ab",
                    "adv", "d_loss"}
        assert expected <= set(logs)
        assert all(math.isfinite(v) for v in logs.values())
        assert state.step == 1

    def test_parameters_change(self, rng):
        state = TrainState(_tiny_cfg())
        before = {k: v.clone() for k, v in state.model.state_dict().items()
                  if v.dtype.is_floating_point}
        train_step(_toy_batch(rng), state)
        changed = [k for k, v in state.model.state_dict().items()
                   if k in before and not torch.equal(v, before[k])]
        assert changed

    def test_zero_eta_skips_discriminator_update(self, rng):
        state = TrainState(_tiny_cfg(weights=LossWeights(eta=0.0)))
        before = {k: v.clone()
                  for k, v in state.discriminator.state_dict().items()}
        train_step(_toy_batch(rng), state)
        assert all(torch.equal(v, before[k])
                   for k, v in state.discriminator.state_dict().items())

    def test_loss_decreases_on_repeated_batch(self, rng):
        state = TrainState(_tiny_cfg(lr=1e-3, weights=LossWeights(eta=0.0)))
        batch = _toy_batch(rng, n=1)
        first = train_step(batch, state)["total"]
        last = first
        for _ in range(30):
            last = train_step(batch, state)["total"]
        assert last < first


class TestSchedule:
    def test_adam_hyperparameters(self):
        state = TrainState(_tiny_cfg())
        group = state.opt_g.param_groups[0]
        assert group["lr"] == pytest.approx(1e-4)
        assert group["betas"] == (0.99, 0.999)

    @pytest.mark.filterwarnings(
        "ignore:Detected call of:UserWarning")
    def test_exponential_decay_per_epoch(self):
        state = TrainState(_tiny_cfg())
        for epoch in range(5):
            assert state.lr == pytest.approx(1e-4 * 0.99**epoch, rel=1e-9)
            state.sched_g.step()


class TestFit:
    def _dataset(self, tmp_path, rng, n=3, size=96):
        from PIL import Image

        root = tmp_path / "data"
        root.mkdir()
        for i in range(n):
            arr = (rng.uniform(0, 1, (size, size, 3)) * 255).astype(np.uint8)
            Image.fromarray(arr).save(root / f"img{i}.png")
        return root

    def _run_opts(self, root, out):
        return {"dataset_root": str(root), "out_dir": str(out),
                "crop_size": 64, "steps_per_epoch": 1,
                "reference_jitter_prob": 0.5, "degrade": True}

    def test_writes_checkpoints_and_metrics(self, tmp_path, rng):
        root = self._dataset(tmp_path, rng)
        cfg = _tiny_cfg(epochs=2, batch_size=1)
        run = self._run_opts(root, tmp_path / "out")
        ckpts = fit(cfg, make_epoch_batches(cfg, run), run["out_dir"])
        assert [c.name for c in ckpts] == ["epoch_001.pt", "epoch_002.pt"]
        lines = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
        assert lines[0].startswith("epoch,lr,total")
        assert len(lines) == 3

    def test_resume_continues_from_saved_epoch(self, tmp_path, rng):
        root = self._dataset(tmp_path, rng)
        cfg = _tiny_cfg(epochs=1, batch_size=1)
        run = self._run_opts(root, tmp_path / "out")
        first = fit(cfg, make_epoch_batches(cfg, run), run["out_dir"])
        cfg2 = _tiny_cfg(epochs=2, batch_size=1)
        more = fit(cfg2, make_epoch_batches(cfg2, run), run["out_dir"],
                   resume_from=first[-1])
        assert [c.name for c in more] == ["epoch_002.pt"]

    def test_state_roundtrip_preserves_lr(self, tmp_path, rng):
        state = TrainState(_tiny_cfg(epochs=3))
        train_step(_toy_batch(rng, n=1), state)
        state.epoch = 2
        state.sched_g.step()
        state.sched_g.step()
        path = tmp_path / "state.pt"
        state.save(path)
        back = TrainState.load(path, _tiny_cfg(epochs=3))
        assert back.epoch == 2
        assert back.step == 1
        assert back.lr == pytest.approx(state.lr, rel=1e-12)

    def test_same_seed_same_first_batch(self, tmp_path, rng):
        root = self._dataset(tmp_path, rng)
        cfg = _tiny_cfg(seed=7, batch_size=1)
        run = self._run_opts(root, tmp_path / "out")
        b1 = next(iter(make_epoch_batches(cfg, run)(0)))
        b2 = next(iter(make_epoch_batches(cfg, run)(0)))
        assert torch.equal(b1.input_L[0], b2.input_L[0])
        assert torch.equal(b1.ref_ab[0], b2.ref_ab[0])


class TestRunConfig:
    def test_json_config_parsed(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(
            '{"dataset_root": "data", "epochs": 3, "lr": 0.0002, '
            '"tiny_model": true, "weights": {"eta": 0.0}, '
            '"steps_per_epoch": 5}')
        cfg, run = load_train_config(cfg_path)
        assert cfg.epochs == 3
        assert cfg.lr == pytest.approx(2e-4)
        assert cfg.weights.eta == 0.0
        assert cfg.model.histogram_bins == 8
        assert run["dataset_root"] == "data"
        assert run["steps_per_epoch"] == 5

    def test_defaults_follow_training_protocol(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text('{"dataset_root": "data"}')
        cfg, run = load_train_config(cfg_path)
        assert cfg.lr == pytest.approx(1e-4)
        assert cfg.beta1 == 0.99
        assert cfg.lr_decay == 0.99
        assert cfg.epochs == 20
        assert cfg.batch_size == 8
