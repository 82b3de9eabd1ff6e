import numpy as np
import pytest
import torch
from PIL import Image

from photorevive.cli import main, run
from photorevive.model import RepairModel, save_checkpoint, tiny_model_config


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    torch.manual_seed(0)
    path = tmp_path_factory.mktemp("ckpt") / "tiny.pt"
    save_checkpoint(path, RepairModel(tiny_model_config()))
    return path


def _save_png(path, rng, size=64, gray=False):
    shape = (size, size) if gray else (size, size, 3)
    arr = (rng.uniform(0, 1, shape) * 255).astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)
    return path


@pytest.fixture
def photo(tmp_path, rng):
    return _save_png(tmp_path / "photo.png", rng, gray=True)


@pytest.fixture
def corpus(tmp_path, rng):
    root = tmp_path / "corpus"
    for i in range(3):
        _save_png(root / f"ref{i}.png", rng)
    return root


class TestExitCodes:
    def test_missing_required_flag_is_usage_error(self, capsys):
        assert run(["repair", "--input", "x.png"]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_subcommand_is_usage_error(self):
        assert run(["polish"]) == 1

    def test_no_subcommand_is_usage_error(self):
        assert run([]) == 1

    def test_runtime_failure_exits_two(self, tmp_path, checkpoint, capsys):
        code = run(["repair", "--input", str(tmp_path / "missing.png"),
                    "--checkpoint", str(checkpoint),
                    "--out", str(tmp_path / "out.png")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_exclusive_mode_flags_rejected(self, photo, checkpoint, tmp_path):
        assert run(["repair", "--input", str(photo),
                    "--checkpoint", str(checkpoint),
                    "--out", str(tmp_path / "o.png"),
                    "--restore-only", "--colorize-only"]) == 1

    def test_exclusive_reference_flags_rejected(self, photo, checkpoint,
                                                tmp_path, corpus):
        assert run(["repair", "--input", str(photo),
                    "--reference", str(photo), "--auto-ref", str(corpus),
                    "--checkpoint", str(checkpoint),
                    "--out", str(tmp_path / "o.png")]) == 1

    def test_help_exits_zero(self, capsys):
        assert run(["--help"]) == 0
        assert "repair" in capsys.readouterr().out

    def test_main_raises_systemexit(self):
        with pytest.raises(SystemExit) as exc:
            main()
        assert exc.value.code == 1


class TestRepairCommand:
    def test_restore_only_writes_grayscale_png(self, photo, checkpoint,
                                               tmp_path, capsys):
        out = tmp_path / "restored.png"
        assert run(["repair", "--input", str(photo),
                    "--checkpoint", str(checkpoint), "--out", str(out),
                    "--restore-only"]) == 0
        assert "wrote" in capsys.readouterr().out
        img = Image.open(out)
        assert img.size == (64, 64)
        assert img.mode == "L"

    def test_explicit_reference_writes_color_png(self, photo, checkpoint,
                                                 tmp_path, rng):
        ref = _save_png(tmp_path / "ref.png", rng)
        out = tmp_path / "color.png"
        assert run(["repair", "--input", str(photo), "--reference", str(ref),
                    "--checkpoint", str(checkpoint), "--out", str(out)]) == 0
        assert Image.open(out).mode == "RGB"

    def test_auto_reference_reports_pick(self, photo, checkpoint, corpus,
                                         tmp_path, capsys):
        out = tmp_path / "auto.png"
        assert run(["repair", "--input", str(photo),
                    "--auto-ref", str(corpus), "--ref-rank", "2",
                    "--checkpoint", str(checkpoint), "--out", str(out)]) == 0
        assert "reference: ref" in capsys.readouterr().out
        assert out.exists()


class TestToolCommands:
    def test_degrade_creates_paired_dataset(self, tmp_path, rng, capsys):
        src = tmp_path / "src"
        for i in range(2):
            _save_png(src / f"img{i}.png", rng)
        out = tmp_path / "degraded"
        assert run(["degrade", "--in", str(src), "--out", str(out),
                    "--seed", "3"]) == 0
        assert "degraded 2 images" in capsys.readouterr().out
        for sub in ("clean", "degraded", "recipes"):
            assert len(list((out / sub).iterdir())) == 2

    def test_index_then_recommend_top3(self, photo, corpus, capsys):
        assert run(["index", "--corpus", str(corpus)]) == 0
        assert "indexed 3 images" in capsys.readouterr().out
        assert run(["recommend", "--input", str(photo),
                    "--corpus", str(corpus), "--top", "3"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3
        ranks = [int(l.split("\t")[0]) for l in lines]
        scores = [float(l.split("\t")[2]) for l in lines]
        assert ranks == [1, 2, 3]
        assert scores == sorted(scores, reverse=True)

    def test_train_runs_from_json_config(self, tmp_path, rng, capsys):
        data = tmp_path / "data"
        for i in range(2):
            _save_png(data / f"img{i}.png", rng, size=96)
        cfg = tmp_path / "run.json"
        cfg.write_text(
            '{"dataset_root": "%s", "out_dir": "%s", "epochs": 1, '
            '"batch_size": 1, "steps_per_epoch": 1, "crop_size": 64, '
            '"tiny_model": true}' % (data, tmp_path / "out"))
        assert run(["train", "--config", str(cfg), "--seed", "1"]) == 0
        assert (tmp_path / "out" / "epoch_001.pt").exists()
        assert (tmp_path / "out" / "metrics.csv").exists()

    def test_evaluate_rank_sweep_csv(self, tmp_path, rng, checkpoint, capsys):
        root = tmp_path / "dataset"
        (root / "clean").mkdir(parents=True)
        (root / "degraded").mkdir()
        for i in range(3):
            _save_png(root / "clean" / f"img{i}.png", rng)
            _save_png(root / "degraded" / f"img{i}.png", rng, gray=True)
        out = tmp_path / "sweep.csv"
        assert run(["evaluate", "--checkpoint", str(checkpoint),
                    "--dataset", str(root), "--ref-rank", "3",
                    "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "rank,mean_psnr,mean_ssim"
        assert len(lines) == 4
        assert [int(l.split(",")[0]) for l in lines[1:]] == [1, 2, 3]

    def test_evaluate_requires_paired_layout(self, tmp_path, checkpoint):
        assert run(["evaluate", "--checkpoint", str(checkpoint),
                    "--dataset", str(tmp_path)]) == 2
