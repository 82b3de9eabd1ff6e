"""Command-line surface.

Subcommands: repair, train, evaluate, degrade, recommend, index.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """argparse, but usage problems exit 1 with help on stderr."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _write_image_atomic(path: Path, arr: np.ndarray) -> None:
    from PIL import Image

    path.parent.mkdir(parents=True, exist_ok=True)
    img = Image.fromarray((np.clip(arr, 0, 1) * 255).round().astype(np.uint8))
    with tempfile.NamedTemporaryFile(dir=path.parent, suffix=path.suffix,
                                     delete=False) as tmp:
        img.save(tmp, format="PNG")
    Path(tmp.name).replace(path)


def _write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("w", dir=path.parent, suffix=".tmp",
                                     delete=False) as tmp:
        tmp.write(text)
    Path(tmp.name).replace(path)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="photorevive",
                     description="Reference-guided old photo repair")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("repair", help="restore and colorize one photo")
    p.add_argument("--input", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--reference", help="explicit color reference image")
    group.add_argument("--auto-ref", help="corpus directory for automatic pick")
    p.add_argument("--ref-rank", type=int, default=1,
                   help="use the rank-k automatic reference")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--restore-only", action="store_true")
    mode.add_argument("--colorize-only", action="store_true")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True,
                   help="directory with clean/ and degraded/ subfolders")
    p.add_argument("--ref-rank", type=int, default=None,
                   help="emit a rank-1..k reference sensitivity sweep")
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("degrade", help="synthesize degraded copies of a folder")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--overlays", default=None, help="scratch texture directory")

    p = sub.add_parser("recommend", help="rank reference candidates")
    p.add_argument("--input", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("index", help="build the reference corpus index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_repair(args) -> int:
    import torch

    from .data import load_image
    from .model import model_from_checkpoint
    from .pipeline import RepairPipeline, RepairRequest
    from .refselect import CorpusIndex, ReferenceSelector

    torch.manual_seed(args.seed)
    model = model_from_checkpoint(args.checkpoint)
    index = None
    if args.auto_ref:
        index = CorpusIndex(ReferenceSelector(
            pretrained=model.cfg.pretrained_backbones), args.auto_ref)
        index.build()
    pipeline = RepairPipeline(model, corpus_index=index)
    req = RepairRequest(
        image=load_image(args.input),
        reference=load_image(args.reference) if args.reference else None,
        auto_rank=args.ref_rank,
        restore_only=args.restore_only,
        colorize_only=args.colorize_only)
    result = pipeline.repair(req)
    out = Path(args.out)
    _write_image_atomic(out, result.gray if result.rgb is None else result.rgb)
    if result.reference_id:
        print(f"reference: {result.reference_id}")
    print(f"wrote {out}")
    return 0


def _cmd_train(args) -> int:
    from .train import fit, load_train_config, make_epoch_batches

    cfg, run = load_train_config(Path(args.config))
    if args.seed is not None:
        cfg.seed = args.seed
    fit(cfg, make_epoch_batches(cfg, run), run["out_dir"])
    print(f"checkpoints in {run['out_dir']}")
    return 0


def _cmd_evaluate(args) -> int:
    import torch

    from .data import load_image
    from .metrics import evaluate, rank_sweep
    from .model import model_from_checkpoint
    from .pipeline import RepairPipeline, RepairRequest
    from .refselect import CorpusIndex, ReferenceSelector

    torch.manual_seed(args.seed)
    root = Path(args.dataset)
    clean_dir, degraded_dir = root / "clean", root / "degraded"
    if not clean_dir.is_dir() or not degraded_dir.is_dir():
        raise FileNotFoundError(f"{root} must contain clean/ and degraded/")

    model = model_from_checkpoint(args.checkpoint)
    index = CorpusIndex(ReferenceSelector(
        pretrained=model.cfg.pretrained_backbones), clean_dir)
    index.build()
    pipeline = RepairPipeline(model, corpus_index=index)

    samples = []
    for path in sorted(degraded_dir.iterdir()):
        gt = clean_dir / path.name
        if not gt.exists():
            raise FileNotFoundError(f"missing ground truth for {path.name}")
        samples.append((path.name,
                        np.asarray(load_image(path))[..., 0],
                        load_image(gt)))

    def repair_fn(inp, rank):
        req = RepairRequest(image=inp, auto_rank=rank or 1)
        return pipeline.repair(req).rgb

    ckpt_id = Path(args.checkpoint).name
    if args.ref_rank:
        reports = rank_sweep(repair_fn, samples, args.ref_rank,
                             dataset_id=root.name, checkpoint_id=ckpt_id)
        lines = ["rank,mean_psnr,mean_ssim"]
        for r in reports:
            lines.append(f"{r.ref_rank},{r.mean_psnr:.4f},{r.mean_ssim:.4f}")
        text = "\n".join(lines) + "\n"
    else:
        report = evaluate(repair_fn, samples, dataset_id=root.name,
                          checkpoint_id=ckpt_id)
        text = report.to_csv()
        print(report.to_markdown())
    if args.out:
        _write_text_atomic(Path(args.out), text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_degrade(args) -> int:
    from .degrade import OverlayBank, degrade_directory

    bank = OverlayBank(args.overlays) if args.overlays else None
    n = degrade_directory(args.in_dir, args.out, args.seed, bank)
    print(f"degraded {n} images into {args.out}")
    return 0


def _cmd_recommend(args) -> int:
    from .colorspace import rgb_to_gray
    from .data import load_image
    from .refselect import CorpusIndex, ReferenceSelector

    index = CorpusIndex(ReferenceSelector(), args.corpus)
    index.build()
    query = load_image(args.input)
    ranked = index.rank(rgb_to_gray(query), k=args.top)
    for r in ranked:
        print(f"{r.rank}\t{r.corpus_id}\t{r.score:.6f}")
    return 0


def _cmd_index(args) -> int:
    from .refselect import CorpusIndex, ReferenceSelector

    index = CorpusIndex(ReferenceSelector(), args.corpus)
    n = index.build()
    print(f"indexed {n} images")
    return 0


_COMMANDS = {
    "repair": _cmd_repair,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "degrade": _cmd_degrade,
    "recommend": _cmd_recommend,
    "index": _cmd_index,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # runtime failures exit 2
        log.error("%s", exc)
        sys.stderr.write(f"error: {exc}\n")
        return 2


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
