"""Command line entry points.

Subcommands: ``train``, ``eval``, ``gradcheck``, ``ablate``, ``corners``,
``synth``. Config files are JSON key-value documents matching the
ModelConfig / TrainConfig fields.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .ablation import load_grid, run_ablation
from .config import ModelConfig, TrainConfig, load_config_file
from .corners import DetectorParams, detect_corners
from .data import Charset, ManifestDataset, load_manifest
from .imageio import read_png, write_pgm
from .model import CornerGuidedTransformer
from .synth import SyntheticWordDataset, load_lexicon, write_synthetic_dataset
from .train import evaluate_model, train
from .validation import DataError


def _parse_synth_spec(spec: str) -> dict:
    """Parse 'synth:count=200,seed=7' style dataset specs."""
    out = {"count": 200, "seed": 0}
    body = spec.split(":", 1)[1] if ":" in spec else ""
    for item in filter(None, body.split(",")):
        key, _, value = item.partition("=")
        if key not in out:
            raise DataError(f"unknown synth dataset key {key!r} in {spec!r}")
        out[key] = int(value)
    return out


def _load_dataset(data: str, detector: DetectorParams, image_h: int = 32, image_w: int = 128):
    if data.startswith("synth:") or data == "synth":
        from .synth import RenderStyle

        spec = _parse_synth_spec(data)
        style = RenderStyle(image_h=image_h, image_w=image_w)
        return SyntheticWordDataset(
            spec["count"], seed=spec["seed"], detector=detector, style=style
        )
    return ManifestDataset(load_manifest(data), detector=detector,
                           image_h=image_h, image_w=image_w)


def _model_config(args) -> ModelConfig:
    cfg = (
        load_config_file(args.model_config, ModelConfig)
        if getattr(args, "model_config", None)
        else ModelConfig.toy()
    )
    if getattr(args, "fusion_mode", None):
        cfg = dataclasses.replace(cfg, fusion_mode=args.fusion_mode)
    return cfg


def _train_config(args) -> TrainConfig:
    cfg = (
        load_config_file(args.train_config, TrainConfig)
        if getattr(args, "train_config", None)
        else TrainConfig(epochs=2, decay_epoch=2)
    )
    if getattr(args, "cc_include_pad", False):
        cfg = dataclasses.replace(cfg, cc_include_pad=True)
    return cfg


def cmd_train(args) -> int:
    model_cfg = _model_config(args)
    train_cfg = _train_config(args)
    detector = DetectorParams(kind=args.detector)
    dataset = _load_dataset(args.data, detector, model_cfg.image_h, model_cfg.image_w)
    model = CornerGuidedTransformer(model_cfg, seed=train_cfg.seed)
    result = train(
        model,
        dataset,
        train_cfg,
        out_dir=args.out,
        detector=detector,
        log_fn=print if args.verbose else None,
    )
    print(f"trained {result.steps} steps; checkpoint: {result.checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    model = CornerGuidedTransformer.from_checkpoint(args.checkpoint)
    detector = DetectorParams(kind=args.detector)
    dataset = _load_dataset(args.data, detector, model.config.image_h, model.config.image_w)
    report, dump = evaluate_model(
        model,
        dataset,
        Charset(),
        case_sensitive=args.case_sensitive,
        collect_features=args.dump_features is not None,
    )
    print("word_acc\tchar_recall\tchar_precision\tn_samples")
    print(report.as_tsv())
    if args.report_file:
        report.write_kv(args.report_file)
    if args.dump_features:
        dump.write(args.dump_features)
        print(f"wrote {len(dump)} feature rows to {args.dump_features}")
    return 0


def cmd_gradcheck(args) -> int:
    from . import tensor as T
    from .losses import cc_loss, ce_loss
    from .tensor import Tensor

    rng = np.random.default_rng(args.seed)
    failures = 0

    def check(name, err, budget=1e-4):
        nonlocal failures
        ok = err < budget
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'}  {name:<28} max rel err {err:.3e}")

    x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
    w = rng.standard_normal((4, 6))
    check("softmax", T.grad_check(lambda: (T.softmax(x, axis=1) * w).sum(), [x]))
    a = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
    b = Tensor(rng.standard_normal((5, 2)), requires_grad=True)
    check("matmul", T.grad_check(lambda: T.matmul(a, b).sum(), [a, b]))
    g = Tensor(rng.standard_normal(6), requires_grad=True)
    bb = Tensor(rng.standard_normal(6), requires_grad=True)
    check("layer_norm", T.grad_check(lambda: (T.layer_norm(x, g, bb) * w).sum(), [x, g, bb]))
    cx = Tensor(rng.standard_normal((1, 2, 5, 6)), requires_grad=True)
    cw = Tensor(rng.standard_normal((3, 2, 3, 3)), requires_grad=True)
    check("conv2d", T.grad_check(lambda: T.conv2d(cx, cw, stride=2, padding=1).mean(), [cx, cw]))
    q = Tensor(rng.standard_normal((2, 4, 8)), requires_grad=True)
    kv = Tensor(rng.standard_normal((2, 6, 8)), requires_grad=True)
    from .model import MultiHeadAttention

    mha = MultiHeadAttention(np.random.default_rng(args.seed + 1), 8, 2)
    mha_params = list(mha.parameters().values())
    attn_w = rng.standard_normal((2, 4, 8))
    check(
        "corner_query_cross_attn",
        T.grad_check(
            lambda: (mha(q, kv) * attn_w).sum(),
            [q, kv] + mha_params,
            noise_floor=1e-7,
        ),
    )
    logits = Tensor(rng.standard_normal((2, 5, 7)), requires_grad=True)
    targets = rng.integers(0, 7, (2, 5))
    mask = np.ones((2, 5))
    check("ce_loss", T.grad_check(lambda: ce_loss(logits, targets, mask), [logits]))
    raw = Tensor(rng.standard_normal((8, 6)), requires_grad=True)
    labels = np.array([0, 0, 1, 1, 2, 2, 0, 1])
    check(
        "cc_loss",
        T.grad_check(
            lambda: cc_loss(T.l2_normalize(raw, axis=-1), labels, temperature=0.1), [raw]
        ),
    )
    print("gradcheck:", "all passed" if failures == 0 else f"{failures} FAILED")
    return 0 if failures == 0 else 1


def cmd_ablate(args) -> int:
    grid = load_grid(args.grid)
    model_cfg = _model_config(args)
    train_cfg = _train_config(args)
    lines, all_ok = run_ablation(grid, model_cfg, train_cfg)
    text = "\n".join(lines)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0 if all_ok else 1


def cmd_corners(args) -> int:
    params = DetectorParams(
        kind=args.detector,
        quality_level=args.quality_level,
        min_distance=args.min_distance,
        max_corners=args.max_corners,
    )
    image = read_png(args.image)
    cmap = detect_corners(image, params)
    base, _ = os.path.splitext(args.out if args.out else args.image)
    pgm_path = base + ".corners.pgm"
    txt_path = base + ".corners.txt"
    write_pgm(pgm_path, cmap.mask)
    with open(txt_path, "w", encoding="utf-8") as fh:
        for r, c, v in cmap.corners:
            fh.write(f"{r} {c} {v:.17g}\n")
    print(f"{cmap.count()} corners -> {pgm_path}, {txt_path}")
    return 0


def cmd_synth(args) -> int:
    lexicon = load_lexicon(args.lexicon)
    manifest = write_synthetic_dataset(args.out, count=args.count, seed=args.seed, lexicon=lexicon)
    print(f"wrote {args.count} samples; manifest: {manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cornertext",
        description="Corner-guided transformer text recognizer (desk scale)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a manifest or synthetic data")
    p.add_argument("--model-config", help="JSON file of ModelConfig fields")
    p.add_argument("--train-config", help="JSON file of TrainConfig fields")
    p.add_argument("--data", required=True, help="manifest path or synth:count=N,seed=S")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--fusion-mode", help="override the fusion strategy")
    p.add_argument("--detector", default="shi_tomasi", choices=["shi_tomasi", "harris"])
    p.add_argument("--cc-include-pad", action="store_true",
                   help="let PAD positions join the contrastive loss")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--detector", default="shi_tomasi", choices=["shi_tomasi", "harris"])
    p.add_argument("--case-sensitive", action="store_true")
    p.add_argument("--report-file", help="also write key-value metrics here")
    p.add_argument("--dump-features", help="write per-character projected features here")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the gradients")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("ablate", help="run a fusion/detector/loss ablation grid")
    p.add_argument("--grid", required=True, help="JSON grid document")
    p.add_argument("--model-config")
    p.add_argument("--train-config")
    p.add_argument("--out", help="write the table here as TSV")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("corners", help="detect corners in a PNG")
    p.add_argument("--image", required=True)
    p.add_argument("--out", help="output basename (defaults to the image path)")
    p.add_argument("--detector", default="shi_tomasi", choices=["shi_tomasi", "harris"])
    p.add_argument("--quality-level", type=float, default=0.01)
    p.add_argument("--min-distance", type=int, default=3)
    p.add_argument("--max-corners", type=int, default=512)
    p.set_defaults(fn=cmd_corners)

    p = sub.add_parser("synth", help="render a synthetic word-image dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--lexicon", help="word list file (default: embedded 1000 words)")
    p.set_defaults(fn=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
