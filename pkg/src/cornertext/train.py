"""Optimization loop: Adam updates, lr decay, checkpointing, deterministic runs.

Every random draw is a pure function of (seed, epoch, index), so a run is
reproducible bit for bit and an interrupted run resumed from an epoch
checkpoint retraces the identical parameter trajectory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .config import ModelConfig, TrainConfig
from .corners import DetectorParams, detect_corners
from .data import AugmentPolicy, Charset, Sample, augment, make_batch
from .losses import cc_loss, ce_loss, total_loss
from .metrics import EvalReport, FeatureDump, char_prf, word_accuracy
from .model import CornerGuidedTransformer
from .tensor import Tensor
from .validation import NumericError, ParameterError


class Adam:
    """Bias-corrected Adam over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in parameter {name!r}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name in self.params:
            out[f"adam.m.{name}"] = self.m[name]
            out[f"adam.v.{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], step_count: int) -> None:
        for name in self.params:
            self.m[name] = arrays[f"adam.m.{name}"].copy()
            self.v[name] = arrays[f"adam.v.{name}"].copy()
        self.step_count = step_count


def clip_global_norm(params: dict[str, Tensor], cap: float) -> float:
    """Scale all gradients so the global L2 norm is at most ``cap``."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if norm > cap and norm > 0.0:
        scale = cap / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm


@dataclass
class TrainResult:
    model: CornerGuidedTransformer
    steps: int
    log_lines: list
    checkpoint_path: str | None
    eval_history: list = field(default_factory=list)
    stopped_early: bool = False


_RNG_ORDER, _RNG_AUGMENT = 1, 2  # stream tags keeping the seed spaces disjoint


def _epoch_order(seed: int, epoch: int, n: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence((seed, _RNG_ORDER, epoch)))
    return rng.permutation(n)


def _augment_sample(sample: Sample, seed: int, epoch: int, index: int,
                    detector: DetectorParams) -> Sample:
    rng = np.random.default_rng(np.random.SeedSequence((seed, _RNG_AUGMENT, epoch, index)))
    image = augment(sample.image, rng, AugmentPolicy())
    cmap = detect_corners(image, detector)
    return Sample(image=image, text=sample.text, corner_map=cmap.mask[None].astype(np.float64))


def compute_losses(model: CornerGuidedTransformer, batch, cfg: TrainConfig):
    """Forward pass plus the joint objective for one batch.

    Unless PAD joins the contrastive loss, decoding is truncated to the
    longest label in the batch: positions past every EOS are PAD, masked out
    of both losses, and causality keeps the kept positions bit-identical.
    """
    m = batch.targets.shape[1]
    if not cfg.cc_include_pad:
        m = int(batch.ce_mask.sum(axis=1).max())
    out = model.forward(batch.images, batch.corner_maps, batch.decoder_input[:, :m])
    ce = ce_loss(out.logits, batch.targets[:, :m], batch.ce_mask[:, :m])
    cc = None
    if cfg.cc_weight > 0.0:
        feats = out.projected.reshape(-1, model.config.proj_out)
        labels = batch.targets[:, :m].reshape(-1)
        valid = (
            np.ones(labels.shape, dtype=bool)
            if cfg.cc_include_pad
            else batch.ce_mask[:, :m].reshape(-1) > 0.0
        )
        cc = cc_loss(feats, labels, valid=valid, temperature=cfg.temperature,
                     raw_sum=cfg.cc_raw_sum)
    return total_loss(ce, cc, cfg.cc_weight, cfg.temperature)


def evaluate_model(
    model: CornerGuidedTransformer,
    dataset,
    charset: Charset | None = None,
    batch_size: int = 32,
    case_sensitive: bool = False,
    collect_features: bool = False,
) -> tuple[EvalReport, FeatureDump | None]:
    """Greedy-decode the dataset; optionally dump per-character features.

    The dump rows come from a teacher-forced pass so positions align with the
    ground truth; one row per real character (EOS and PAD excluded).
    """
    charset = charset or Charset()
    preds: list[str] = []
    gts: list[str] = []
    dump = FeatureDump() if collect_features else None
    for start in range(0, len(dataset), batch_size):
        samples = [dataset[i] for i in range(start, min(start + batch_size, len(dataset)))]
        batch = make_batch(samples, charset, model.config.max_len)
        batch_preds = model.greedy_decode(batch.images, batch.corner_maps, charset)
        preds.extend(batch_preds)
        gts.extend(batch.texts)
        if collect_features:
            with T.no_grad():
                out = model.forward(batch.images, batch.corner_maps, batch.decoder_input)
            pred_ids = out.logits.data.argmax(axis=-1)
            feats = out.projected.data
            for b in range(len(samples)):
                text = charset.normalize(samples[b].text)
                for pos, gt_ch in enumerate(text):
                    tok = int(pred_ids[b, pos])
                    pred_ch = charset.id_to_char(tok) if tok >= 3 else "_"
                    dump.add(start + b, pos, gt_ch, pred_ch, feats[b, pos])
    recall, precision = char_prf(preds, gts, case_sensitive)
    report = EvalReport(
        word_acc=word_accuracy(preds, gts, case_sensitive),
        char_recall=recall,
        char_precision=precision,
        n_samples=len(gts),
    )
    return report, dump


def save_training_checkpoint(path, model: CornerGuidedTransformer, optimizer: Adam,
                             epoch: int, step: int) -> None:
    arrays = dict(model.parameters())
    arrays.update(optimizer.state_arrays())
    meta = {f"config.{k}": v for k, v in model.config.to_dict().items()}
    meta.update({"train.epoch": epoch, "train.step": step,
                 "train.adam_step": optimizer.step_count})
    T.save_checkpoint(path, arrays, meta)


def load_training_checkpoint(path, model: CornerGuidedTransformer, optimizer: Adam):
    arrays, meta = T.load_checkpoint(path)
    params = {k: v for k, v in arrays.items() if not k.startswith("adam.")}
    model.load_parameters(params)
    optimizer.load_state_arrays(arrays, int(meta["train.adam_step"]))
    return int(meta["train.epoch"]), int(meta["train.step"])


def train(
    model: CornerGuidedTransformer,
    dataset,
    cfg: TrainConfig,
    out_dir=None,
    charset: Charset | None = None,
    detector: DetectorParams | None = None,
    eval_every: int = 0,
    eval_after: int = 0,
    target_word_acc: float | None = None,
    resume_from=None,
    log_fn=None,
) -> TrainResult:
    """Run the optimization loop; returns the trained model plus the step log.

    ``eval_every``/``target_word_acc`` enable periodic greedy evaluation on
    the training set with early stop once the target is reached (skipped
    before step ``eval_after``). ``resume_from`` restores parameters, Adam
    state and position from a checkpoint.
    """
    if len(dataset) == 0:
        raise ParameterError("dataset is empty")
    charset = charset or Charset()
    detector = detector or DetectorParams()
    params = model.parameters()
    optimizer = Adam(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)

    start_epoch, step = 0, 0
    if resume_from is not None:
        epoch_done, step = load_training_checkpoint(resume_from, model, optimizer)
        start_epoch = epoch_done + 1

    samples = None
    if cfg.cache_corner_maps and not cfg.augment:
        samples = [dataset[i] for i in range(len(dataset))]

    log_lines: list[str] = []
    eval_history: list[tuple[int, float]] = []
    checkpoint_path = None
    metrics_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        checkpoint_path = os.path.join(out_dir, "checkpoint.ckpt")
        metrics_path = os.path.join(out_dir, "metrics.tsv")
        if resume_from is None and os.path.exists(metrics_path):
            os.remove(metrics_path)

    def emit(line: str) -> None:
        log_lines.append(line)
        if metrics_path is not None:
            with open(metrics_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        if log_fn is not None:
            log_fn(line)

    stopped = False
    for epoch in range(start_epoch, cfg.epochs):
        optimizer.lr = cfg.lr if epoch < cfg.decay_epoch else cfg.lr * cfg.lr_decay_factor
        order = _epoch_order(cfg.seed, epoch, len(dataset))
        for lo in range(0, len(order), cfg.batch_size):
            idxs = order[lo : lo + cfg.batch_size]
            batch_samples = []
            for i in idxs:
                s = samples[i] if samples is not None else dataset[int(i)]
                if cfg.augment:
                    s = _augment_sample(s, cfg.seed, epoch, int(i), detector)
                batch_samples.append(s)
            batch = make_batch(batch_samples, charset, model.config.max_len)

            optimizer.zero_grad()
            total, report = compute_losses(model, batch, cfg)
            if not np.isfinite(report.total):
                raise NumericError(f"non-finite loss at step {step}: {report.total}")
            T.backward(total)
            if cfg.grad_clip is not None:
                clip_global_norm(params, cfg.grad_clip)
            optimizer.step()
            step += 1
            emit(f"{step}\t{report.ce:.17g}\t{report.cc:.17g}\t{report.total:.17g}")

            if eval_every and step >= eval_after and step % eval_every == 0:
                acc = evaluate_model(model, dataset, charset,
                                     batch_size=cfg.batch_size)[0].word_acc
                eval_history.append((step, acc))
                if target_word_acc is not None and acc >= target_word_acc:
                    stopped = True
                    break
            if cfg.max_steps is not None and step >= cfg.max_steps:
                stopped = True
                break
        if checkpoint_path is not None:
            save_training_checkpoint(checkpoint_path, model, optimizer, epoch, step)
        if stopped:
            break

    return TrainResult(
        model=model,
        steps=step,
        log_lines=log_lines,
        checkpoint_path=checkpoint_path,
        eval_history=eval_history,
        stopped_early=stopped,
    )
