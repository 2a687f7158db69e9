"""Training objectives: masked sequence cross-entropy, character contrastive
loss over unit-norm projected features, and their weighted sum.

The contrastive term treats every same-class character in the batch as a
positive and every other character as a negative; anchors without positives
contribute nothing. By default the anchor sum is divided by the number of
contributing anchors so the loss weight keeps one meaning across batch
sizes; ``raw_sum=True`` restores the plain sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor
from .validation import ContractError, ParameterError


@dataclass
class LossReport:
    ce: float
    cc: float
    total: float
    cc_weight: float
    temperature: float


def ce_loss(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean negative target log-probability over masked positions.

    ``mask`` marks the positions that count (the characters plus the EOS);
    PAD positions must be zero.
    """
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=np.float64)
    if logits.shape[:-1] != targets.shape or targets.shape != mask.shape:
        raise ContractError(
            f"ce_loss shape mismatch: logits {logits.shape}, targets "
            f"{targets.shape}, mask {mask.shape}"
        )
    count = mask.sum()
    if count <= 0:
        raise ContractError("ce_loss mask selects no positions")
    logp = T.log_softmax(logits, axis=-1)
    picked = T.take_along_last(logp, targets)
    return -(picked * mask).sum() / count


def cc_loss(
    features: Tensor,
    labels: np.ndarray,
    valid: np.ndarray | None = None,
    temperature: float = 0.1,
    raw_sum: bool = False,
) -> Tensor:
    """Character contrastive loss over (n, d) unit-norm feature rows.

    For each anchor i with positive set P(i) (same label, other index) the
    term is -(1/|P(i)|) sum_{p in P(i)} log[ exp(s_ip) / sum_{j != i} exp(s_ij) ]
    with s_ij = x_i . x_j / temperature, log-sum-exp stabilized. Rows where
    ``valid`` is false, and zero-norm rows, never participate.
    """
    if temperature <= 0:
        raise ParameterError(f"temperature must be > 0, got {temperature}")
    labels = np.asarray(labels).reshape(-1)
    n = labels.shape[0]
    if features.shape[0] != n:
        raise ContractError(
            f"cc_loss got {features.shape[0]} feature rows but {n} labels"
        )
    keep = np.ones(n, dtype=bool) if valid is None else np.asarray(valid, dtype=bool).copy()
    norms = np.sqrt((features.data * features.data).sum(axis=-1))
    keep &= norms > 1e-9  # eps-guarded zero projections are excluded
    idx = np.nonzero(keep)[0]
    if len(idx) < 2:
        return Tensor(0.0)

    lab = labels[idx]
    same = lab[:, None] == lab[None, :]
    off_diag = ~np.eye(len(idx), dtype=bool)
    pos_mask = (same & off_diag).astype(np.float64)
    n_pos = pos_mask.sum(axis=1)
    anchors = n_pos > 0
    n_anchors = int(anchors.sum())
    if n_anchors == 0:
        return Tensor(0.0)

    sel = T.embedding(features, idx)  # row gather keeps the gradient path
    sims = T.matmul(sel, sel.transpose(1, 0)) * (1.0 / temperature)
    # Row max over the off-diagonal, detached: shifts cancel exactly in the
    # ratio, so the value and gradient stay exact while exp stays bounded.
    shift = np.where(off_diag, sims.data, -np.inf).max(axis=1, keepdims=True)
    z = T.exp(sims - shift) * off_diag.astype(np.float64)
    log_denom = T.log(z.sum(axis=1, keepdims=True)) + shift
    mean_pos = (sims * pos_mask).sum(axis=1, keepdims=True) * (
        1.0 / np.maximum(n_pos, 1.0)[:, None]
    )
    per_anchor = (log_denom - mean_pos).reshape(len(idx)) * anchors.astype(np.float64)
    total = per_anchor.sum()
    return total if raw_sum else total / n_anchors


def total_loss(ce: Tensor, cc: Tensor | None, cc_weight: float,
               temperature: float) -> tuple[Tensor, LossReport]:
    """Joint objective total = ce + weight * cc, plus a plain-float report."""
    if cc_weight < 0:
        raise ParameterError(f"cc_weight must be >= 0, got {cc_weight}")
    if cc is None or cc_weight == 0.0:
        total = ce
        cc_val = 0.0 if cc is None else float(cc.data)
    else:
        total = ce + cc_weight * cc
        cc_val = float(cc.data)
    report = LossReport(
        ce=float(ce.data),
        cc=cc_val,
        total=float(ce.data) + cc_weight * cc_val,
        cc_weight=cc_weight,
        temperature=temperature,
    )
    return total, report
