"""Recognition metrics and feature-cluster statistics.

Word accuracy is exact match after normalization. Character recall and
precision come from a minimum-edit-distance alignment per pair: among all
minimum-cost alignments the one with the most matches is counted (which also
pins the substitution/deletion/insertion counts), then match totals are
normalized by ground-truth and prediction lengths respectively.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import ContractError


def normalize_text(text: str, case_sensitive: bool = False) -> str:
    """Standard evaluation normalization: alphanumeric only, case-folded."""
    if not case_sensitive:
        text = text.lower()
    return "".join(ch for ch in text if ch.isalnum())


@dataclass
class EvalReport:
    word_acc: float
    char_recall: float
    char_precision: float
    n_samples: int

    def __post_init__(self):
        for name in ("word_acc", "char_recall", "char_precision"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractError(f"{name} must be in [0, 1], got {v}")
        if self.n_samples < 1:
            raise ContractError(f"n_samples must be >= 1, got {self.n_samples}")

    def as_tsv(self) -> str:
        return (
            f"{self.word_acc:.6f}\t{self.char_recall:.6f}\t"
            f"{self.char_precision:.6f}\t{self.n_samples}"
        )

    def write_kv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"word_acc {self.word_acc:.17g}\n")
            fh.write(f"char_recall {self.char_recall:.17g}\n")
            fh.write(f"char_precision {self.char_precision:.17g}\n")
            fh.write(f"n_samples {self.n_samples}\n")


def word_accuracy(preds, gts, case_sensitive: bool = False) -> float:
    """Fraction of exact matches after normalization."""
    if len(preds) != len(gts):
        raise ContractError(
            f"prediction/ground-truth length mismatch: {len(preds)} vs {len(gts)}"
        )
    if not gts:
        raise ContractError("empty evaluation corpus")
    hits = sum(
        normalize_text(p, case_sensitive) == normalize_text(g, case_sensitive)
        for p, g in zip(preds, gts)
    )
    return hits / len(gts)


def align_matches(gt: str, pred: str) -> tuple[int, int]:
    """(edit cost, matches) for one pair: max matches among min-cost alignments."""
    n, m = len(gt), len(pred)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    match = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
    for j in range(1, m + 1):
        cost[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            eq = gt[i - 1] == pred[j - 1]
            best = None
            for c, k in (
                (cost[i - 1][j - 1] + (0 if eq else 1), match[i - 1][j - 1] + (1 if eq else 0)),
                (cost[i - 1][j] + 1, match[i - 1][j]),
                (cost[i][j - 1] + 1, match[i][j - 1]),
            ):
                if best is None or c < best[0] or (c == best[0] and k > best[1]):
                    best = (c, k)
            cost[i][j], match[i][j] = best
    return cost[n][m], match[n][m]


def char_prf(preds, gts, case_sensitive: bool = False) -> tuple[float, float]:
    """(recall, precision) of aligned character matches over the whole corpus."""
    if len(preds) != len(gts):
        raise ContractError(
            f"prediction/ground-truth length mismatch: {len(preds)} vs {len(gts)}"
        )
    if not gts:
        raise ContractError("empty evaluation corpus")
    total_matches = 0
    total_gt = 0
    total_pred = 0
    for p, g in zip(preds, gts):
        pn = normalize_text(p, case_sensitive)
        gn = normalize_text(g, case_sensitive)
        _, matches = align_matches(gn, pn)
        total_matches += matches
        total_gt += len(gn)
        total_pred += len(pn)
    if total_gt == 0:
        raise ContractError("ground-truth corpus has no characters after normalization")
    recall = total_matches / total_gt
    precision = total_matches / total_pred if total_pred else 0.0
    return recall, precision


# -- feature dumps ------------------------------------------------------------------


@dataclass
class FeatureDump:
    """One row per real character position of an evaluated sample."""

    sample_ids: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    gt_chars: list = field(default_factory=list)
    pred_chars: list = field(default_factory=list)
    features: list = field(default_factory=list)  # unit-norm vectors

    def add(self, sample_id, position, gt_char, pred_char, vector) -> None:
        self.sample_ids.append(int(sample_id))
        self.positions.append(int(position))
        self.gt_chars.append(gt_char)
        self.pred_chars.append(pred_char)
        self.features.append(np.asarray(vector, dtype=np.float64))

    def __len__(self):
        return len(self.features)

    def matrix(self) -> np.ndarray:
        return np.stack(self.features)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for sid, pos, gt, pred, vec in zip(
                self.sample_ids, self.positions, self.gt_chars, self.pred_chars, self.features
            ):
                values = " ".join(f"{v:.17g}" for v in vec)
                fh.write(f"{sid} {pos} {gt} {pred} {values}\n")

    @classmethod
    def read(cls, path) -> "FeatureDump":
        dump = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) < 5:
                    raise ContractError(f"malformed feature dump line: {line!r}")
                dump.add(
                    int(parts[0]),
                    int(parts[1]),
                    parts[2],
                    parts[3],
                    np.array([float(v) for v in parts[4:]]),
                )
        return dump


def cluster_stats(dump: FeatureDump, max_pairs: int = 1_000_000, seed: int = 0):
    """Mean within-class vs across-class cosine similarity over feature pairs.

    Exact over all pairs; above ``max_pairs`` a seeded random subsample of
    pairs is used instead.
    """
    n = len(dump)
    if n < 2:
        raise ContractError("cluster_stats needs at least two feature rows")
    labels = np.array([str(c) for c in dump.gt_chars])
    if len(set(labels.tolist())) < 2:
        raise ContractError("cluster_stats needs at least two classes")
    feats = dump.matrix()
    total_pairs = n * (n - 1) // 2
    if total_pairs <= max_pairs:
        gram = feats @ feats.T
        same = labels[:, None] == labels[None, :]
        iu = np.triu_indices(n, k=1)
        sims = gram[iu]
        same_u = same[iu]
        intra = sims[same_u]
        inter = sims[~same_u]
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n, size=max_pairs)
        keep = i != j
        i, j = i[keep], j[keep]
        sims = np.einsum("nd,nd->n", feats[i], feats[j])
        same_u = labels[i] == labels[j]
        intra = sims[same_u]
        inter = sims[~same_u]
    if intra.size == 0:
        raise ContractError("no same-class pair available for cluster_stats")
    if inter.size == 0:
        raise ContractError("no cross-class pair available for cluster_stats")
    return float(intra.mean()), float(inter.mean())
