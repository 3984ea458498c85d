"""Multi-label evaluation: macro/micro AUC, macro/micro F1, precision@K."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MetricsError(Exception):
    pass


def _rank_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with ties counted one half, via average ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise MetricsError("AUC undefined: needs both a positive and a negative")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    # average rank within each tie group
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg)


def macro_auc(scores: np.ndarray, labels: np.ndarray) -> tuple[float, int]:
    """Mean per-code AUC over codes that have both classes.

    Returns (auc, number of skipped degenerate codes).
    """
    scores, labels = _validate(scores, labels)
    values = []
    skipped = 0
    for j in range(scores.shape[1]):
        col = labels[:, j]
        if col.min() == col.max():
            skipped += 1
            continue
        values.append(_rank_auc(scores[:, j], col))
    if not values:
        raise MetricsError("macro AUC undefined: every code is single-class")
    return float(np.mean(values)), skipped


def micro_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    scores, labels = _validate(scores, labels)
    return _rank_auc(scores.ravel(), labels.ravel())


def f1_scores(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5
              ) -> tuple[float, float]:
    """(macro F1, micro F1) at a fixed threshold; per-code 0/0 counts as 0."""
    scores, labels = _validate(scores, labels)
    pred = scores >= threshold
    gold = labels == 1
    tp = (pred & gold).sum(axis=0).astype(np.float64)
    fp = (pred & ~gold).sum(axis=0).astype(np.float64)
    fn = (~pred & gold).sum(axis=0).astype(np.float64)
    denom = 2 * tp + fp + fn
    per_code = np.divide(2 * tp, denom, out=np.zeros_like(denom), where=denom > 0)
    macro = float(per_code.mean())
    total = 2 * tp.sum() + fp.sum() + fn.sum()
    micro = float(2 * tp.sum() / total) if total > 0 else 0.0
    return macro, micro


def precision_at_k(scores: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Fraction of the k top-scored codes per note that are gold, averaged
    over notes. Ties break toward the lower code index."""
    scores, labels = _validate(scores, labels)
    n_notes, n_codes = scores.shape
    if k > n_codes:
        raise MetricsError(f"k={k} exceeds code count {n_codes}")
    hits = np.empty(n_notes, dtype=np.float64)
    cols = np.arange(n_codes)
    for i in range(n_notes):
        order = np.lexsort((cols, -scores[i]))[:k]
        hits[i] = labels[i, order].sum() / k
    return float(hits.mean())


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise MetricsError(
            f"scores {scores.shape} and labels {labels.shape} must be equal 2-d shapes"
        )
    if not np.isin(labels, (0, 1)).all():
        raise MetricsError("labels must be binary")
    return scores, labels


@dataclass
class MetricReport:
    macro_auc: float
    micro_auc: float
    macro_f1: float
    micro_f1: float
    p_at: dict[int, float] = field(default_factory=dict)
    skipped_auc_codes: int = 0

    def as_dict(self) -> dict:
        out = {
            "macro_auc": self.macro_auc,
            "micro_auc": self.micro_auc,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "skipped_auc_codes": self.skipped_auc_codes,
        }
        for k in sorted(self.p_at):
            out[f"p_at_{k}"] = self.p_at[k]
        return out

    def format_table(self) -> str:
        headers = ["Macro AUC", "Micro AUC", "Macro F1", "Micro F1"]
        values = [self.macro_auc, self.micro_auc, self.macro_f1, self.micro_f1]
        for k in sorted(self.p_at):
            headers.append(f"P@{k}")
            values.append(self.p_at[k])
        head = "  ".join(f"{h:>9s}" for h in headers)
        row = "  ".join(f"{v:9.4f}" for v in values)
        return head + "\n" + row


def evaluate_batch(scores: np.ndarray, labels: np.ndarray,
                   p_at_ks: tuple[int, ...] = (5, 8, 15)) -> MetricReport:
    scores, labels = _validate(scores, labels)
    m_auc, skipped = macro_auc(scores, labels)
    macro_f1, micro_f1 = f1_scores(scores, labels)
    p_at = {k: precision_at_k(scores, labels, k) for k in p_at_ks
            if k <= scores.shape[1]}
    return MetricReport(
        macro_auc=m_auc,
        micro_auc=micro_auc(scores, labels),
        macro_f1=macro_f1,
        micro_f1=micro_f1,
        p_at=p_at,
        skipped_auc_codes=skipped,
    )
