"""Ranking metrics and the ablation experiment harness.

AUC is the probability a random positive outranks a random negative,
ties credited half, computed with a sort-based rank statistic.
Relative improvement is measured against the 0.5 random-guess floor.

Ablation rows are input masks over one fixed architecture, so every row
shares parameter shapes and, with a shared seed, identical
initializations.  The report carries relative improvement against both
the unablated model and the base (transfer-free) model, since either
reference is a reasonable convention.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ImpressionLog
from .features import BASE_MODEL_MASK, AblationMask, FeatureTables, NeighborLookup, assemble
from .network import forward
from .params import Checkpoint
from .training import TrainConfig, finetune, pretrain
from .validation import ValidationError, require

ABLATION_OPERATORS: dict[str, AblationMask] = {
    "base": BASE_MODEL_MASK,
    "repr-": AblationMask(drop_repr=True),
    "stats-": AblationMask(drop_stats=True),
    "phys-": AblationMask(drop_physical=True),
    "phys_author-": AblationMask(drop_author=True),
    "phys_product-": AblationMask(drop_product=True),
    "sem-": AblationMask(drop_semantic=True),
    "h2-": AblationMask(drop_h2=True),
    "h3-": AblationMask(drop_h3=True),
    "full": AblationMask(),
}


def compute_auc(scores, labels) -> float:
    """Sort-based AUC with average ranks for tied scores."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    require(scores.shape == labels.shape and scores.ndim == 1, "scores/labels shape mismatch")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUC needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    is_start = np.empty(len(scores), dtype=bool)
    is_start[0] = True
    is_start[1:] = sorted_scores[1:] != sorted_scores[:-1]
    group = np.cumsum(is_start) - 1
    starts = np.flatnonzero(is_start)
    ends = np.append(starts[1:], len(scores))
    avg_rank = (starts + 1 + ends) / 2.0  # 1-based ranks, averaged within ties
    ranks = np.empty(len(scores), dtype=np.float64)
    ranks[order] = avg_rank[group]
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def rela_impr(auc_measured: float, auc_base: float) -> float:
    """((auc_m - 0.5) / (auc_b - 0.5) - 1) * 100, in percent."""
    require(auc_base != 0.5, "relative improvement undefined for a random-guess base")
    return ((auc_measured - 0.5) / (auc_base - 0.5) - 1.0) * 100.0


def score_impressions(
    checkpoint: Checkpoint,
    tables: FeatureTables,
    impressions: Sequence[ImpressionLog],
    lookup: NeighborLookup,
    ablation: AblationMask | None = None,
    chunk: int = 4096,
) -> np.ndarray:
    """Batched probabilities for an impression list."""
    scores = np.empty(len(impressions), dtype=np.float64)
    for start in range(0, len(impressions), chunk):
        part = impressions[start : start + chunk]
        batch = assemble(tables, part, lookup, ablation)
        _, probs, _ = forward(checkpoint.params, tables, batch)
        scores[start : start + len(part)] = probs
    return scores


def evaluate_auc(
    checkpoint: Checkpoint,
    tables: FeatureTables,
    impressions: Sequence[ImpressionLog],
    lookup: NeighborLookup,
    ablation: AblationMask | None = None,
) -> float:
    scores = score_impressions(checkpoint, tables, impressions, lookup, ablation)
    return compute_auc(scores, np.array([imp.label for imp in impressions]))


@dataclass
class AblationRow:
    operator: str
    auc: float
    rela_impr_vs_full: float
    rela_impr_vs_base: float


def run_ablation(
    tables: FeatureTables,
    lookup: NeighborLookup,
    build_ts: int,
    d_full: Sequence[ImpressionLog],
    d_cold: Sequence[ImpressionLog],
    d_test: Sequence[ImpressionLog],
    config: TrainConfig,
    operators: Sequence[str] | None = None,
) -> list[AblationRow]:
    """Train one model per ablation operator (shared seed) and report AUCs.

    ``base`` and ``full`` are always included since both serve as
    relative-improvement references.
    """
    names = list(operators or ABLATION_OPERATORS)
    for required in ("base", "full"):
        if required not in names:
            names.append(required)
    unknown = [n for n in names if n not in ABLATION_OPERATORS]
    require(not unknown, f"unknown ablation operators: {unknown}")
    aucs: dict[str, float] = {}
    for name in names:
        mask = ABLATION_OPERATORS[name]
        row_config = replace(config, ablation=mask)
        pre, _ = pretrain(d_full, tables, lookup, row_config, build_ts)
        tuned, _ = finetune(pre, d_cold, tables, lookup, row_config, build_ts)
        aucs[name] = evaluate_auc(tuned, tables, d_test, lookup, mask)
    rows = []
    for name in names:
        rows.append(
            AblationRow(
                operator=name,
                auc=aucs[name],
                rela_impr_vs_full=rela_impr(aucs[name], aucs["full"]),
                rela_impr_vs_base=rela_impr(aucs[name], aucs["base"]),
            )
        )
    return rows


def write_ablation_report(path: Path, rows: Sequence[AblationRow]) -> None:
    lines = ["#schema=ablation.v1", "operator\tauc\trela_impr_vs_full\trela_impr_vs_base"]
    for row in rows:
        lines.append(
            f"{row.operator}\t{row.auc:.6f}\t{row.rela_impr_vs_full:+.2f}%"
            f"\t{row.rela_impr_vs_base:+.2f}%"
        )
    Path(path).write_text("\n".join(lines) + "\n")
