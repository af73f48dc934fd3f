"""Two-phase optimization: pretrain on full traffic, fine-tune on cold logs.

Both phases run the same loop: seeded shuffle per epoch, mini-batches,
exact gradients, Adagrad.  Fine-tuning continues every parameter (and
its accumulator) from the pretrained state; nothing is frozen.  Given a
seed, a config and the input files, outputs are bit-identical across
runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import ImpressionLog
from .features import AblationMask, FeatureTables, NeighborLookup, assemble
from .graph import COLD_WINDOW_SECONDS
from .network import loss_and_grads
from .params import Checkpoint, ModelParams
from .validation import ValidationError, require


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 512
    pretrain_epochs: int = 2
    finetune_epochs: int = 2
    adagrad_eps: float = 1e-8
    seed: int = 0
    ablation: AblationMask = field(default_factory=AblationMask)

    def __post_init__(self) -> None:
        require(self.learning_rate >= 0.0, "learning_rate must be >= 0")
        require(self.batch_size >= 1, "batch_size must be >= 1")
        require(self.adagrad_eps > 0.0, "adagrad_eps must be > 0")
        require(self.pretrain_epochs >= 0 and self.finetune_epochs >= 0, "epochs must be >= 0")


def adagrad_step(params: ModelParams, grads: dict, lr: float, eps: float) -> None:
    """acc += g^2; theta -= lr * g / (sqrt(acc) + eps), per coordinate.

    Rows with zero gradient (untouched embedding rows) see an exactly
    zero update.  Non-finite gradients abort the step with diagnostics.
    """
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise ValidationError(f"non-finite gradients, step aborted: {sorted(bad)}")
    for name, g in grads.items():
        acc = params.acc[name]
        acc += g * g
        params.blocks[name] -= lr * g / (np.sqrt(acc) + eps)


def _epoch_rng(seed: int, phase: int, epoch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, phase, epoch))))


def _run_phase(
    params: ModelParams,
    tables: FeatureTables,
    dataset,
    config: TrainConfig,
    epochs: int,
    phase: int,
    step_offset: int = 0,
) -> list[tuple[int, float]]:
    metrics: list[tuple[int, float]] = []
    n = len(dataset)
    step = step_offset
    for epoch in range(epochs):
        order = _epoch_rng(config.seed, phase, epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            batch = dataset.view(order[start : start + config.batch_size])
            loss, grads, _ = loss_and_grads(params, tables, batch)
            adagrad_step(params, grads, config.learning_rate, config.adagrad_eps)
            step += 1
            metrics.append((step, loss))
    return metrics


def _is_cold_target(tables: FeatureTables, imp: ImpressionLog, build_ts: int) -> bool:
    row = tables.vocab.lookup("video", imp.video_id)
    release = int(tables.release_ts[row])
    require(row != 0 and release > 0, f"impression {imp.impression_id}: unknown video {imp.video_id}")
    require(build_ts >= release, f"impression {imp.impression_id}: released after graph build")
    return build_ts - release <= COLD_WINDOW_SECONDS


def pretrain(
    impressions: Sequence[ImpressionLog],
    tables: FeatureTables,
    lookup: NeighborLookup,
    config: TrainConfig,
    build_ts: int,
) -> tuple[Checkpoint, list[tuple[int, float]]]:
    """Train from scratch on the full-traffic log (cold and warm targets)."""
    require(len(impressions) > 0, "pretrain dataset is empty")
    cold_flags = [_is_cold_target(tables, imp, build_ts) for imp in impressions]
    require(any(cold_flags), "pretrain dataset has no cold targets")
    require(not all(cold_flags), "pretrain dataset has no warm targets")
    params = ModelParams.init(tables.cfg, config.seed)
    dataset = assemble(tables, impressions, lookup, config.ablation)
    metrics = _run_phase(params, tables, dataset, config, config.pretrain_epochs, phase=0)
    checkpoint = Checkpoint(
        params=params,
        normalizer_state=tables.normalizer.to_dict(),
        meta={
            "phase": "pretrain",
            "seed": config.seed,
            "ablation": list(config.ablation.as_names()),
            "build_ts": build_ts,
        },
    )
    return checkpoint, metrics


def validate_cold_dataset(
    impressions: Sequence[ImpressionLog],
    tables: FeatureTables,
    build_ts: int,
    full_ids: set[str] | None = None,
) -> None:
    """Cold-phase preconditions: cold targets only, subset of the full log."""
    for imp in impressions:
        if not _is_cold_target(tables, imp, build_ts):
            raise ValidationError(
                f"impression {imp.impression_id}: target {imp.video_id} is warm, "
                "cold fine-tuning rejects it"
            )
        if full_ids is not None and imp.impression_id not in full_ids:
            raise ValidationError(
                f"impression {imp.impression_id} is not a member of the full training log"
            )


def finetune(
    checkpoint: Checkpoint,
    impressions_cold: Sequence[ImpressionLog],
    tables: FeatureTables,
    lookup: NeighborLookup,
    config: TrainConfig,
    build_ts: int,
    full_ids: set[str] | None = None,
) -> tuple[Checkpoint, list[tuple[int, float]]]:
    """Continue training all parameters on cold-target impressions only."""
    require(len(impressions_cold) > 0, "fine-tune dataset is empty")
    require(
        checkpoint.cfg == tables.cfg,
        "checkpoint shape manifest disagrees with the feature tables",
    )
    validate_cold_dataset(impressions_cold, tables, build_ts, full_ids)
    params = checkpoint.params.copy()
    dataset = assemble(tables, impressions_cold, lookup, config.ablation)
    metrics = _run_phase(params, tables, dataset, config, config.finetune_epochs, phase=1)
    tuned = Checkpoint(
        params=params,
        normalizer_state=checkpoint.normalizer_state,
        meta={
            **checkpoint.meta,
            "phase": "finetune",
            "seed": config.seed,
            "ablation": list(config.ablation.as_names()),
        },
    )
    return tuned, metrics


def write_metrics(path: Path, metrics: Sequence[tuple[int, float]]) -> None:
    lines = ["#schema=metrics.v1"]
    lines += [f"{step}\t{loss!r}" for step, loss in metrics]
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics(path: Path) -> list[tuple[int, float]]:
    lines = Path(path).read_text().splitlines()
    require(bool(lines) and lines[0] == "#schema=metrics.v1", f"{path}: bad metrics header")
    out = []
    for line in lines[1:]:
        if line:
            step, loss = line.split("\t")
            out.append((int(step), float(loss)))
    return out
