"""Input assembly: normalization, index tables, batches, ablation masks.

Ablation operators act here, at input-assembly time, never by changing
the architecture: dropped edge types empty the corresponding neighbor
slots, dropped feature granularities zero blocks of the transferred
neighbors' raw vectors.  Parameter shapes are identical across all
ablation rows, so rows trained with a shared seed start from identical
initializations.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from .data import ImpressionLog, UserRecord, VideoRecord
from .params import NetConfig
from .sampling import ComputationGraph
from .validation import ValidationError, require
from .vocab import Vocabulary

_COUNT_STATS = (1, 2, 3)  # pv, ipv, clk get log1p before scaling


@dataclass(frozen=True)
class AblationMask:
    """Composable input-level feature/graph/model drops.

    ``drop_repr`` removes transferred id representations, ``drop_stats``
    removes transferred statistics, the graph flags remove edge types,
    and ``drop_h2``/``drop_h3`` silence a whole transfer head.  Flags
    are independent; composition is set union, so application order can
    never matter.
    """

    drop_repr: bool = False
    drop_stats: bool = False
    drop_physical: bool = False
    drop_author: bool = False
    drop_product: bool = False
    drop_semantic: bool = False
    drop_h2: bool = False
    drop_h3: bool = False

    @property
    def author_dropped(self) -> bool:
        return self.drop_author or self.drop_physical

    @property
    def product_dropped(self) -> bool:
        return self.drop_product or self.drop_physical

    def union(self, other: "AblationMask") -> "AblationMask":
        return AblationMask(
            **{f.name: getattr(self, f.name) or getattr(other, f.name) for f in fields(self)}
        )

    def as_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in fields(self) if getattr(self, f.name))

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "AblationMask":
        valid = {f.name for f in fields(cls)}
        flags = {}
        for name in names:
            key = name if name.startswith("drop_") else f"drop_{name}"
            if key not in valid:
                raise ValidationError(f"unknown ablation flag {name!r}")
            flags[key] = True
        return cls(**flags)


BASE_MODEL_MASK = AblationMask(drop_h2=True, drop_h3=True)


class StatNormalizer:
    """Counts via log1p then affine scaling; ctr and stay-time z-scored.

    Fit once on the training corpus and frozen into the checkpoint so
    training and serving featurize identically.
    """

    def __init__(self, mean: np.ndarray, std: np.ndarray) -> None:
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        require(self.mean.shape == (5,) and self.std.shape == (5,), "normalizer needs 5 stats")
        require(bool(np.all(self.std > 0)), "normalizer std must be positive")

    @staticmethod
    def _pre(stats: np.ndarray) -> np.ndarray:
        out = np.asarray(stats, dtype=np.float64).copy()
        out[..., _COUNT_STATS] = np.log1p(out[..., _COUNT_STATS])
        return out

    @classmethod
    def fit(cls, stats: np.ndarray) -> "StatNormalizer":
        pre = cls._pre(stats)
        return cls(pre.mean(axis=0), np.maximum(pre.std(axis=0), 1e-6))

    def apply(self, stats: np.ndarray) -> np.ndarray:
        return (self._pre(stats) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, state: dict) -> "StatNormalizer":
        return cls(np.array(state["mean"]), np.array(state["std"]))


class FeatureTables:
    """Static per-entity index/value arrays, row = vocabulary index (0 = OOV)."""

    def __init__(
        self,
        cfg: NetConfig,
        vocab: Vocabulary,
        normalizer: StatNormalizer,
        videos: Sequence[VideoRecord],
        users: Sequence[UserRecord],
    ) -> None:
        self.cfg = cfg
        self.vocab = vocab
        self.normalizer = normalizer
        nv = cfg.n_videos
        self.product_idx = np.zeros(nv, dtype=np.int64)
        self.author_idx = np.zeros(nv, dtype=np.int64)
        self.category_idx = np.zeros(nv, dtype=np.int64)
        self.tokens = np.zeros((nv, cfg.title_cap), dtype=np.int64)
        self.token_cnt = np.zeros(nv, dtype=np.int64)
        self.stats_norm = np.zeros((nv, 5), dtype=np.float64)
        self.release_ts = np.zeros(nv, dtype=np.int64)
        for rec in videos:
            row = vocab.require("video", rec.video_id)
            self.product_idx[row] = vocab.lookup("product", rec.product_id)
            self.author_idx[row] = vocab.lookup("author", rec.author_id)
            self.category_idx[row] = vocab.lookup("category", rec.category_id)
            toks = [vocab.lookup("token", t) for t in rec.title_tokens[: cfg.title_cap]]
            self.tokens[row, : len(toks)] = toks
            self.token_cnt[row] = len(toks)
            self.stats_norm[row] = normalizer.apply(np.array(rec.stats.as_tuple()))
            self.release_ts[row] = rec.release_ts
        self.user_feat = np.zeros((cfg.n_users, 2), dtype=np.float64)
        for user in users:
            self.user_feat[vocab.require("user", user.user_id)] = user.features


@dataclass
class Batch:
    """Index tensors for one forward/backward pass."""

    tgt: np.ndarray  # (B,) video rows
    user: np.ndarray  # (B,) user rows
    user_num: np.ndarray  # (B, 2)
    beh: np.ndarray  # (B, H)
    beh_mask: np.ndarray  # (B, H) bool
    e2: np.ndarray  # (B, 3K)
    e2_mask: np.ndarray
    e3: dict[str, np.ndarray]  # path -> (B, K)
    e3_mask: dict[str, np.ndarray]
    y: np.ndarray  # (B,)
    zero_repr: bool = False
    zero_stats: bool = False

    def __len__(self) -> int:
        return len(self.tgt)

    def view(self, idx: np.ndarray) -> "Batch":
        return Batch(
            tgt=self.tgt[idx],
            user=self.user[idx],
            user_num=self.user_num[idx],
            beh=self.beh[idx],
            beh_mask=self.beh_mask[idx],
            e2=self.e2[idx],
            e2_mask=self.e2_mask[idx],
            e3={k: v[idx] for k, v in self.e3.items()},
            e3_mask={k: v[idx] for k, v in self.e3_mask.items()},
            y=self.y[idx],
            zero_repr=self.zero_repr,
            zero_stats=self.zero_stats,
        )


NeighborLookup = Callable[[str], ComputationGraph | None]


def assemble(
    tables: FeatureTables,
    impressions: Sequence[ImpressionLog],
    neighbor_lookup: NeighborLookup,
    ablation: AblationMask | None = None,
) -> Batch:
    """Build the full index tensors for a list of impressions.

    Neighbor slots obey the ablation mask; a target missing from the
    neighbor store simply gets empty neighbor lists.
    """
    mask = ablation or AblationMask()
    cfg = tables.cfg
    vocab = tables.vocab
    n = len(impressions)
    K, H = cfg.neighbor_cap, cfg.behavior_cap
    batch = Batch(
        tgt=np.zeros(n, dtype=np.int64),
        user=np.zeros(n, dtype=np.int64),
        user_num=np.zeros((n, 2), dtype=np.float64),
        beh=np.zeros((n, H), dtype=np.int64),
        beh_mask=np.zeros((n, H), dtype=bool),
        e2=np.zeros((n, 3 * K), dtype=np.int64),
        e2_mask=np.zeros((n, 3 * K), dtype=bool),
        e3={p: np.zeros((n, K), dtype=np.int64) for p in ("a", "p", "s")},
        e3_mask={p: np.zeros((n, K), dtype=bool) for p in ("a", "p", "s")},
        y=np.zeros(n, dtype=np.float64),
        zero_repr=mask.drop_repr,
        zero_stats=mask.drop_stats,
    )
    path_enabled = {
        "a": not (mask.author_dropped or mask.drop_h3),
        "p": not (mask.product_dropped or mask.drop_h3),
        "s": not (mask.drop_semantic or mask.drop_h3),
    }
    e2_path_enabled = {
        "a": not (mask.author_dropped or mask.drop_h2 or mask.drop_repr),
        "p": not (mask.product_dropped or mask.drop_h2 or mask.drop_repr),
        "s": not (mask.drop_semantic or mask.drop_h2 or mask.drop_repr),
    }
    for i, imp in enumerate(impressions):
        batch.tgt[i] = vocab.lookup("video", imp.video_id)
        user_row = vocab.lookup("user", imp.user_id)
        batch.user[i] = user_row
        batch.user_num[i] = tables.user_feat[user_row]
        beh_rows = [vocab.lookup("video", b) for b in imp.behaviors[:H]]
        batch.beh[i, : len(beh_rows)] = beh_rows
        batch.beh_mask[i, : len(beh_rows)] = True
        batch.y[i] = imp.label
        cg = neighbor_lookup(imp.video_id)
        if cg is None:
            continue
        seen: list[int] = []
        seen_set: set[int] = set()
        for path in ("a", "p", "s"):
            ids = cg.neighbor_ids(path)[:K]
            if path_enabled[path] and ids:
                batch.e3[path][i, : len(ids)] = ids
                batch.e3_mask[path][i, : len(ids)] = True
            if e2_path_enabled[path]:
                for v in ids:
                    if v not in seen_set:
                        seen_set.add(v)
                        seen.append(v)
        seen = seen[: 3 * K]
        if seen:
            batch.e2[i, : len(seen)] = seen
            batch.e2_mask[i, : len(seen)] = True
    return batch


def preload_store(store) -> NeighborLookup:
    cache = {rec.target: rec for rec in store}
    vocab = store.vocab

    def lookup(external_id: str) -> ComputationGraph | None:
        return cache.get(vocab.lookup("video", external_id))

    return lookup
