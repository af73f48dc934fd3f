"""Scikit-learn style facade over the transfer network and trainer.

``GraftCtrClassifier`` follows the estimator protocol (``get_params`` /
``set_params`` / ``fit`` returning ``self`` / ``predict_proba``), so the
model slots into sklearn tooling (cloning, metric functions, simple
pipelines).  Heavyweight world assets (feature tables, neighbor store)
travel as a single constructor parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .data import ImpressionLog, UserRecord, VideoRecord
from .features import AblationMask, FeatureTables, NeighborLookup, StatNormalizer
from .params import Checkpoint, NetConfig
from .training import TrainConfig, finetune, pretrain
from .evaluation import score_impressions
from .validation import ValidationError, require
from .vocab import Vocabulary


@dataclass
class WorldAssets:
    """Everything data-side an estimator needs: features and neighbors."""

    tables: FeatureTables
    lookup: NeighborLookup
    build_ts: int

    @classmethod
    def build(
        cls,
        videos: Sequence[VideoRecord],
        users: Sequence[UserRecord],
        vocab: Vocabulary,
        lookup: NeighborLookup,
        build_ts: int,
        **net_overrides,
    ) -> "WorldAssets":
        for user in users:
            vocab.add("user", user.user_id)
        cfg = NetConfig.from_vocab(vocab, **net_overrides)
        normalizer = StatNormalizer.fit(np.array([v.stats.as_tuple() for v in videos]))
        tables = FeatureTables(cfg, vocab, normalizer, videos, users)
        return cls(tables=tables, lookup=lookup, build_ts=build_ts)


class GraftCtrClassifier(BaseEstimator):
    """Cold-start CTR classifier with graph-guided feature transfer.

    Parameters mirror the training configuration; ``assets`` carries the
    feature tables and pre-sampled neighbor lookup.  ``fit`` pretrains
    on the full log and, when a cold subset is supplied, fine-tunes on
    it.
    """

    def __init__(
        self,
        assets: WorldAssets | None = None,
        learning_rate: float = 1e-4,
        batch_size: int = 512,
        pretrain_epochs: int = 2,
        finetune_epochs: int = 2,
        adagrad_eps: float = 1e-8,
        seed: int = 0,
        ablation: tuple[str, ...] = (),
    ) -> None:
        self.assets = assets
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.pretrain_epochs = pretrain_epochs
        self.finetune_epochs = finetune_epochs
        self.adagrad_eps = adagrad_eps
        self.seed = seed
        self.ablation = ablation

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            pretrain_epochs=self.pretrain_epochs,
            finetune_epochs=self.finetune_epochs,
            adagrad_eps=self.adagrad_eps,
            seed=self.seed,
            ablation=AblationMask.from_names(self.ablation),
        )

    def fit(self, X: Sequence[ImpressionLog], y=None, cold: Sequence[ImpressionLog] | None = None):
        """Pretrain on impressions ``X``; optionally fine-tune on ``cold``.

        Labels live inside the impression records; a separate ``y`` is
        accepted for protocol compatibility and must match if given.
        """
        require(self.assets is not None, "assets must be provided before fit")
        if y is not None:
            labels = np.asarray([imp.label for imp in X])
            if not np.array_equal(np.asarray(y), labels):
                raise ValidationError("y disagrees with impression labels")
        config = self._train_config()
        checkpoint, metrics = pretrain(
            X, self.assets.tables, self.assets.lookup, config, self.assets.build_ts
        )
        if cold is not None:
            checkpoint, more = finetune(
                checkpoint,
                cold,
                self.assets.tables,
                self.assets.lookup,
                config,
                self.assets.build_ts,
                full_ids={imp.impression_id for imp in X},
            )
            metrics = metrics + more
        self.checkpoint_ = checkpoint
        self.metrics_ = metrics
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self) -> Checkpoint:
        if not hasattr(self, "checkpoint_"):
            raise ValidationError("estimator is not fitted")
        return self.checkpoint_

    def predict_proba(self, X: Sequence[ImpressionLog]) -> np.ndarray:
        checkpoint = self._check_fitted()
        p = score_impressions(
            checkpoint,
            self.assets.tables,
            X,
            self.assets.lookup,
            AblationMask.from_names(self.ablation),
        )
        return np.column_stack([1.0 - p, p])

    def predict(self, X: Sequence[ImpressionLog]) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)
