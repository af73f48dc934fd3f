"""Cold-start video CTR prediction via graph-guided feature transfer."""

from .data import ImpressionLog, StatVector, UserRecord, VideoRecord
from .estimator import GraftCtrClassifier, WorldAssets
from .evaluation import compute_auc, rela_impr, run_ablation
from .features import AblationMask, FeatureTables, StatNormalizer
from .graph import COLD_WINDOW_SECONDS, AttributeNode, HeteroGraph, Metapath, VideoNode, is_cold
from .linkage import CosineKnnIndex, build_graph, embed_content, knn_search
from .network import bce_loss, predict_ctr, target_attention
from .params import Checkpoint, ModelParams, NetConfig
from .sampling import ComputationGraph, NeighborStore, sample_computation_graph
from .serving import CtrServer, ScoringContext
from .synthetic import SyntheticWorldConfig, generate_world
from .training import TrainConfig, adagrad_step, finetune, pretrain
from .vocab import Vocabulary

__all__ = [
    "COLD_WINDOW_SECONDS",
    "AblationMask",
    "AttributeNode",
    "Checkpoint",
    "ComputationGraph",
    "CosineKnnIndex",
    "CtrServer",
    "FeatureTables",
    "GraftCtrClassifier",
    "HeteroGraph",
    "ImpressionLog",
    "Metapath",
    "ModelParams",
    "NeighborStore",
    "NetConfig",
    "ScoringContext",
    "StatNormalizer",
    "StatVector",
    "SyntheticWorldConfig",
    "TrainConfig",
    "UserRecord",
    "VideoNode",
    "VideoRecord",
    "Vocabulary",
    "WorldAssets",
    "adagrad_step",
    "bce_loss",
    "build_graph",
    "compute_auc",
    "embed_content",
    "finetune",
    "generate_world",
    "is_cold",
    "knn_search",
    "predict_ctr",
    "pretrain",
    "rela_impr",
    "run_ablation",
    "sample_computation_graph",
    "target_attention",
]

__version__ = "0.1.0"
