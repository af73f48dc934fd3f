"""Model parameters, initialization, and the versioned checkpoint format.

Every parameter is a float64 numpy array addressed by a stable name.
Adagrad accumulators mirror the parameter set one-to-one.  Checkpoints
are a single binary file: a magic string, an 8-byte little-endian JSON
manifest length, the manifest (schema version, network config, stat
normalizer, block order and shapes, training metadata), then the raw
float64 blocks for parameters followed by accumulators, in manifest
order.  Writing is byte-deterministic.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import STAT_NAMES
from .validation import ValidationError, require
from .vocab import Vocabulary

SCHEMA_VERSION = 1
_MAGIC = b"GRAFTCKPT\n"

METAPATH_KEYS = ("a", "p", "s")


class CheckpointVersionError(ValueError):
    """Checkpoint written by an incompatible schema version."""


@dataclass(frozen=True)
class NetConfig:
    """Network shape configuration; embedding widths follow the feature schema."""

    n_videos: int
    n_products: int
    n_authors: int
    n_categories: int
    n_tokens: int
    n_users: int
    hidden_dim: int = 128
    video_dim: int = 32
    product_dim: int = 32
    author_dim: int = 16
    category_dim: int = 16
    token_dim: int = 16
    user_dim: int = 16
    mlp_hidden: tuple[int, ...] = (512, 256, 128)
    neighbor_cap: int = 20
    behavior_cap: int = 50
    title_cap: int = 12

    def __post_init__(self) -> None:
        for name in ("n_videos", "n_products", "n_authors", "n_categories", "n_tokens", "n_users"):
            require(getattr(self, name) >= 1, f"{name} must be >= 1")
        require(self.hidden_dim >= 1 and self.neighbor_cap >= 1, "dims must be positive")

    @property
    def raw_dim(self) -> int:
        """Concatenated per-video input width: id embeddings + title mean + stats."""
        return (
            self.video_dim
            + self.product_dim
            + self.author_dim
            + self.category_dim
            + self.token_dim
            + len(STAT_NAMES)
        )

    @property
    def demo_dim(self) -> int:
        return self.user_dim + 2

    @property
    def e2_slots(self) -> int:
        return 3 * self.neighbor_cap

    def block_slices(self) -> dict[str, slice]:
        """Slices of the raw video vector, in concatenation order."""
        widths = [
            ("video", self.video_dim),
            ("product", self.product_dim),
            ("author", self.author_dim),
            ("category", self.category_dim),
            ("token", self.token_dim),
            ("stats", len(STAT_NAMES)),
        ]
        out, off = {}, 0
        for name, width in widths:
            out[name] = slice(off, off + width)
            off += width
        return out

    @classmethod
    def from_vocab(cls, vocab: Vocabulary, **overrides) -> "NetConfig":
        return cls(
            n_videos=vocab.size("video"),
            n_products=vocab.size("product"),
            n_authors=vocab.size("author"),
            n_categories=vocab.size("category"),
            n_tokens=vocab.size("token"),
            n_users=vocab.size("user"),
            **overrides,
        )


def param_specs(cfg: NetConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """(name, shape, init kind) for every parameter block, in canonical order."""
    d = cfg.hidden_dim
    specs: list[tuple[str, tuple[int, ...], str]] = [
        ("emb/video", (cfg.n_videos, cfg.video_dim), "embedding"),
        ("emb/product", (cfg.n_products, cfg.product_dim), "embedding"),
        ("emb/author", (cfg.n_authors, cfg.author_dim), "embedding"),
        ("emb/category", (cfg.n_categories, cfg.category_dim), "embedding"),
        ("emb/token", (cfg.n_tokens, cfg.token_dim), "embedding"),
        ("emb/user", (cfg.n_users, cfg.user_dim), "embedding"),
        ("item_proj/W", (cfg.raw_dim, d), "dense"),
        ("item_proj/b", (d,), "bias"),
    ]
    for head in ("user", "h2", "h3_a", "h3_p", "h3_s"):
        for mat in ("WQ", "WK", "WV"):
            specs.append((f"attn/{head}/{mat}", (d, d), "dense"))
    specs += [("fuse/W", (5 * d, d), "dense"), ("fuse/b", (d,), "bias")]
    mlp_in = 2 * d + cfg.demo_dim
    for i, width in enumerate(cfg.mlp_hidden):
        specs += [(f"mlp/W{i}", (mlp_in, width), "dense"), (f"mlp/b{i}", (width,), "bias")]
        mlp_in = width
    specs += [("out/W", (mlp_in,), "dense"), ("out/b", (), "bias")]
    return specs


class ModelParams:
    """Named parameter blocks plus aligned Adagrad accumulators."""

    def __init__(self, cfg: NetConfig, blocks: dict[str, np.ndarray], acc: dict[str, np.ndarray]):
        self.cfg = cfg
        self.blocks = blocks
        self.acc = acc

    def __getitem__(self, name: str) -> np.ndarray:
        return self.blocks[name]

    @property
    def names(self) -> list[str]:
        return [name for name, _, _ in param_specs(self.cfg)]

    @classmethod
    def init(cls, cfg: NetConfig, seed: int) -> "ModelParams":
        """Embeddings uniform in [-1/sqrt(dim), 1/sqrt(dim)]; dense layers
        scaled-uniform by fan-in; biases zero.  Draw order is fixed by the
        spec list so a seed fully determines the initialization."""
        rng = np.random.Generator(np.random.PCG64(seed))
        blocks: dict[str, np.ndarray] = {}
        acc: dict[str, np.ndarray] = {}
        for name, shape, kind in param_specs(cfg):
            if kind == "bias":
                block = np.zeros(shape, dtype=np.float64)
            else:
                if kind == "embedding":
                    bound = 1.0 / np.sqrt(shape[1])
                else:
                    fan_in = shape[0] if len(shape) else 1
                    bound = 1.0 / np.sqrt(fan_in)
                block = rng.uniform(-bound, bound, size=shape)
            blocks[name] = block
            acc[name] = np.zeros(shape, dtype=np.float64)
        return cls(cfg, blocks, acc)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(arr) for name, arr in self.blocks.items()}

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.cfg,
            {k: v.copy() for k, v in self.blocks.items()},
            {k: v.copy() for k, v in self.acc.items()},
        )

    def allclose(self, other: "ModelParams") -> bool:
        return set(self.blocks) == set(other.blocks) and all(
            np.array_equal(self.blocks[k], other.blocks[k]) for k in self.blocks
        )


@dataclass
class Checkpoint:
    """A trained parameter snapshot plus everything needed to featurize."""

    params: ModelParams
    normalizer_state: dict
    meta: dict = field(default_factory=dict)

    @property
    def cfg(self) -> NetConfig:
        return self.params.cfg

    def save(self, path: Path) -> None:
        cfg_dict = asdict(self.cfg)
        cfg_dict["mlp_hidden"] = list(self.cfg.mlp_hidden)
        order = self.params.names
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "config": cfg_dict,
            "normalizer": self.normalizer_state,
            "meta": self.meta,
            "order": order,
            "shapes": {name: list(self.params.blocks[name].shape) for name in order},
        }
        payload = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
        with Path(path).open("wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)
            for name in order:
                fh.write(np.ascontiguousarray(self.params.blocks[name], dtype="<f8").tobytes())
            for name in order:
                fh.write(np.ascontiguousarray(self.params.acc[name], dtype="<f8").tobytes())

    @classmethod
    def read_manifest(cls, path: Path) -> dict:
        with Path(path).open("rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise ValidationError(f"{path}: not a checkpoint file")
            (length,) = struct.unpack("<Q", fh.read(8))
            return json.loads(fh.read(length))

    @classmethod
    def load(cls, path: Path) -> "Checkpoint":
        with Path(path).open("rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise ValidationError(f"{path}: not a checkpoint file")
            (length,) = struct.unpack("<Q", fh.read(8))
            manifest = json.loads(fh.read(length))
            if manifest.get("schema_version") != SCHEMA_VERSION:
                raise CheckpointVersionError(
                    f"{path}: schema version {manifest.get('schema_version')} "
                    f"!= supported {SCHEMA_VERSION}"
                )
            cfg_dict = dict(manifest["config"])
            cfg_dict["mlp_hidden"] = tuple(cfg_dict["mlp_hidden"])
            cfg = NetConfig(**cfg_dict)
            expected = {name: tuple(shape) for name, shape, _ in param_specs(cfg)}
            blocks: dict[str, np.ndarray] = {}
            acc: dict[str, np.ndarray] = {}
            for dest in (blocks, acc):
                for name in manifest["order"]:
                    shape = tuple(manifest["shapes"][name])
                    if expected.get(name) != shape:
                        raise ValidationError(f"{path}: shape mismatch for block {name}")
                    count = int(np.prod(shape)) if shape else 1
                    buf = fh.read(count * 8)
                    if len(buf) != count * 8:
                        raise ValidationError(f"{path}: truncated block {name}")
                    dest[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
            if set(manifest["order"]) != set(expected):
                raise ValidationError(f"{path}: block set mismatch against config")
        return cls(ModelParams(cfg, blocks, acc), manifest["normalizer"], manifest["meta"])
