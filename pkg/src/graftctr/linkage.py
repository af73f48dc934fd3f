"""Edge construction: physical video-attribute links and semantic kNN links.

Semantic linkage is exact (full-scan) cosine kNN over unit-norm content
vectors.  Desk-scale corpora make exactness affordable, and results are
reproducible: ties in cosine break by ascending video id.  Semantic
edges run from cold videos to warm videos only, since transfer sources
need reliable statistics.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import STAT_NAMES, FileFormatError, VideoRecord
from .graph import AttributeNode, HeteroGraph, VideoNode, attr_node_id
from .validation import ValidationError, check_unit_norm, require
from .vocab import Vocabulary

DEFAULT_CONTENT_DIM = 64
DEFAULT_SEMANTIC_K = 20

_ID_KINDS = (("author", "author_id"), ("product", "product_id"), ("category", "category_id"))


@dataclass
class LinkageReport:
    """Warnings collected while wiring physical edges."""

    edge_count: int = 0
    missing_author: list[str] = field(default_factory=list)
    missing_product: list[str] = field(default_factory=list)


def add_videos(
    graph: HeteroGraph,
    records: list[VideoRecord],
    vectors: dict[str, np.ndarray] | None = None,
) -> None:
    """Register video nodes, interning external ids into the graph vocabulary."""
    vocab = graph.vocab
    for rec in records:
        vec = None if vectors is None else vectors.get(rec.video_id)
        graph.add_video(
            VideoNode(
                video_id=vocab.add("video", rec.video_id),
                release_ts=rec.release_ts,
                author_id=vocab.add("author", rec.author_id) if rec.author_id else 0,
                product_id=vocab.add("product", rec.product_id) if rec.product_id else 0,
                category_id=vocab.add("category", rec.category_id) if rec.category_id else 0,
                title_tokens=tuple(vocab.add("token", t) for t in rec.title_tokens),
                stats=rec.stats,
                content_vector=vec,
            )
        )


def build_physical_linkages(graph: HeteroGraph) -> LinkageReport:
    """Wire each video to its author/product/category/stat attribute nodes.

    Idempotent; a video missing author or product is linked through the
    attributes it does have and counted in the warnings report.
    """
    report = LinkageReport()
    for vid in sorted(graph.videos):
        video = graph.videos[vid]
        ext = graph.vocab.external("video", vid)
        for kind, attr_field in _ID_KINDS:
            value = getattr(video, attr_field)
            if value == 0:
                if kind == "author":
                    report.missing_author.append(ext)
                elif kind == "product":
                    report.missing_product.append(ext)
                continue
            graph.add_physical_edge(vid, AttributeNode(attr_node_id(kind, value), kind, float(value)))
            report.edge_count += 1
        for name, value in zip(STAT_NAMES, video.stats.as_tuple()):
            kind = f"stat:{name}"
            graph.add_physical_edge(
                vid, AttributeNode(attr_node_id(kind, 0, owner=vid), kind, float(value))
            )
            report.edge_count += 1
    return report


def _hash_vector(key: bytes, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    return np.random.Generator(np.random.PCG64(seed)).standard_normal(dim)


def embed_content(
    title_tokens: tuple[str, ...] | list[str],
    cover_seed: int | None = None,
    dim: int = DEFAULT_CONTENT_DIM,
) -> np.ndarray:
    """Deterministic unit vector from a seeded hash-projection of the inputs.

    Stands in for an external multimodal encoder: identical inputs give
    identical vectors, disjoint token sets land nearly orthogonal.
    """
    require(len(title_tokens) > 0 or cover_seed is not None, "embed_content needs tokens or a cover seed")
    acc = np.zeros(dim, dtype=np.float64)
    for token in title_tokens:
        acc += _hash_vector(b"token:" + token.encode("utf-8"), dim)
    if cover_seed is not None:
        acc += _hash_vector(b"cover:%d" % int(cover_seed), dim)
    norm = float(np.linalg.norm(acc))
    if norm < 1e-12:  # adversarially cancelling inputs; pick a stable fallback
        acc = _hash_vector(b"fallback", dim)
        norm = float(np.linalg.norm(acc))
    return acc / norm


def default_content_vectors(
    records: list[VideoRecord], dim: int = DEFAULT_CONTENT_DIM
) -> dict[str, np.ndarray]:
    """Stand-in embeddings when no external vector file is supplied.

    Each video gets a cover seed derived from its id, so even videos
    without title tokens embed deterministically.
    """
    out = {}
    for rec in records:
        seed = int.from_bytes(
            hashlib.blake2b(rec.video_id.encode("utf-8"), digest_size=8).digest(), "little"
        )
        out[rec.video_id] = embed_content(rec.title_tokens, cover_seed=seed, dim=dim)
    return out


class CosineKnnIndex:
    """Exact top-k cosine search over unit-norm vectors with a warm-only mask."""

    def __init__(self, ids: np.ndarray, vectors: np.ndarray, eligible: np.ndarray) -> None:
        ids = np.asarray(ids, dtype=np.int64)
        vectors = np.asarray(vectors, dtype=np.float64)
        eligible = np.asarray(eligible, dtype=bool)
        require(vectors.ndim == 2 and len(ids) == len(vectors) == len(eligible), "shape mismatch")
        require(len(np.unique(ids)) == len(ids), "index ids must be unique")
        norms = np.linalg.norm(vectors, axis=1)
        require(bool(np.all(np.abs(norms - 1.0) <= 1e-6)), "index vectors must be unit-norm")
        order = np.argsort(ids, kind="stable")
        self.ids = ids[order]
        self.vectors = vectors[order]
        self.eligible = eligible[order]

    def __len__(self) -> int:
        return len(self.ids)


def knn_search(index: CosineKnnIndex, query: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Exact top-k by cosine, descending, ties broken by ascending id."""
    require(k >= 1, "k must be >= 1")
    require(len(index) > 0, "index is empty")
    query = np.asarray(query, dtype=np.float64)
    check_unit_norm(query, "query")
    cos = index.vectors[index.eligible] @ query
    ids = index.ids[index.eligible]
    # lexsort: last key is primary, so (-cosine, then ascending id)
    order = np.lexsort((ids, -cos))[: min(k, len(ids))]
    return [(int(ids[i]), float(cos[i])) for i in order]


def build_semantic_linkages(graph: HeteroGraph, k: int = DEFAULT_SEMANTIC_K) -> int:
    """Link every cold video to its top-k warm videos by content cosine.

    Returns the number of edges added.  Fewer than k warm candidates is
    not an error; all available are linked.
    """
    require(k >= 1, "k must be >= 1")
    missing = [v for v, node in graph.videos.items() if node.content_vector is None]
    require(not missing, f"{len(missing)} videos lack content vectors")
    warm_ids = [v for v in sorted(graph.videos) if not graph.is_cold_id(v)]
    cold_ids = [v for v in sorted(graph.videos) if graph.is_cold_id(v)]
    if not warm_ids or not cold_ids:
        return 0
    index = CosineKnnIndex(
        ids=np.array(warm_ids, dtype=np.int64),
        vectors=np.stack([graph.videos[v].content_vector for v in warm_ids]),
        eligible=np.ones(len(warm_ids), dtype=bool),
    )
    added = 0
    for cold in cold_ids:
        for nbr, cosv in knn_search(index, graph.videos[cold].content_vector, k):
            graph.add_semantic_edge(cold, nbr, cosv)
            added += 1
    return added


def build_graph(
    records: list[VideoRecord],
    vectors: dict[str, np.ndarray],
    build_ts: int,
    semantic_k: int = DEFAULT_SEMANTIC_K,
    vocab: Vocabulary | None = None,
) -> tuple[HeteroGraph, LinkageReport]:
    """End-to-end graph construction: nodes, physical edges, semantic edges, freeze."""
    graph = HeteroGraph(build_ts=build_ts, vocab=vocab or Vocabulary())
    add_videos(graph, records, vectors)
    report = build_physical_linkages(graph)
    build_semantic_linkages(graph, k=semantic_k)
    graph.freeze()
    return graph, report


def write_vectors(path: Path, vectors: dict[str, np.ndarray]) -> None:
    lines = ["#schema=vectors.v1"]
    for ext in sorted(vectors):
        vec = np.asarray(vectors[ext], dtype=np.float64)
        lines.append("\t".join([ext] + [repr(float(x)) for x in vec]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_vectors(path: Path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "#schema=vectors.v1":
        raise FileFormatError(f"{path}: expected '#schema=vectors.v1' header")
    out: dict[str, np.ndarray] = {}
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split("\t")
        if parts[0] in out:
            raise ValidationError(f"duplicate content vector for {parts[0]!r}")
        out[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
    return out
