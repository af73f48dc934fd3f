"""Typed heterogeneous graph over video and attribute nodes.

Node ids are opaque 64-bit integers.  Video nodes use their vocabulary
index directly; attribute nodes pack a kind tag into the high bits:

    author    (1 << 48) | author_index
    product   (2 << 48) | product_index
    category  (3 << 48) | category_index
    stat      (4 << 48) | (stat_index << 40) | owner_video_index

Statistic attributes are one node per (stat name, video) carrying the
numeric payload, so a video with author, product, category and five
statistics has exactly eight physical edges.

A graph carries the timestamp it was built at; cold/warm classification
is frozen at that timestamp so pre-sampling and serving always agree.
After ``freeze()`` the graph is immutable and safe for concurrent reads.

Persisted layout (``save``/``load``): one directory holding
``nodes.tsv``, ``edges.tsv`` and ``vocab.tsv``, all tab-separated.
Column schemas (stable; versioned by the ``#schema`` header):

``nodes.v1``  (second header line carries ``#build_ts=<unix seconds>``)
    video rows:  "video", node_id, release_ts, author_index,
                 product_index, category_index, token indices
                 (comma-joined), then the five statistics as repr floats
    attr rows:   "attr", node_id, kind, value (repr float)

``edges.v1``
    source node id, destination node id, kind ("phys" or "sem"),
    weight (1.0 for physical, cosine for semantic)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import STAT_NAMES, FileFormatError, StatVector
from .validation import ValidationError, check_unit_norm, require
from .vocab import Vocabulary

COLD_WINDOW_SECONDS = 3 * 86400

_KIND_TAGS = {"author": 1, "product": 2, "category": 3}
_STAT_TAG = 4


class GraphFrozenError(RuntimeError):
    """Raised on mutation attempts after freeze()."""


class Metapath(enum.Enum):
    """The three traversal templates rooted at a target video."""

    RHO_A = "rho_a"  # v_t -> a(author) -> v -> a
    RHO_P = "rho_p"  # v_t -> a(product) -> v -> a
    RHO_S = "rho_s"  # v_t -> v -> a

    @property
    def max_step(self) -> int:
        return 2 if self is Metapath.RHO_S else 3


@dataclass(frozen=True)
class AttributeNode:
    """A specific attribute value; stat kinds carry a numeric payload."""

    node_id: int
    kind: str
    value: float


@dataclass
class VideoNode:
    """A video with internal (vocabulary-index) ids."""

    video_id: int
    release_ts: int
    author_id: int
    product_id: int
    category_id: int
    title_tokens: tuple[int, ...]
    stats: StatVector
    content_vector: np.ndarray | None = None

    def __post_init__(self) -> None:
        require(self.release_ts > 0, "release_ts must be positive")
        if self.content_vector is not None:
            self.content_vector = np.asarray(self.content_vector, dtype=np.float64)
            check_unit_norm(self.content_vector, f"content_vector of video {self.video_id}")


def is_cold(video: VideoNode, now: int) -> bool:
    """A video released at most three days (inclusive) before ``now`` is cold."""
    if now < video.release_ts:
        raise ValidationError(
            f"clock inconsistency: now={now} precedes release_ts={video.release_ts}"
        )
    return now - video.release_ts <= COLD_WINDOW_SECONDS


def attr_node_id(kind: str, value: int, owner: int | None = None) -> int:
    if kind.startswith("stat:"):
        stat_idx = STAT_NAMES.index(kind.split(":", 1)[1])
        require(owner is not None, "stat attribute nodes need an owner video")
        return (_STAT_TAG << 48) | (stat_idx << 40) | int(owner)
    return (_KIND_TAGS[kind] << 48) | int(value)


@dataclass
class CoverageReport:
    cold_count: int
    physical_covered: int
    semantic_covered: int
    physical_fraction: float
    semantic_fraction: float


class HeteroGraph:
    """Video/attribute graph with physical V-A and semantic V-V edges."""

    def __init__(self, build_ts: int, vocab: Vocabulary) -> None:
        require(build_ts > 0, "build_ts must be positive")
        self.build_ts = int(build_ts)
        self.vocab = vocab
        self.videos: dict[int, VideoNode] = {}
        self.attributes: dict[int, AttributeNode] = {}
        self._v2a: dict[int, list[int]] = {}
        self._a2v: dict[int, list[int]] = {}
        # per video: [(neighbor video id, cosine weight)], cold -> warm only
        self._semantic: dict[int, list[tuple[int, float]]] = {}
        self._frozen = False
        self._warm: set[int] = set()

    # -- build phase -------------------------------------------------

    def _check_mutable(self) -> None:
        if self._frozen:
            raise GraphFrozenError("graph is frozen; build-phase mutation rejected")

    def add_video(self, video: VideoNode) -> None:
        self._check_mutable()
        require(video.video_id not in self.videos, f"duplicate video node {video.video_id}")
        self.videos[video.video_id] = video
        self._v2a.setdefault(video.video_id, [])

    def add_physical_edge(self, video_id: int, attr: AttributeNode) -> None:
        self._check_mutable()
        require(video_id in self.videos, f"unknown video node {video_id}")
        existing = self.attributes.get(attr.node_id)
        if existing is None:
            self.attributes[attr.node_id] = attr
        elif existing != attr:
            raise ValidationError(f"attribute node {attr.node_id} redefined with a new payload")
        if attr.node_id not in self._v2a[video_id]:
            self._v2a[video_id].append(attr.node_id)
            self._a2v.setdefault(attr.node_id, []).append(video_id)

    def add_semantic_edge(self, src: int, dst: int, weight: float) -> None:
        self._check_mutable()
        require(src in self.videos and dst in self.videos, "semantic edge endpoints must exist")
        require(src != dst, "semantic self-loops are not allowed")
        require(-1.0 - 1e-9 <= weight <= 1.0 + 1e-9, "semantic weight must be a cosine")
        self._semantic.setdefault(src, []).append((dst, float(weight)))

    def freeze(self) -> "HeteroGraph":
        """Validate invariants, fix deterministic orderings, lock the graph."""
        self._check_mutable()
        for vid in self.videos:
            self._v2a[vid] = sorted(set(self._v2a.get(vid, [])))
        for aid in self._a2v:
            require(aid in self.attributes, f"edge references unknown attribute {aid}")
            self._a2v[aid] = sorted(set(self._a2v[aid]))
        self._warm = {vid for vid, v in self.videos.items() if not is_cold(v, self.build_ts)}
        for src, edges in self._semantic.items():
            seen = {}
            for dst, w in edges:
                if dst in seen and not math.isclose(seen[dst], w, abs_tol=1e-12):
                    raise ValidationError(f"conflicting semantic weights for {src}->{dst}")
                seen[dst] = w
                src_vec = self.videos[src].content_vector
                dst_vec = self.videos[dst].content_vector
                if src_vec is not None and dst_vec is not None:
                    cos = float(np.dot(src_vec, dst_vec))
                    require(
                        abs(cos - w) <= 1e-6,
                        f"semantic weight {w} disagrees with cosine {cos} for {src}->{dst}",
                    )
            self._semantic[src] = sorted(seen.items(), key=lambda e: (-e[1], e[0]))
        self._frozen = True
        return self

    # -- queries -----------------------------------------------------

    @property
    def frozen(self) -> bool:
        return self._frozen

    def is_cold_id(self, video_id: int) -> bool:
        require(video_id in self.videos, f"unknown video node {video_id}")
        return video_id not in self._warm if self._frozen else is_cold(
            self.videos[video_id], self.build_ts
        )

    def attr_neighbors(self, video_id: int, kind: str | None = None) -> list[int]:
        require(video_id in self.videos, f"unknown video node {video_id}")
        ids = self._v2a.get(video_id, [])
        if kind is None:
            return list(ids)
        return [a for a in ids if self.attributes[a].kind == kind]

    def video_neighbors(self, attr_id: int) -> list[int]:
        require(attr_id in self.attributes, f"unknown attribute node {attr_id}")
        return list(self._a2v.get(attr_id, []))

    def semantic_neighbors(self, video_id: int) -> list[tuple[int, float]]:
        """Outgoing semantic edges, descending cosine then ascending id."""
        require(video_id in self.videos, f"unknown video node {video_id}")
        return list(self._semantic.get(video_id, []))

    def metapath_neighbors(self, origin: int, rho: Metapath, step: int) -> set[int]:
        """Nodes visited at ``step`` when walking ``rho`` from ``origin``.

        Step 1 of the physical paths follows only the declared attribute
        kind; the video step is restricted to warm videos and excludes
        the origin; the final attribute step follows every edge kind.
        """
        require(origin in self.videos, f"unknown video node {origin}")
        if not 0 <= step <= rho.max_step:
            raise ValidationError(f"step {step} out of range for {rho.value}")
        if step == 0:
            return {origin}
        if rho is Metapath.RHO_S:
            videos = {dst for dst, _ in self.semantic_neighbors(origin)}
            if step == 1:
                return videos
            return {a for v in videos for a in self._v2a.get(v, [])}
        kind = "author" if rho is Metapath.RHO_A else "product"
        attrs = set(self.attr_neighbors(origin, kind))
        if step == 1:
            return attrs
        videos = {
            v
            for a in attrs
            for v in self._a2v.get(a, [])
            if v != origin and not self.is_cold_id(v)
        }
        if step == 2:
            return videos
        return {a for v in videos for a in self._v2a.get(v, [])}

    def coverage_stats(self) -> CoverageReport:
        """Fractions of cold videos reaching >=1 warm video physically / semantically."""
        cold = [vid for vid in self.videos if self.is_cold_id(vid)]
        phys = sem = 0
        for vid in cold:
            reach = self.metapath_neighbors(vid, Metapath.RHO_A, 2) | self.metapath_neighbors(
                vid, Metapath.RHO_P, 2
            )
            if reach:
                phys += 1
            if self.semantic_neighbors(vid):
                sem += 1
        n = len(cold)
        return CoverageReport(
            cold_count=n,
            physical_covered=phys,
            semantic_covered=sem,
            physical_fraction=phys / n if n else 1.0,
            semantic_fraction=sem / n if n else 1.0,
        )

    # -- persistence ---------------------------------------------------

    def save(self, directory: Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        node_lines = ["#schema=nodes.v1", f"#build_ts={self.build_ts}"]
        for vid in sorted(self.videos):
            v = self.videos[vid]
            node_lines.append(
                "\t".join(
                    [
                        "video",
                        str(vid),
                        str(v.release_ts),
                        str(v.author_id),
                        str(v.product_id),
                        str(v.category_id),
                        ",".join(str(t) for t in v.title_tokens),
                    ]
                    + [repr(x) for x in v.stats.as_tuple()]
                )
            )
        for aid in sorted(self.attributes):
            a = self.attributes[aid]
            node_lines.append("\t".join(["attr", str(aid), a.kind, repr(float(a.value))]))
        (directory / "nodes.tsv").write_text("\n".join(node_lines) + "\n")

        edge_lines = ["#schema=edges.v1"]
        for vid in sorted(self._v2a):
            for aid in sorted(self._v2a[vid]):
                edge_lines.append(f"{vid}\t{aid}\tphys\t1.0")
        for src in sorted(self._semantic):
            for dst, w in self._semantic[src]:
                edge_lines.append(f"{src}\t{dst}\tsem\t{w!r}")
        (directory / "edges.tsv").write_text("\n".join(edge_lines) + "\n")
        self.vocab.save(directory / "vocab.tsv")

    @classmethod
    def load(cls, directory: Path) -> "HeteroGraph":
        directory = Path(directory)
        vocab = Vocabulary.load(directory / "vocab.tsv")
        lines = (directory / "nodes.tsv").read_text().splitlines()
        if len(lines) < 2 or lines[0] != "#schema=nodes.v1" or not lines[1].startswith("#build_ts="):
            raise FileFormatError(f"{directory}/nodes.tsv: bad nodes.v1 header")
        graph = cls(build_ts=int(lines[1].split("=", 1)[1]), vocab=vocab)
        attrs: dict[int, AttributeNode] = {}
        for line in lines[2:]:
            if not line:
                continue
            row = line.split("\t")
            if row[0] == "video":
                tokens = tuple(int(t) for t in row[6].split(",") if t)
                graph.add_video(
                    VideoNode(
                        video_id=int(row[1]),
                        release_ts=int(row[2]),
                        author_id=int(row[3]),
                        product_id=int(row[4]),
                        category_id=int(row[5]),
                        title_tokens=tokens,
                        stats=StatVector(*(float(x) for x in row[7:12])),
                    )
                )
            elif row[0] == "attr":
                attrs[int(row[1])] = AttributeNode(int(row[1]), row[2], float(row[3]))
            else:
                raise FileFormatError(f"unknown node row kind {row[0]!r}")
        edge_lines = (directory / "edges.tsv").read_text().splitlines()
        if not edge_lines or edge_lines[0] != "#schema=edges.v1":
            raise FileFormatError(f"{directory}/edges.tsv: bad edges.v1 header")
        for line in edge_lines[1:]:
            if not line:
                continue
            src, dst, kind, weight = line.split("\t")
            if kind == "phys":
                graph.add_physical_edge(int(src), attrs[int(dst)])
            elif kind == "sem":
                graph.add_semantic_edge(int(src), int(dst), float(weight))
            else:
                raise FileFormatError(f"unknown edge kind {kind!r}")
        return graph.freeze()
