"""Pre-sampled per-cold-video computation graphs and their on-disk store.

For each cold target the sampler fixes, once and offline, everything the
transfer network needs at training and serving time: the target's own
attribute nodes, up to K warm neighbors per metapath, and each
neighbor's full attribute list.  Physical neighbors are ordered by
ascending release-time distance to the target, semantic neighbors by
descending cosine; ties break by ascending video id.

Store layout (``neighbors.v1``): one record per line, sorted by target,

    target \t own_attrs \t nbrs_a \t nbrs_p \t nbrs_s \t K

where an attribute list is ``kind=value`` pairs joined by ``;``, a
neighbor list is ``video:attrs`` entries joined by ``|``, and id-kind
values are external ids while stat values are ``repr`` floats.  A
sidecar ``<path>.idx`` maps target id to byte offset for point lookup.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, TextIO

from .data import FileFormatError
from .graph import HeteroGraph, Metapath
from .validation import require
from .vocab import Vocabulary

DEFAULT_NEIGHBOR_CAP = 20

AttrEntry = tuple[str, int | float]
NeighborEntry = tuple[int, tuple[AttrEntry, ...]]

_KIND_ORDER = {"author": 0, "product": 1, "category": 2}


@dataclass(frozen=True)
class ComputationGraph:
    """The pre-sampled neighbor bundle consumed by the transfer network."""

    target: int
    own_attrs: tuple[AttrEntry, ...]
    nbrs_a: tuple[NeighborEntry, ...]
    nbrs_p: tuple[NeighborEntry, ...]
    nbrs_s: tuple[NeighborEntry, ...]
    cap: int = DEFAULT_NEIGHBOR_CAP

    def __post_init__(self) -> None:
        for name in ("nbrs_a", "nbrs_p", "nbrs_s"):
            entries = getattr(self, name)
            require(len(entries) <= self.cap, f"{name} exceeds cap {self.cap}")
            ids = [vid for vid, _ in entries]
            require(len(set(ids)) == len(ids), f"duplicate neighbor in {name}")
            require(self.target not in ids, f"target present in {name}")

    def neighbor_ids(self, path: str) -> tuple[int, ...]:
        return tuple(vid for vid, _ in getattr(self, f"nbrs_{path}"))

    @classmethod
    def empty(cls, target: int, cap: int = DEFAULT_NEIGHBOR_CAP) -> "ComputationGraph":
        return cls(target, (), (), (), (), cap)


def _attr_entries(graph: HeteroGraph, video_id: int) -> tuple[AttrEntry, ...]:
    entries: list[tuple[int, str, AttrEntry]] = []
    for aid in graph.attr_neighbors(video_id):
        attr = graph.attributes[aid]
        if attr.kind.startswith("stat:"):
            entries.append((3, attr.kind, (attr.kind, float(attr.value))))
        else:
            entries.append((_KIND_ORDER[attr.kind], attr.kind, (attr.kind, int(attr.value))))
    entries.sort(key=lambda e: (e[0], e[1], repr(e[2][1])))
    return tuple(e[2] for e in entries)


def sample_computation_graph(
    graph: HeteroGraph, target: int, cap: int = DEFAULT_NEIGHBOR_CAP
) -> ComputationGraph:
    """Sample one cold video's neighbors; rejects warm or unknown targets."""
    require(cap >= 1, "cap must be >= 1")
    require(target in graph.videos, f"unknown video node {target}")
    require(graph.is_cold_id(target), f"video {target} is warm at graph build time")
    t_release = graph.videos[target].release_ts

    def physical(rho: Metapath) -> tuple[NeighborEntry, ...]:
        candidates = graph.metapath_neighbors(target, rho, 2)
        ranked = sorted(candidates, key=lambda v: (abs(graph.videos[v].release_ts - t_release), v))
        return tuple((v, _attr_entries(graph, v)) for v in ranked[:cap])

    semantic = tuple(
        (v, _attr_entries(graph, v)) for v, _ in graph.semantic_neighbors(target)[:cap]
    )
    return ComputationGraph(
        target=target,
        own_attrs=_attr_entries(graph, target),
        nbrs_a=physical(Metapath.RHO_A),
        nbrs_p=physical(Metapath.RHO_P),
        nbrs_s=semantic,
        cap=cap,
    )


def sample_all_cold(graph: HeteroGraph, cap: int = DEFAULT_NEIGHBOR_CAP) -> list[ComputationGraph]:
    cold = sorted(v for v in graph.videos if graph.is_cold_id(v))
    return [sample_computation_graph(graph, v, cap) for v in cold]


# -- serialization ----------------------------------------------------


def _attr_to_text(vocab: Vocabulary, entry: AttrEntry) -> str:
    kind, value = entry
    if kind.startswith("stat:"):
        return f"{kind}={float(value)!r}"
    return f"{kind}={vocab.external(kind, int(value))}"


def _attr_from_text(vocab: Vocabulary, text: str) -> AttrEntry:
    kind, _, value = text.partition("=")
    if kind.startswith("stat:"):
        return (kind, float(value))
    return (kind, vocab.require(kind, value))


def _attrs_to_text(vocab: Vocabulary, attrs: tuple[AttrEntry, ...]) -> str:
    return ";".join(_attr_to_text(vocab, a) for a in attrs)


def _attrs_from_text(vocab: Vocabulary, text: str) -> tuple[AttrEntry, ...]:
    if not text:
        return ()
    return tuple(_attr_from_text(vocab, part) for part in text.split(";"))


def _nbrs_to_text(vocab: Vocabulary, entries: tuple[NeighborEntry, ...]) -> str:
    return "|".join(
        f"{vocab.external('video', vid)}:{_attrs_to_text(vocab, attrs)}" for vid, attrs in entries
    )


def _nbrs_from_text(vocab: Vocabulary, text: str) -> tuple[NeighborEntry, ...]:
    if not text:
        return ()
    out = []
    for part in text.split("|"):
        ext, _, attrs = part.partition(":")
        out.append((vocab.require("video", ext), _attrs_from_text(vocab, attrs)))
    return tuple(out)


def _record_to_line(vocab: Vocabulary, cg: ComputationGraph) -> str:
    return "\t".join(
        [
            vocab.external("video", cg.target),
            _attrs_to_text(vocab, cg.own_attrs),
            _nbrs_to_text(vocab, cg.nbrs_a),
            _nbrs_to_text(vocab, cg.nbrs_p),
            _nbrs_to_text(vocab, cg.nbrs_s),
            str(cg.cap),
        ]
    )


def _record_from_line(vocab: Vocabulary, line: str) -> ComputationGraph:
    cols = line.rstrip("\n").split("\t")
    if len(cols) != 6:
        raise FileFormatError(f"neighbors.v1 record needs 6 columns, got {len(cols)}")
    return ComputationGraph(
        target=vocab.require("video", cols[0]),
        own_attrs=_attrs_from_text(vocab, cols[1]),
        nbrs_a=_nbrs_from_text(vocab, cols[2]),
        nbrs_p=_nbrs_from_text(vocab, cols[3]),
        nbrs_s=_nbrs_from_text(vocab, cols[4]),
        cap=int(cols[5]),
    )


def save_neighbor_store(path: Path, graphs: Iterable[ComputationGraph], vocab: Vocabulary) -> None:
    """Write records sorted by target id plus a byte-offset index sidecar."""
    path = Path(path)
    records = sorted(graphs, key=lambda cg: cg.target)
    header = "#schema=neighbors.v1\n"
    offsets: list[tuple[str, int]] = []
    with path.open("w") as fh:
        fh.write(header)
        pos = len(header.encode())
        for cg in records:
            line = _record_to_line(vocab, cg) + "\n"
            offsets.append((vocab.external("video", cg.target), pos))
            fh.write(line)
            pos += len(line.encode())
    idx_lines = ["#schema=neighbors-idx.v1"]
    idx_lines += [f"{ext}\t{off}" for ext, off in offsets]
    Path(str(path) + ".idx").write_text("\n".join(idx_lines) + "\n")


class NeighborStore:
    """Point-lookup view over a persisted neighbor file."""

    def __init__(self, path: Path, vocab: Vocabulary) -> None:
        self.path = Path(path)
        self.vocab = vocab
        first = self.path.open().readline()
        if first.rstrip("\n") != "#schema=neighbors.v1":
            raise FileFormatError(f"{path}: expected '#schema=neighbors.v1' header")
        idx_path = Path(str(path) + ".idx")
        idx_lines = idx_path.read_text().splitlines()
        if not idx_lines or idx_lines[0] != "#schema=neighbors-idx.v1":
            raise FileFormatError(f"{idx_path}: expected '#schema=neighbors-idx.v1' header")
        self._offsets: dict[str, int] = {}
        for line in idx_lines[1:]:
            if not line:
                continue
            ext, off = line.split("\t")
            self._offsets[ext] = int(off)

    def __len__(self) -> int:
        return len(self._offsets)

    def __contains__(self, external_id: str) -> bool:
        return external_id in self._offsets

    def get(self, external_id: str) -> ComputationGraph | None:
        """Fetch one record; None signals not-found (caller falls back to empty)."""
        offset = self._offsets.get(external_id)
        if offset is None:
            return None
        with self.path.open() as fh:
            fh.seek(offset)
            return _record_from_line(self.vocab, fh.readline())

    def __iter__(self) -> Iterator[ComputationGraph]:
        with self.path.open() as fh:
            fh.readline()
            for line in fh:
                if line.strip():
                    yield _record_from_line(self.vocab, line)

    def dump(self, out: TextIO) -> None:
        """Human-readable record listing."""
        for cg in self:
            ext = self.vocab.external("video", cg.target)
            out.write(f"target={ext} cap={cg.cap}\n")
            out.write(f"  own: {_attrs_to_text(self.vocab, cg.own_attrs)}\n")
            for name in ("a", "p", "s"):
                entries = getattr(cg, f"nbrs_{name}")
                out.write(f"  {name} ({len(entries)}):\n")
                for vid, attrs in entries:
                    out.write(
                        f"    {self.vocab.external('video', vid)}"
                        f" [{_attrs_to_text(self.vocab, attrs)}]\n"
                    )
