"""On-disk record types and their delimited-text file formats.

All pipeline inputs are tab-separated text with a leading ``#schema=...``
comment line so every artifact is self-describing.  Column layouts:

``videos.v1``
    video_id, release_ts, author_id, product_id, category_id,
    title_tokens (comma-joined), ctr_15d, pv_cnt_15d, ipv_cnt_15d,
    clk_cnt_15d, avg_stay_time

``users.v1``
    user_id, feat_0, feat_1

``impressions.v1``
    impression_id, user_id, behavior video ids (comma-joined, may be
    empty), target video_id, click label (0/1), unix timestamp

Floats are written with ``repr`` so round-trips are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .validation import ValidationError, check_safe_token, require

STAT_NAMES = ("ctr_15d", "pv_cnt_15d", "ipv_cnt_15d", "clk_cnt_15d", "avg_stay_time")


class FileFormatError(ValueError):
    """Raised when an artifact file does not match its declared schema."""


@dataclass(frozen=True)
class StatVector:
    """Fifteen-day rolling statistics attached to a video."""

    ctr_15d: float
    pv_cnt_15d: float
    ipv_cnt_15d: float
    clk_cnt_15d: float
    avg_stay_time: float

    def __post_init__(self) -> None:
        values = self.as_tuple()
        require(all(math.isfinite(v) for v in values), "stat values must be finite")
        require(all(v >= 0.0 for v in values), "stat values must be nonnegative")
        require(0.0 <= self.ctr_15d <= 1.0, "ctr_15d must lie in [0, 1]")
        require(self.clk_cnt_15d <= self.pv_cnt_15d, "clk_cnt_15d cannot exceed pv_cnt_15d")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.ctr_15d, self.pv_cnt_15d, self.ipv_cnt_15d, self.clk_cnt_15d, self.avg_stay_time)


@dataclass(frozen=True)
class VideoRecord:
    """One row of the video feature store, external (string) ids."""

    video_id: str
    release_ts: int
    author_id: str
    product_id: str
    category_id: str
    title_tokens: tuple[str, ...]
    stats: StatVector

    def __post_init__(self) -> None:
        require(self.release_ts > 0, f"release_ts must be positive for {self.video_id}")
        check_safe_token(self.video_id, "video_id")
        # author/product/category may be absent (empty string); the linkage
        # builder records a warning and links through whatever is present.
        for name in ("author_id", "product_id", "category_id"):
            if getattr(self, name):
                check_safe_token(getattr(self, name), name)
        for tok in self.title_tokens:
            check_safe_token(tok, "title token")


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    features: tuple[float, float]


@dataclass(frozen=True)
class ImpressionLog:
    """One (user, target video, behavior sequence, label, timestamp) event."""

    impression_id: str
    user_id: str
    behaviors: tuple[str, ...]
    video_id: str
    label: int
    ts: int

    def __post_init__(self) -> None:
        require(self.label in (0, 1), "label must be 0 or 1")


def _read_rows(path: Path, schema: str) -> list[list[str]]:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(f"#schema={schema}"):
        raise FileFormatError(f"{path}: expected '#schema={schema}' header")
    return [line.split("\t") for line in lines[1:] if line and not line.startswith("#")]


def _fmt(value: float) -> str:
    return repr(float(value))


def write_videos(path: Path, videos: Iterable[VideoRecord]) -> None:
    lines = ["#schema=videos.v1"]
    for v in videos:
        lines.append(
            "\t".join(
                [
                    v.video_id,
                    str(v.release_ts),
                    v.author_id,
                    v.product_id,
                    v.category_id,
                    ",".join(v.title_tokens),
                ]
                + [_fmt(x) for x in v.stats.as_tuple()]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_videos(path: Path) -> list[VideoRecord]:
    videos = []
    for row in _read_rows(Path(path), "videos.v1"):
        if len(row) != 11:
            raise FileFormatError(f"{path}: videos.v1 rows need 11 columns, got {len(row)}")
        tokens = tuple(t for t in row[5].split(",") if t)
        stats = StatVector(*(float(x) for x in row[6:11]))
        videos.append(VideoRecord(row[0], int(row[1]), row[2], row[3], row[4], tokens, stats))
    return videos


def write_users(path: Path, users: Iterable[UserRecord]) -> None:
    lines = ["#schema=users.v1"]
    for u in users:
        lines.append("\t".join([u.user_id, _fmt(u.features[0]), _fmt(u.features[1])]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_users(path: Path) -> list[UserRecord]:
    return [
        UserRecord(row[0], (float(row[1]), float(row[2])))
        for row in _read_rows(Path(path), "users.v1")
    ]


def write_impressions(path: Path, impressions: Iterable[ImpressionLog]) -> None:
    lines = ["#schema=impressions.v1"]
    for imp in impressions:
        lines.append(
            "\t".join(
                [
                    imp.impression_id,
                    imp.user_id,
                    ",".join(imp.behaviors),
                    imp.video_id,
                    str(imp.label),
                    str(imp.ts),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_impressions(path: Path) -> list[ImpressionLog]:
    out = []
    for row in _read_rows(Path(path), "impressions.v1"):
        if len(row) != 6:
            raise FileFormatError(f"{path}: impressions.v1 rows need 6 columns, got {len(row)}")
        behaviors = tuple(b for b in row[2].split(",") if b)
        out.append(ImpressionLog(row[0], row[1], behaviors, row[3], int(row[4]), int(row[5])))
    return out


def index_by_id(videos: Sequence[VideoRecord]) -> dict[str, VideoRecord]:
    by_id: dict[str, VideoRecord] = {}
    for v in videos:
        if v.video_id in by_id:
            raise ValidationError(f"duplicate video id {v.video_id!r}")
        by_id[v.video_id] = v
    return by_id
