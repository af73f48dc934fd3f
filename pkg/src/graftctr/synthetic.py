"""Synthetic desk-scale world with a planted click oracle.

Users, authors and products get latent taste vectors; each video's
latent mixes its author's and product's vectors with an idiosyncratic
component, and its content vector is a noisy projection of that latent,
so semantic nearest neighbors genuinely share taste structure.  The
click oracle is a logistic model over user-video latent affinity plus a
per-video popularity with author/product components; labels are
Bernoulli draws from it.  Warm videos accumulate realistic small-sample
statistics, cold videos get tiny unreliable samples.

Impressions are generated as per-user streams: the behavior sequence of
an impression is the user's previously clicked videos, most recent
first.  The cold subset shares impression ids with the full log; the
test log holds later-timestamp cold impressions only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    ImpressionLog,
    StatVector,
    UserRecord,
    VideoRecord,
    write_impressions,
    write_users,
    write_videos,
)
from .linkage import write_vectors
from .validation import ValidationError, require

DAY = 86400


@dataclass(frozen=True)
class SyntheticWorldConfig:
    n_users: int = 800
    n_authors: int = 120
    n_products: int = 240
    n_categories: int = 24
    n_warm: int = 2000
    n_cold: int = 500
    latent_dim: int = 8
    content_dim: int = 64
    impressions_per_user: int = 62
    test_impressions_per_user: int = 16
    cold_exposure: float = 0.15
    author_mix: float = 0.45
    product_mix: float = 0.45
    idio_mix: float = 0.95
    content_noise: float = 0.1
    affinity_gain: float = 1.0
    pop_gain: float = 1.0
    pop_author_mix: float = 0.25
    pop_product_mix: float = 0.25
    pop_idio_mix: float = 1.6
    base_logit: float = -1.9
    behavior_cap: int = 20
    title_vocab: int = 400
    title_len: int = 6
    now: int = 1_700_000_000
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_users", "n_authors", "n_products", "n_categories", "n_warm"):
            require(getattr(self, name) >= 1, f"{name} must be >= 1")
        require(self.n_cold >= 0, "n_cold must be >= 0")
        if self.n_cold and not self.n_warm:
            raise ValidationError("cold videos without any warm video is infeasible")
        require(0.0 <= self.cold_exposure < 1.0, "cold_exposure must be in [0, 1)")


@dataclass
class SyntheticWorld:
    config: SyntheticWorldConfig
    videos: list[VideoRecord]
    users: list[UserRecord]
    vectors: dict[str, np.ndarray]
    d_full: list[ImpressionLog]
    d_cold: list[ImpressionLog]
    d_test: list[ImpressionLog]
    ctr_matrix: np.ndarray = field(repr=False)  # (users, videos) oracle CTR
    user_index: dict[str, int] = field(repr=False)
    video_index: dict[str, int] = field(repr=False)

    def oracle_ctr(self, user_id: str, video_id: str) -> float:
        return float(self.ctr_matrix[self.user_index[user_id], self.video_index[video_id]])

    def write(self, out_dir: Path) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "videos": out_dir / "videos.tsv",
            "users": out_dir / "users.tsv",
            "vectors": out_dir / "vectors.tsv",
            "full": out_dir / "impressions_full.tsv",
            "cold": out_dir / "impressions_cold.tsv",
            "test": out_dir / "impressions_test.tsv",
        }
        write_videos(paths["videos"], self.videos)
        write_users(paths["users"], self.users)
        write_vectors(paths["vectors"], self.vectors)
        write_impressions(paths["full"], self.d_full)
        write_impressions(paths["cold"], self.d_cold)
        write_impressions(paths["test"], self.d_test)
        return paths


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def generate_world(config: SyntheticWorldConfig) -> SyntheticWorld:
    cfg = config
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    L = cfg.latent_dim
    scale = L**-0.25  # makes dot products of independent latents unit-variance

    z_user = rng.normal(0.0, scale, (cfg.n_users, L))
    z_author = rng.normal(0.0, scale, (cfg.n_authors, L))
    z_product = rng.normal(0.0, scale, (cfg.n_products, L))
    q_author = rng.normal(0.0, 1.0, cfg.n_authors)
    q_product = rng.normal(0.0, 1.0, cfg.n_products)

    n_videos = cfg.n_warm + cfg.n_cold
    author_of = rng.integers(0, cfg.n_authors, n_videos)
    product_of = rng.integers(0, cfg.n_products, n_videos)
    category_of = rng.integers(0, cfg.n_categories, n_videos)
    idio = rng.normal(0.0, scale, (n_videos, L))
    z_video = (
        cfg.author_mix * z_author[author_of]
        + cfg.product_mix * z_product[product_of]
        + cfg.idio_mix * idio
    )
    # popularity partly rides on the idiosyncratic latent, so semantically
    # close videos genuinely perform alike
    pop_direction = rng.normal(0.0, 1.0, L)
    pop_direction /= np.linalg.norm(pop_direction)
    pop = (
        cfg.pop_author_mix * q_author[author_of]
        + cfg.pop_product_mix * q_product[product_of]
        + cfg.pop_idio_mix * (idio @ pop_direction)
    )

    # planted oracle: logistic in latent affinity and popularity
    logits = cfg.base_logit + cfg.affinity_gain * (z_user @ z_video.T) + cfg.pop_gain * pop
    ctr = 1.0 / (1.0 + np.exp(-logits))

    # content vectors correlate with the full latent so semantic kNN
    # recovers taste neighbors
    projection = rng.normal(0.0, 1.0, (L, cfg.content_dim)) / np.sqrt(L)
    content = _unit_rows(z_video @ projection)
    content = _unit_rows(content + cfg.content_noise * _unit_rows(rng.normal(0.0, 1.0, content.shape)))

    # titles carry category-level signal only
    tokens_per_cat = max(8, cfg.title_vocab // max(cfg.n_categories, 1) - 2)
    cat_tokens = rng.integers(0, cfg.title_vocab, (cfg.n_categories, tokens_per_cat))

    release = np.empty(n_videos, dtype=np.int64)
    release[: cfg.n_warm] = cfg.now - rng.integers(4 * DAY, 45 * DAY, cfg.n_warm)
    if cfg.n_cold:
        release[cfg.n_warm :] = cfg.now - rng.integers(0, 3 * DAY + 1, cfg.n_cold)

    mean_ctr = ctr.mean(axis=0)
    videos: list[VideoRecord] = []
    vectors: dict[str, np.ndarray] = {}
    for v in range(n_videos):
        warm = v < cfg.n_warm
        if warm:
            pv = float(np.round(np.exp(rng.normal(5.0, 0.7))) + 1)
        else:
            pv = float(rng.poisson(2.5))
        clk = float(rng.binomial(int(pv), min(mean_ctr[v], 1.0))) if pv else 0.0
        ipv = float(rng.binomial(int(pv), 0.55)) if pv else 0.0
        ctr_15d = clk / pv if pv else 0.0
        if warm:
            stay = max(0.0, 15.0 + 140.0 * mean_ctr[v] + rng.normal(0.0, 4.0))
        else:
            stay = float(rng.uniform(0.0, 60.0))
        title = [int(t) for t in rng.choice(cat_tokens[category_of[v]], cfg.title_len - 2)]
        title += [int(t) for t in rng.integers(0, cfg.title_vocab, 2)]
        ext = f"v{v}"
        videos.append(
            VideoRecord(
                video_id=ext,
                release_ts=int(release[v]),
                author_id=f"a{author_of[v]}",
                product_id=f"p{product_of[v]}",
                category_id=f"c{category_of[v]}",
                title_tokens=tuple(f"w{t}" for t in title),
                stats=StatVector(min(ctr_15d, 1.0), pv, min(ipv, pv), min(clk, pv), stay),
            )
        )
        vectors[ext] = content[v]

    users = [
        UserRecord(f"u{u}", (float(x), float(y)))
        for u, (x, y) in enumerate(rng.normal(0.0, 1.0, (cfg.n_users, 2)))
    ]

    # popularity-biased exposure; cold exposure also scales with time alive
    # inside the training window, leaving the newest videos nearly unseen
    warm_w = np.exp(0.5 * pop[: cfg.n_warm])
    warm_w /= warm_w.sum()
    if cfg.n_cold:
        cold_release = release[cfg.n_warm :]
        alive = np.clip((cfg.now - cold_release) / (2.0 * DAY), 0.02, 1.0)
        cold_w = np.exp(0.5 * pop[cfg.n_warm :]) * alive
        cold_w /= cold_w.sum()
        # test targets must still be cold through the one-day test window
        test_eligible = cold_release >= cfg.now - 2 * DAY
        require(bool(test_eligible.any()), "no cold video remains cold through the test day")
        test_w = np.exp(0.5 * pop[cfg.n_warm :]) * test_eligible
        test_w /= test_w.sum()

    d_full: list[ImpressionLog] = []
    d_cold: list[ImpressionLog] = []
    d_test: list[ImpressionLog] = []
    window_start = cfg.now - 2 * DAY
    counter = 0
    clicked: list[list[int]] = [[] for _ in range(cfg.n_users)]
    for u in range(cfg.n_users):
        for j in range(cfg.impressions_per_user):
            go_cold = cfg.n_cold > 0 and rng.random() < cfg.cold_exposure
            if go_cold:
                v = cfg.n_warm + int(rng.choice(cfg.n_cold, p=cold_w))
            else:
                v = int(rng.choice(cfg.n_warm, p=warm_w))
            ts = window_start + int(
                (j + rng.random()) * (2 * DAY) / cfg.impressions_per_user
            )
            ts = max(ts, int(release[v]) + 1)  # cold videos exist only after release
            label = int(rng.random() < ctr[u, v])
            behaviors = tuple(f"v{b}" for b in reversed(clicked[u][-cfg.behavior_cap :]))
            imp = ImpressionLog(f"f{counter}", f"u{u}", behaviors, f"v{v}", label, ts)
            counter += 1
            d_full.append(imp)
            if v >= cfg.n_warm:
                d_cold.append(imp)
            if label:
                clicked[u].append(v)
        for j in range(cfg.test_impressions_per_user if cfg.n_cold else 0):
            v = cfg.n_warm + int(rng.choice(cfg.n_cold, p=test_w))
            ts = cfg.now + 1 + int(rng.random() * DAY)
            label = int(rng.random() < ctr[u, v])
            behaviors = tuple(f"v{b}" for b in reversed(clicked[u][-cfg.behavior_cap :]))
            d_test.append(ImpressionLog(f"t{counter}", f"u{u}", behaviors, f"v{v}", label, ts))
            counter += 1

    return SyntheticWorld(
        config=cfg,
        videos=videos,
        users=users,
        vectors=vectors,
        d_full=d_full,
        d_cold=d_cold,
        d_test=d_test,
        ctr_matrix=ctr,
        user_index={f"u{u}": u for u in range(cfg.n_users)},
        video_index={f"v{v}": v for v in range(n_videos)},
    )
