from dataclasses import dataclass

import numpy as np
import pytest

from graftctr.data import ImpressionLog, StatVector, UserRecord, VideoRecord
from graftctr.features import FeatureTables, StatNormalizer
from graftctr.linkage import build_graph
from graftctr.params import NetConfig
from graftctr.sampling import sample_all_cold

NOW = 1_600_000_000
DAY = 86400


def vrec(vid, release_ts, author="a1", product="p1", category="c1", tokens=("t1", "t2"), stats=None):
    return VideoRecord(
        video_id=vid,
        release_ts=release_ts,
        author_id=author,
        product_id=product,
        category_id=category,
        title_tokens=tuple(tokens),
        stats=stats or StatVector(0.1, 100.0, 60.0, 10.0, 30.0),
    )


def unit(vec):
    vec = np.asarray(vec, dtype=np.float64)
    return vec / np.linalg.norm(vec)


def random_units(rng, n, dim):
    vecs = rng.standard_normal((n, dim))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@dataclass
class ToyWorld:
    records: list
    users: list
    graph: object
    vocab: object
    cfg: NetConfig
    tables: FeatureTables
    cgs: list
    lookup: object
    impressions: list


def make_toy_world(seed=7, n_warm=6, n_cold=4, cap=3):
    """Tiny end-to-end world: graph, sampled neighbors, feature tables."""
    gen = np.random.default_rng(seed)
    records, vectors = [], {}
    token_pool = [f"tk{i}" for i in range(9)]
    for i in range(n_warm + n_cold):
        cold = i >= n_warm
        release = NOW - (1 + int(gen.integers(0, 2))) * DAY if cold else NOW - int(
            gen.integers(4, 40)
        ) * DAY
        picks = gen.choice(len(token_pool), size=int(gen.integers(1, 4)), replace=False)
        rec = vrec(
            f"v{i}",
            release,
            author=f"a{int(gen.integers(0, 3))}",
            product=f"p{int(gen.integers(0, 4))}",
            category=f"c{int(gen.integers(0, 2))}",
            tokens=tuple(token_pool[int(t)] for t in picks),
            stats=StatVector(
                float(gen.uniform(0, 0.5)),
                float(pv := gen.integers(10, 500)),
                float(gen.integers(0, pv)),
                float(gen.integers(0, int(pv * 0.5) + 1)),
                float(gen.uniform(1, 90)),
            ),
        )
        records.append(rec)
        vectors[rec.video_id] = unit(gen.standard_normal(8))
    graph, _ = build_graph(records, vectors, build_ts=NOW, semantic_k=cap)
    vocab = graph.vocab
    users = [UserRecord(f"u{i}", (float(gen.uniform(-1, 1)), float(gen.uniform(-1, 1)))) for i in range(3)]
    for user in users:
        vocab.add("user", user.user_id)
    cfg = NetConfig.from_vocab(
        vocab,
        hidden_dim=8,
        video_dim=6,
        product_dim=5,
        author_dim=4,
        category_dim=3,
        token_dim=4,
        user_dim=3,
        mlp_hidden=(8, 6),
        neighbor_cap=cap,
        behavior_cap=4,
        title_cap=3,
    )
    normalizer = StatNormalizer.fit(np.array([r.stats.as_tuple() for r in records]))
    tables = FeatureTables(cfg, vocab, normalizer, records, users)
    cgs = sample_all_cold(graph, cap=cap)
    by_row = {cg.target: cg for cg in cgs}
    lookup = lambda ext: by_row.get(vocab.lookup("video", ext))
    impressions = []
    warm_exts = [r.video_id for r in records[:n_warm]]
    for i in range(12):
        target = records[int(gen.integers(0, len(records)))].video_id
        behaviors = tuple(
            gen.choice(warm_exts, size=int(gen.integers(0, 4)), replace=False).tolist()
        )
        impressions.append(
            ImpressionLog(
                impression_id=f"imp{i}",
                user_id=f"u{int(gen.integers(0, 3))}",
                behaviors=behaviors,
                video_id=target,
                label=int(gen.integers(0, 2)),
                ts=NOW + i,
            )
        )
    return ToyWorld(records, users, graph, vocab, cfg, tables, cgs, lookup, impressions)


@pytest.fixture(scope="module")
def toy_world():
    return make_toy_world()
