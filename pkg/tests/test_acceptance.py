"""End-to-end acceptance criteria, one test per criterion.

Each test prints a ``[PASS]`` line on success; run with ``pytest
tests/test_acceptance.py -v -s`` to see them.  The training-based
criteria share one module fixture that builds the default synthetic
world and trains the transfer model and the transfer-free base model
over three seeds (two-phase protocol each).
"""

import json
import socket
import time
from dataclasses import replace

import numpy as np
import pytest

from graftctr.data import ImpressionLog, StatVector
from graftctr.evaluation import compute_auc, evaluate_auc, rela_impr
from graftctr.features import (
    BASE_MODEL_MASK,
    AblationMask,
    FeatureTables,
    StatNormalizer,
    assemble,
)
from graftctr.graph import AttributeNode, HeteroGraph, Metapath, VideoNode, attr_node_id
from graftctr.linkage import CosineKnnIndex, build_graph, knn_search
from graftctr.network import forward, predict_ctr
from graftctr.params import NetConfig
from graftctr.sampling import sample_all_cold
from graftctr.serving import BenchConfig, CtrServer, ScoringContext, make_workload, run_workload
from graftctr.synthetic import SyntheticWorldConfig, generate_world
from graftctr.training import TrainConfig, finetune, pretrain
from graftctr.vocab import Vocabulary

from conftest import DAY, NOW, make_toy_world
from test_evaluation import pairwise_auc
from test_gradients import check_all_blocks
from test_linkage import brute_force_knn


def note(text):
    print(f"\n[PASS] {text}")


# -- shared heavy fixture: default world, 3 seeds, 2 models ---------------

ACCEPT_SEEDS = (0, 1, 2)
NET_OVERRIDES = dict(
    hidden_dim=32, mlp_hidden=(128, 64, 32), neighbor_cap=20, behavior_cap=20, title_cap=6
)
TRAIN_DEFAULTS = dict(learning_rate=0.05, batch_size=512, pretrain_epochs=1, finetune_epochs=1)


@pytest.fixture(scope="module")
def trained_world():
    world = generate_world(SyntheticWorldConfig(seed=0))
    graph, _ = build_graph(world.videos, world.vectors, build_ts=world.config.now, semantic_k=20)
    coverage = graph.coverage_stats()
    vocab = graph.vocab
    cgs = {cg.target: cg for cg in sample_all_cold(graph, cap=20)}
    lookup = lambda ext: cgs.get(vocab.lookup("video", ext))
    for user in world.users:
        vocab.add("user", user.user_id)
    cfg = NetConfig.from_vocab(vocab, **NET_OVERRIDES)
    normalizer = StatNormalizer.fit(np.array([v.stats.as_tuple() for v in world.videos]))
    tables = FeatureTables(cfg, vocab, normalizer, world.videos, world.users)

    results = {}
    for mask_name, mask in (("full", AblationMask()), ("base", BASE_MODEL_MASK)):
        for seed in ACCEPT_SEEDS:
            config = TrainConfig(seed=seed, ablation=mask, **TRAIN_DEFAULTS)
            pre, metrics = pretrain(world.d_full, tables, lookup, config, world.config.now)
            tuned, _ = finetune(pre, world.d_cold, tables, lookup, config, world.config.now)
            results[(mask_name, seed)] = {
                "pre_auc": evaluate_auc(pre, tables, world.d_test, lookup, mask),
                "ft_auc": evaluate_auc(tuned, tables, world.d_test, lookup, mask),
                "checkpoint": tuned,
                "metrics": metrics,
            }
    return {
        "world": world,
        "graph": graph,
        "coverage": coverage,
        "tables": tables,
        "lookup": lookup,
        "results": results,
    }


# -- criteria --------------------------------------------------------------


class TestRelativeImprovementReproduction:
    def test_reference_auc_pairs(self):
        cases = [
            ((0.7670, 0.7568), 3.97),
            ((0.7693, 0.7568), 4.87),
            ((0.7218, 0.7568), -13.63),
        ]
        for (measured, base), expected in cases:
            got = rela_impr(measured, base)
            assert abs(got - expected) <= 0.01, (measured, base, got)
        note("relative-improvement reproduction: three reference pairs within 0.01pp")


class TestMetapathDefinitionFixture:
    def test_six_node_fixture(self):
        stats = StatVector(0.1, 10.0, 5.0, 1.0, 2.0)
        g = HeteroGraph(build_ts=NOW, vocab=Vocabulary())
        vt, v1, v2, v3 = 1, 2, 3, 4
        g.add_video(VideoNode(vt, NOW - DAY, 0, 0, 0, (), stats))
        for v in (v1, v2, v3):
            g.add_video(VideoNode(v, NOW - 10 * DAY, 0, 0, 0, (), stats))
        a1 = AttributeNode(attr_node_id("author", 1), "author", 1.0)
        a2 = AttributeNode(attr_node_id("author", 2), "author", 2.0)
        g.add_physical_edge(vt, a1)
        g.add_physical_edge(vt, a2)
        g.add_physical_edge(v1, a1)
        g.add_physical_edge(v2, a1)
        g.add_physical_edge(v2, a2)
        g.add_physical_edge(v3, a2)
        g.freeze()
        assert g.metapath_neighbors(vt, Metapath.RHO_A, 1) == {a1.node_id, a2.node_id}
        assert g.metapath_neighbors(vt, Metapath.RHO_A, 2) == {v1, v2, v3}
        assert g.metapath_neighbors(vt, Metapath.RHO_A, 0) == {vt}
        note("metapath definition fixture: N1={a1,a2}, N2={v1,v2,v3} reproduced")


class TestGradientCorrectness:
    def test_twenty_seeds_toy_config(self):
        started = time.time()
        failures = []
        for seed in range(20):
            world = make_toy_world(seed=1000 + seed)
            failures += check_all_blocks(world, seed=seed)
        elapsed = time.time() - started
        assert not failures, failures[:5]
        assert elapsed < 120, f"gradient check took {elapsed:.0f}s"
        note(
            f"gradient correctness: all parameter blocks pass central differences "
            f"over 20 seeds in {elapsed:.0f}s"
        )


class TestKnnOracleEquivalence:
    def test_thousand_vectors_hundred_queries(self):
        rng = np.random.default_rng(7)
        n, dim, k = 1000, 64, 20
        vecs = rng.standard_normal((n, dim))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        ids = rng.permutation(n) + 1
        eligible = np.ones(n, dtype=bool)
        index = CosineKnnIndex(ids, vecs, eligible)
        for q in range(100):
            query = rng.standard_normal(dim)
            query /= np.linalg.norm(query)
            assert knn_search(index, query, k) == brute_force_knn(ids, vecs, eligible, query, k)
        note("knn oracle equivalence: 100 queries over 1000 vectors, exact list equality")


class TestAucOracleEquivalence:
    def test_fifty_random_fixtures(self):
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 50:
            scores = rng.integers(0, 25, 200).astype(np.float64) / 9.0
            labels = (rng.random(200) < 0.35).astype(np.int64)
            if labels.sum() in (0, 200):
                continue
            assert compute_auc(scores, labels) == pairwise_auc(scores, labels)
            checked += 1
        note("auc oracle equivalence: 50 tied fixtures match the pairwise count exactly")


class TestPlantedStructureLift:
    def test_full_model_beats_base_by_margin(self, trained_world):
        results = trained_world["results"]
        lifts = [
            results[("full", s)]["ft_auc"] - results[("base", s)]["ft_auc"] for s in ACCEPT_SEEDS
        ]
        median_lift = float(np.median(lifts))
        detail = ", ".join(
            f"seed{s}: {results[('full', s)]['ft_auc']:.4f} vs {results[('base', s)]['ft_auc']:.4f}"
            for s in ACCEPT_SEEDS
        )
        assert median_lift >= 0.01, f"median lift {median_lift:.4f} ({detail})"
        note(f"planted-structure lift: median +{median_lift:.4f} AUC over base ({detail})")


class TestFinetuneDirection:
    def test_finetuned_not_worse_than_pretrained(self, trained_world):
        results = trained_world["results"]
        gains = [
            results[("full", s)]["ft_auc"] - results[("full", s)]["pre_auc"] for s in ACCEPT_SEEDS
        ]
        median_gain = float(np.median(gains))
        assert median_gain >= 0.0, f"median fine-tune gain {median_gain:.4f}"
        note(f"fine-tune direction: median gain +{median_gain:.4f} AUC over pretrain-only")

    def test_pretrain_loss_decreases_across_epochs(self, trained_world):
        # two-epoch run on the same world, checking mean epoch losses
        world = trained_world["world"]
        tables = trained_world["tables"]
        lookup = trained_world["lookup"]
        config = TrainConfig(seed=0, ablation=AblationMask(), **{**TRAIN_DEFAULTS, "pretrain_epochs": 2})
        _, metrics = pretrain(world.d_full, tables, lookup, config, world.config.now)
        half = len(metrics) // 2
        first = float(np.mean([loss for _, loss in metrics[:half]]))
        second = float(np.mean([loss for _, loss in metrics[half:]]))
        assert second < first
        note(f"training loss decreases: epoch means {first:.4f} -> {second:.4f}")


class TestCoverageClaim:
    def test_default_world_physical_coverage(self, trained_world):
        coverage = trained_world["coverage"]
        assert coverage.cold_count == 500
        assert coverage.physical_fraction >= 0.95
        note(
            f"coverage analog: {coverage.physical_fraction:.4f} of cold videos reach a warm "
            f"video via a physical two-hop"
        )


class TestAblationEquivalence:
    def test_base_mask_bitwise_equivalence_and_composition(self):
        world = make_toy_world(seed=77)
        config = TrainConfig(
            learning_rate=0.05, batch_size=8, pretrain_epochs=1, seed=0, ablation=BASE_MODEL_MASK
        )
        ck_base, _ = pretrain(world.impressions, world.tables, world.lookup, config, NOW)
        composed = AblationMask(drop_h2=True).union(AblationMask(drop_h3=True))
        config2 = replace(config, ablation=composed)
        ck_composed, _ = pretrain(world.impressions, world.tables, world.lookup, config2, NOW)
        assert ck_base.params.allclose(ck_composed.params)
        batch_a = assemble(world.tables, world.impressions, world.lookup, BASE_MODEL_MASK)
        batch_b = assemble(world.tables, world.impressions, world.lookup, composed)
        _, p_a, _ = forward(ck_base.params, world.tables, batch_a)
        _, p_b, _ = forward(ck_composed.params, world.tables, batch_b)
        np.testing.assert_array_equal(p_a, p_b)
        # composition is order independent
        other = AblationMask(drop_h3=True).union(AblationMask(drop_h2=True))
        assert composed == other
        note("ablation equivalence: base == {drop_h2, drop_h3} bit-identically; union commutes")


class TestOfflineOnlineEquivalence:
    def test_daemon_matches_library_on_seeded_workload(self, trained_world):
        tables = trained_world["tables"]
        lookup = trained_world["lookup"]
        checkpoint = trained_world["results"][("full", 0)]["checkpoint"]
        context = ScoringContext(checkpoint, tables, lookup)
        vocab = tables.vocab
        users = [vocab.external("user", i) for i in range(1, min(vocab.size("user"), 200))]
        videos = [vocab.external("video", i) for i in range(1, vocab.size("video"))]
        bench_config = BenchConfig(
            n_requests=1000, candidates_per_request=4, behaviors_per_request=6, seed=0
        )
        requests = make_workload(bench_config, users, videos)
        server = CtrServer(context).start_background()
        try:
            replies = []
            with socket.create_connection(("127.0.0.1", server.port), timeout=120) as conn:
                reader = conn.makefile("r")
                for request in requests:
                    conn.sendall((json.dumps(request) + "\n").encode())
                    replies.append(json.loads(reader.readline()))
            mismatches = 0
            for request, reply in zip(requests, replies):
                for candidate, got in zip(request["candidates"], reply["scores"]):
                    imp = ImpressionLog(
                        "oracle", request["user"], tuple(request["behaviors"]), candidate, 0, 1
                    )
                    expected = predict_ctr(checkpoint.params, tables, imp, lookup)
                    if got != f"{expected:.6f}":
                        mismatches += 1
            assert mismatches == 0
            latency = run_workload("127.0.0.1", server.port, requests[:200], concurrency=2)
        finally:
            server.stop()
        note(
            "offline/online equivalence: 1000 requests exact at wire precision; latency "
            f"p50={latency.p50_micros:.0f}us p95={latency.p95_micros:.0f}us "
            f"p99={latency.p99_micros:.0f}us ({latency.requests_per_second:.0f} req/s, informational)"
        )
