import math

import numpy as np
import pytest

from graftctr.features import AblationMask, assemble
from graftctr.network import (
    bce_loss,
    embed_target,
    forward,
    fuse,
    gelu,
    predict_ctr,
    target_attention,
    transfer_h2,
    transfer_h3,
)
from graftctr.params import ModelParams
from graftctr.sampling import ComputationGraph
from graftctr.validation import ValidationError

from conftest import NOW, make_toy_world


@pytest.fixture(scope="module")
def world():
    return make_toy_world()


@pytest.fixture(scope="module")
def params(world):
    return ModelParams.init(world.cfg, seed=11)


# -- independent dense-math oracle -------------------------------------


def softmax_scalar(scores):
    exps = [math.exp(s) for s in scores]
    total = sum(exps)
    return [e / total for e in exps]


def oracle_raw(params, tables, row):
    """Straight-line featurization of one video, no masking machinery."""
    cfg = params.cfg
    parts = [
        params["emb/video"][row],
        params["emb/product"][tables.product_idx[row]],
        params["emb/author"][tables.author_idx[row]],
        params["emb/category"][tables.category_idx[row]],
    ]
    cnt = int(tables.token_cnt[row])
    if cnt:
        toks = tables.tokens[row, :cnt]
        parts.append(sum(params["emb/token"][t] for t in toks) / cnt)
    else:
        parts.append(np.zeros(cfg.token_dim))
    parts.append(tables.stats_norm[row])
    return np.concatenate(parts)


def oracle_attention(params, head, q, rows_h):
    WQ = params[f"attn/{head}/WQ"]
    WK = params[f"attn/{head}/WK"]
    WV = params[f"attn/{head}/WV"]
    if not rows_h:
        return np.zeros_like(q)
    qp = q @ WQ
    scores = [float(qp @ (x @ WK)) / math.sqrt(len(q)) for x in rows_h]
    weights = softmax_scalar(scores)
    out = np.zeros_like(q)
    for w, x in zip(weights, rows_h):
        out = out + w * (x @ WV)
    return out


def oracle_h2(params, tables, cg):
    q = oracle_raw(params, tables, cg.target) @ params["item_proj/W"] + params["item_proj/b"]
    sl = params.cfg.block_slices()
    seen, rows = set(), []
    for path in ("a", "p", "s"):
        for vid in cg.neighbor_ids(path):
            if vid not in seen:
                seen.add(vid)
                rows.append(
                    params["emb/video"][vid] @ params["item_proj/W"][sl["video"]]
                    + params["item_proj/b"]
                )
    return oracle_attention(params, "h2", q, rows)


def oracle_h3(params, tables, cg):
    q = oracle_raw(params, tables, cg.target) @ params["item_proj/W"] + params["item_proj/b"]
    parts = []
    for path in ("a", "p", "s"):
        rows = [
            oracle_raw(params, tables, vid) @ params["item_proj/W"] + params["item_proj/b"]
            for vid in cg.neighbor_ids(path)
        ]
        parts.append(oracle_attention(params, f"h3_{path}", q, rows))
    return np.concatenate(parts)


# -- target attention ---------------------------------------------------


class TestTargetAttention:
    def test_singleton_returns_the_value(self, rng):
        d = 4
        q, k, v = rng.standard_normal((3, d))
        np.testing.assert_allclose(target_attention(q, k[None], v[None]), v, atol=1e-12)

    def test_identical_keys_average_values(self, rng):
        d = 4
        q, k, v1, v2 = rng.standard_normal((4, d))
        out = target_attention(q, np.stack([k, k]), np.stack([v1, v2]))
        np.testing.assert_allclose(out, (v1 + v2) / 2, atol=1e-12)

    def test_two_key_example(self):
        # d=2: scores are (1/sqrt(2), 0); weights from an independently
        # evaluated scalar softmax
        q = np.array([1.0, 0.0])
        keys = np.array([[1.0, 0.0], [0.0, 1.0]])
        w1 = math.exp(1 / math.sqrt(2)) / (math.exp(1 / math.sqrt(2)) + 1.0)
        out = target_attention(q, keys, keys)
        np.testing.assert_allclose(out, [w1, 1.0 - w1], atol=1e-12)
        assert abs(w1 - 0.6698) < 5e-4

    def test_weights_sum_to_one_and_permutation_invariance(self, rng):
        d = 6
        q = rng.standard_normal(d)
        keys = rng.standard_normal((5, d))
        values = rng.standard_normal((5, d))
        out = target_attention(q, keys, values)
        perm = rng.permutation(5)
        out_p = target_attention(q, keys[perm], values[perm])
        np.testing.assert_allclose(out, out_p, atol=1e-12)

    def test_equal_keys_give_value_mean_for_any_dimension(self, rng):
        for d in (2, 8, 32):
            q = rng.standard_normal(d)
            k = rng.standard_normal(d)
            values = rng.standard_normal((4, d))
            out = target_attention(q, np.tile(k, (4, 1)), values)
            np.testing.assert_allclose(out, values.mean(axis=0), atol=1e-12)

    def test_all_masked_returns_zero(self, rng):
        d = 4
        q = rng.standard_normal(d)
        keys = rng.standard_normal((3, d))
        out = target_attention(q, keys, keys, mask=np.zeros(3, dtype=bool))
        np.testing.assert_array_equal(out, np.zeros(d))

    def test_appending_masked_slots_never_changes_output(self, rng):
        d = 8
        q = rng.standard_normal(d)
        keys = rng.standard_normal((4, d))
        values = rng.standard_normal((4, d))
        out = target_attention(q, keys, values)
        pad = rng.standard_normal((3, d))
        mask = np.array([True] * 4 + [False] * 3)
        out_padded = target_attention(
            q, np.vstack([keys, pad]), np.vstack([values, pad]), mask=mask
        )
        np.testing.assert_allclose(out, out_padded, atol=1e-9)

    def test_dimension_mismatch_rejected(self, rng):
        with pytest.raises(ValidationError):
            target_attention(rng.standard_normal(4), rng.standard_normal((3, 4)),
                             rng.standard_normal((2, 4)))


# -- embedding / transfer ops -------------------------------------------


class TestEmbedTarget:
    def test_deterministic_and_correct_dimension(self, world, params):
        row = world.vocab.require("video", "v0")
        a = embed_target(params, world.tables, row)
        b = embed_target(params, world.tables, row)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (world.cfg.hidden_dim,)

    def test_matches_oracle(self, world, params):
        for ext in ("v0", "v7"):
            row = world.vocab.require("video", ext)
            expected = (
                oracle_raw(params, world.tables, row) @ params["item_proj/W"]
                + params["item_proj/b"]
            )
            np.testing.assert_allclose(embed_target(params, world.tables, row), expected, atol=1e-12)

    def test_stats_change_the_representation(self, world, params):
        row = world.vocab.require("video", "v0")
        before = embed_target(params, world.tables, row)
        old = world.tables.stats_norm[row, 0]
        world.tables.stats_norm[row, 0] = old + 1.0
        try:
            after = embed_target(params, world.tables, row)
        finally:
            world.tables.stats_norm[row, 0] = old
        assert not np.allclose(before, after)


class TestTransferHeads:
    def cold_cg(self, world):
        return next(cg for cg in world.cgs if cg.nbrs_a and cg.nbrs_p and cg.nbrs_s)

    def test_h2_empty_neighbors_zero(self, world, params):
        empty = ComputationGraph.empty(world.cgs[0].target, cap=world.cfg.neighbor_cap)
        np.testing.assert_array_equal(
            transfer_h2(params, world.tables, empty), np.zeros(world.cfg.hidden_dim)
        )

    def test_h2_singleton_is_projected_value_row(self, world, params):
        cg = self.cold_cg(world)
        vid = cg.nbrs_a[0][0]
        single = ComputationGraph(cg.target, cg.own_attrs, (cg.nbrs_a[0],), (), (), cg.cap)
        sl = world.cfg.block_slices()
        row = (
            params["emb/video"][vid] @ params["item_proj/W"][sl["video"]]
            + params["item_proj/b"]
        )
        expected = row @ params["attn/h2/WV"]
        np.testing.assert_allclose(transfer_h2(params, world.tables, single), expected, atol=1e-12)

    def test_h2_matches_dense_oracle(self, world, params):
        for cg in world.cgs:
            np.testing.assert_allclose(
                transfer_h2(params, world.tables, cg),
                oracle_h2(params, world.tables, cg),
                atol=1e-10,
            )

    def test_h3_matches_dense_oracle(self, world, params):
        for cg in world.cgs:
            np.testing.assert_allclose(
                transfer_h3(params, world.tables, cg),
                oracle_h3(params, world.tables, cg),
                atol=1e-10,
            )

    def test_h3_empty_is_zero_vector_of_length_3d(self, world, params):
        empty = ComputationGraph.empty(world.cgs[0].target, cap=world.cfg.neighbor_cap)
        out = transfer_h3(params, world.tables, empty)
        np.testing.assert_array_equal(out, np.zeros(3 * world.cfg.hidden_dim))

    def test_h3_semantic_only_zeroes_physical_blocks(self, world, params):
        cg = self.cold_cg(world)
        sem_only = ComputationGraph(cg.target, cg.own_attrs, (), (), cg.nbrs_s, cg.cap)
        out = transfer_h3(params, world.tables, sem_only)
        d = world.cfg.hidden_dim
        np.testing.assert_array_equal(out[: 2 * d], np.zeros(2 * d))
        assert np.any(out[2 * d :] != 0)


class TestFuse:
    def test_zero_transfer_still_defined(self, world, params):
        d = world.cfg.hidden_dim
        h_t = np.linspace(-1, 1, d)
        out = fuse(params, h_t, np.zeros(d), np.zeros(3 * d))
        assert out.shape == (d,)
        assert np.all(np.isfinite(out))

    def test_matches_oracle(self, world, params, rng):
        d = world.cfg.hidden_dim
        h_t, h2 = rng.standard_normal((2, d))
        h3 = rng.standard_normal(3 * d)
        z = np.concatenate([h_t, h2, h3])
        expected = gelu(z @ params["fuse/W"] + params["fuse/b"])
        np.testing.assert_allclose(fuse(params, h_t, h2, h3), expected, atol=1e-12)


class TestPredict:
    def test_probability_in_open_interval(self, world, params):
        for imp in world.impressions:
            p = predict_ctr(params, world.tables, imp, world.lookup)
            assert 0.0 < p < 1.0

    def test_empty_behaviors_ok(self, world, params):
        imp = world.impressions[0]
        bare = type(imp)(imp.impression_id, imp.user_id, (), imp.video_id, imp.label, imp.ts)
        assert 0.0 < predict_ctr(params, world.tables, bare, world.lookup) < 1.0

    def test_bit_identical_across_runs(self, world, params):
        imp = world.impressions[3]
        a = predict_ctr(params, world.tables, imp, world.lookup)
        b = predict_ctr(params, world.tables, imp, world.lookup)
        assert a == b

    def test_unknown_ids_fall_back_to_oov(self, world, params):
        imp = world.impressions[0]
        alien = type(imp)("x", "nobody", ("ghost",), "phantom", 0, NOW)
        p = predict_ctr(params, world.tables, alien, lambda _: None)
        assert 0.0 < p < 1.0


class TestLoss:
    def test_perfect_prediction_loss_vanishes(self):
        assert bce_loss(np.array([1 - 1e-12]), np.array([1.0])) < 1e-9

    def test_half_probability_is_ln2(self):
        assert abs(bce_loss(np.array([0.5]), np.array([1.0])) - math.log(2)) < 1e-12

    def test_probabilities_outside_open_interval_rejected(self):
        with pytest.raises(ValidationError):
            bce_loss(np.array([0.0]), np.array([0.0]))
        with pytest.raises(ValidationError):
            bce_loss(np.array([1.0]), np.array([1.0]))


class TestBatchForward:
    def test_masked_composition_matches_singles(self, world, params):
        batch = assemble(world.tables, world.impressions, world.lookup)
        _, probs, _ = forward(params, world.tables, batch)
        for i, imp in enumerate(world.impressions):
            single = predict_ctr(params, world.tables, imp, world.lookup)
            assert abs(single - probs[i]) < 1e-9

    def test_ablation_base_mask_zeroes_transfer(self, world, params):
        mask = AblationMask(drop_h2=True, drop_h3=True)
        batch = assemble(world.tables, world.impressions, world.lookup, mask)
        assert not batch.e2_mask.any()
        for key in ("a", "p", "s"):
            assert not batch.e3_mask[key].any()
