import pytest

from graftctr.graph import Metapath
from graftctr.linkage import build_graph
from graftctr.sampling import (
    ComputationGraph,
    NeighborStore,
    sample_all_cold,
    sample_computation_graph,
    save_neighbor_store,
)
from graftctr.validation import ValidationError

from conftest import DAY, NOW, unit, vrec


def small_world(rng, n_extra_author=0):
    """Six-video fixture: one cold target, warm siblings at known release gaps."""
    records = [
        vrec("t", NOW - DAY, author="A", product="P"),
        vrec("w1", NOW - 5 * DAY, author="A", product="Q"),
        vrec("w2", NOW - 7 * DAY, author="A", product="P"),
        vrec("w3", NOW - 4 * DAY, author="B", product="P"),
        vrec("w4", NOW - 30 * DAY, author="A", product="R"),
        vrec("w5", NOW - 6 * DAY, author="C", product="S"),
    ]
    for i in range(n_extra_author):
        records.append(vrec(f"x{i}", NOW - (8 + i) * DAY, author="A", product=f"PX{i}"))
    vectors = {r.video_id: unit(rng.standard_normal(8)) for r in records}
    graph, _ = build_graph(records, vectors, build_ts=NOW, semantic_k=3)
    return graph


class TestSampler:
    def test_hand_enumerated_fixture(self, rng):
        g = small_world(rng)
        v = lambda ext: g.vocab.require("video", ext)
        cg = sample_computation_graph(g, v("t"), cap=20)
        # shared author A, ascending |release gap|: w1 (4d), w2 (6d), w4 (29d)
        assert cg.neighbor_ids("a") == (v("w1"), v("w2"), v("w4"))
        # shared product P: w3 (3d), w2 (6d)
        assert cg.neighbor_ids("p") == (v("w3"), v("w2"))
        # semantic: descending cosine among warm
        sem = g.semantic_neighbors(v("t"))
        assert cg.neighbor_ids("s") == tuple(dst for dst, _ in sem[:20])
        assert len(cg.own_attrs) == 8

    def test_cap_takes_closest_in_release_time(self, rng):
        g = small_world(rng, n_extra_author=22)  # author A now has 25 warm videos
        v = lambda ext: g.vocab.require("video", ext)
        cg = sample_computation_graph(g, v("t"), cap=20)
        assert len(cg.nbrs_a) == 20
        t_release = g.videos[v("t")].release_ts
        gaps = [abs(g.videos[n].release_ts - t_release) for n in cg.neighbor_ids("a")]
        assert gaps == sorted(gaps)
        all_gaps = sorted(
            abs(g.videos[n].release_ts - t_release)
            for n in g.metapath_neighbors(v("t"), Metapath.RHO_A, 2)
        )
        assert gaps == all_gaps[:20]

    def test_no_physical_neighbors_still_has_semantic(self, rng):
        records = [
            vrec("t", NOW - DAY, author="solo", product="only"),
            vrec("w1", NOW - 9 * DAY, author="other", product="different"),
        ]
        vectors = {r.video_id: unit(rng.standard_normal(8)) for r in records}
        g, _ = build_graph(records, vectors, build_ts=NOW, semantic_k=2)
        cg = sample_computation_graph(g, g.vocab.require("video", "t"))
        assert cg.nbrs_a == () and cg.nbrs_p == ()
        assert len(cg.nbrs_s) == 1

    def test_warm_target_rejected(self, rng):
        g = small_world(rng)
        with pytest.raises(ValidationError):
            sample_computation_graph(g, g.vocab.require("video", "w1"))

    def test_unknown_target_rejected(self, rng):
        g = small_world(rng)
        with pytest.raises(ValidationError):
            sample_computation_graph(g, 10**9)

    def test_all_neighbors_warm_and_target_absent(self, rng):
        g = small_world(rng)
        for cg in sample_all_cold(g):
            for path in ("a", "p", "s"):
                for vid in cg.neighbor_ids(path):
                    assert not g.is_cold_id(vid)
                    assert vid != cg.target


class TestNeighborStore:
    def store_for(self, g, tmp_path, cap=20):
        graphs = sample_all_cold(g, cap)
        path = tmp_path / "neighbors.tsv"
        save_neighbor_store(path, graphs, g.vocab)
        return graphs, NeighborStore(path, g.vocab)

    def test_round_trip_structural_equality(self, rng, tmp_path):
        g = small_world(rng)
        graphs, store = self.store_for(g, tmp_path)
        for cg in graphs:
            ext = g.vocab.external("video", cg.target)
            assert store.get(ext) == cg

    def test_missing_id_returns_none(self, rng, tmp_path):
        g = small_world(rng)
        _, store = self.store_for(g, tmp_path)
        assert store.get("nonexistent") is None
        assert "nonexistent" not in store

    def test_point_lookup_matches_linear_scan(self, rng, tmp_path):
        g = small_world(rng, n_extra_author=22)
        graphs, store = self.store_for(g, tmp_path, cap=5)
        by_scan = {cg.target: cg for cg in store}  # linear scan oracle
        for cg in graphs:
            ext = g.vocab.external("video", cg.target)
            assert store.get(ext) == by_scan[cg.target]

    def test_point_lookup_on_ten_thousand_entries(self, rng, tmp_path):
        from graftctr.vocab import Vocabulary

        vocab = Vocabulary()
        graphs = []
        for i in range(10_000):
            target = vocab.add("video", f"t{i}")
            nbrs = tuple(
                (vocab.add("video", f"n{i}_{j}"), (("stat:ctr_15d", float(j) / 10),))
                for j in range(int(rng.integers(0, 4)))
            )
            graphs.append(ComputationGraph(target, (), nbrs, (), (), cap=5))
        path = tmp_path / "big.tsv"
        save_neighbor_store(path, graphs, vocab)
        store = NeighborStore(path, vocab)
        by_scan = {cg.target: cg for cg in store}
        assert len(by_scan) == 10_000
        picks = rng.choice(10_000, size=200, replace=False)
        for i in picks:
            ext = f"t{int(i)}"
            assert store.get(ext) == by_scan[vocab.require("video", ext)]

    def test_byte_identical_across_runs(self, rng, tmp_path):
        g = small_world(rng)
        p1, p2 = tmp_path / "one.tsv", tmp_path / "two.tsv"
        save_neighbor_store(p1, sample_all_cold(g), g.vocab)
        save_neighbor_store(p2, sample_all_cold(g), g.vocab)
        assert p1.read_bytes() == p2.read_bytes()
        assert (tmp_path / "one.tsv.idx").read_bytes() == (tmp_path / "two.tsv.idx").read_bytes()

    def test_persisted_order_invariants(self, rng, tmp_path):
        # scan the persisted sequences: physical ascending time gap,
        # semantic descending cosine
        g = small_world(rng, n_extra_author=10)
        _, store = self.store_for(g, tmp_path)
        for cg in store:
            t_release = g.videos[cg.target].release_ts
            for path in ("a", "p"):
                gaps = [abs(g.videos[v].release_ts - t_release) for v in cg.neighbor_ids(path)]
                assert gaps == sorted(gaps)
            weights = dict(g.semantic_neighbors(cg.target))
            cosines = [weights[v] for v in cg.neighbor_ids("s")]
            assert cosines == sorted(cosines, reverse=True)

    def test_dump_is_human_readable(self, rng, tmp_path, capsys):
        import sys

        g = small_world(rng)
        _, store = self.store_for(g, tmp_path)
        store.dump(sys.stdout)
        out = capsys.readouterr().out
        assert "target=t" in out and "author=A" in out


class TestComputationGraphInvariants:
    def test_cap_violation_rejected(self):
        entries = tuple((i, ()) for i in range(3))
        with pytest.raises(ValidationError):
            ComputationGraph(99, (), entries, (), (), cap=2)

    def test_duplicate_neighbor_rejected(self):
        entries = ((1, ()), (1, ()))
        with pytest.raises(ValidationError):
            ComputationGraph(99, (), entries, (), (), cap=5)

    def test_target_in_list_rejected(self):
        with pytest.raises(ValidationError):
            ComputationGraph(1, (), ((1, ()),), (), (), cap=5)
