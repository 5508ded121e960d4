import numpy as np
import pytest

from _oracles import (naive_consistency, naive_mean_consistency,
                      random_score_matrix)
from stancekg.consistency import (ConsistencyTable, ScoreMatrix,
                                  ThresholdTable, assign_stance,
                                  calibrate_thresholds, consistency_level1,
                                  consistency_table, depth_scores,
                                  extend_consistency, infer, mean_consistency,
                                  pairwise_scores, sweep_threshold)
from stancekg.encoders import EmbeddingStore
from stancekg.errors import UndefinedConsistencyError
from stancekg.graph import (MisinfoTarget, RelationType, StanceLabel,
                            build_stance_graph)
from stancekg.scoring import (EntityEmbedding, ModelExtras, RelationEmbedding,
                              ScoringModel, score)
from stancekg.trainer import TrainConfig, init_model_state

A, R, N = StanceLabel.ACCEPT, StanceLabel.REJECT, StanceLabel.NO_STANCE


def matrix_from(f_graph, f_pool, stances):
    f_graph = np.asarray(f_graph, dtype=float)
    f_pool = np.asarray(f_pool, dtype=float)
    return ScoreMatrix(mist_id="m",
                       pool_ids=[f"x{i}" for i in range(f_graph.shape[0])],
                       graph_ids=[f"y{j}" for j in range(f_graph.shape[1])],
                       graph_stances=list(stances), f_graph=f_graph, f_pool=f_pool)


class TestPairwiseScores:
    def setup(self, n_pool=2, n_graph=3, kind=ScoringModel.TRANSE, seed=31):
        rng = np.random.default_rng(seed)
        dim_in = 6
        mist = MisinfoTarget(id="m1", text="claim")
        nodes = [(f"g{j}", A if j % 2 else R) for j in range(n_graph)]
        graph = build_stance_graph("m1", nodes)
        pool = [f"u{i}" for i in range(n_pool)]
        store = EmbeddingStore(dim=dim_in)
        for key in ["m1"] + [t for t, _ in nodes] + pool:
            store.add(key, rng.normal(size=dim_in))
        state = init_model_state(kind, dim_in, 4, ["m1"], rng)
        return state, store, mist, graph, pool

    def test_empty_pool(self):
        state, store, mist, graph, _ = self.setup()
        m = pairwise_scores(state, store, mist, graph, [])
        assert m.f_graph.shape == (0, 3, 2)
        assert m.f_pool.shape == (0, 0, 2)

    def test_constant_zero_model_propagates(self):
        state, store, mist, graph, pool = self.setup()
        for name in state.params:
            state.params[name][:] = 0.0  # all-zero weights score every pair 0
        m = pairwise_scores(state, store, mist, graph, pool)
        assert np.all(m.f_graph == 0.0)
        assert np.all(m.f_pool == 0.0)

    @pytest.mark.parametrize("kind", list(ScoringModel))
    def test_grid_matches_per_triple_scores(self, kind):
        from stancekg.encoders import encode_mist, encode_tweet
        state, store, mist, graph, pool = self.setup(kind=kind)
        m = pairwise_scores(state, store, mist, graph, pool)
        weights = state.projection
        extras = state.extras()
        me = dict(zip(RelationType, encode_mist(weights, store.get("m1"), "m1")))
        for i, tid in enumerate(pool):
            te_x = encode_tweet(weights, store.get(tid))
            for j, (gid, _) in enumerate(graph.nodes):
                te_y = encode_tweet(weights, store.get(gid))
                for rel, axis in ((RelationType.AGREE, 0), (RelationType.DISAGREE, 1)):
                    direct = score(kind, te_x, me[rel], te_y, extras)
                    assert m.f_graph[i, j, axis] == pytest.approx(direct, abs=1e-9)


class TestLevelOne:
    def test_single_node_mean(self):
        m = matrix_from([[[2.0, 9.0]]], np.zeros((1, 1, 2)), [A])
        assert consistency_level1(m, "x0", A) == 2.0
        assert consistency_level1(m, "x0", R) == 9.0

    def test_two_node_average(self):
        # agree score 3 with the Accept node, disagree score 1 with the Reject node
        f_graph = [[[3.0, -7.0], [5.0, 1.0]]]
        m = matrix_from(f_graph, np.zeros((1, 1, 2)), [A, R])
        assert consistency_level1(m, "x0", A) == pytest.approx((3.0 + 1.0) / 2)
        assert consistency_level1(m, "x0", R) == pytest.approx((-7.0 + 5.0) / 2)

    def test_empty_graph_undefined(self):
        m = matrix_from(np.zeros((1, 0, 2)), np.zeros((1, 1, 2)), [])
        with pytest.raises(UndefinedConsistencyError):
            consistency_level1(m, "x0", A)


class TestChainLevels:
    def test_two_tweet_recursion(self):
        # one partner z: level-2 sums both stance hypotheses for z
        f_pool = np.zeros((2, 2, 2))
        f_pool[0, 1] = [0.5, 0.25]  # agree, disagree scores between x0 and x1
        f_pool[1, 0] = [0.5, 0.25]
        f_graph = np.zeros((2, 1, 2))
        f_graph[1, 0] = [1.0, 2.0]  # makes level1(x1) = (1, 2)
        m = matrix_from(f_graph, f_pool, [A])
        table = consistency_table(m, depth=2)
        assert table.value(1, 1, A) == 1.0 and table.value(1, 1, R) == 2.0
        # (1 + 0.5) + (2 + 0.25) = 3.75 for Accept; same for Reject
        assert table.value(2, 0, A) == pytest.approx(3.75)
        assert table.value(2, 0, R) == pytest.approx(3.75)
        assert table.value(2, 0, A) == pytest.approx(
            naive_consistency(m, 2, 0, A))

    def test_constant_scores_symmetry(self):
        # constant pair score c and constant level-1 value a give 2(a + c)
        n, a, c = 5, 1.5, 0.25
        f_graph = np.full((n, 2, 2), a)  # every level-1 mean is a
        f_pool = np.full((n, n, 2), c)
        for i in range(n):
            f_pool[i, i] = 0.0
        m = matrix_from(f_graph, f_pool, [A, R])
        table = consistency_table(m, depth=2)
        for x in range(n):
            for s in (A, R):
                assert table.value(2, x, s) == pytest.approx(2 * (a + c))

    def test_matches_naive_recursion(self):
        rng = np.random.default_rng(41)
        for _ in range(25):
            n_pool = int(rng.integers(2, 7))
            n_graph = int(rng.integers(1, 5))
            m = random_score_matrix(rng, n_pool, n_graph)
            depth = int(rng.integers(2, 4))
            table = consistency_table(m, depth)
            for level in range(1, depth + 1):
                for x in range(n_pool):
                    for s in (A, R):
                        assert table.value(level, x, s) == pytest.approx(
                            naive_consistency(m, level, x, s), abs=1e-9)

    def test_levels_above_one_are_stance_symmetric(self):
        rng = np.random.default_rng(42)
        m = random_score_matrix(rng, 6, 3)
        table = consistency_table(m, depth=5)
        for level in range(2, 6):
            for x in range(6):
                assert abs(table.value(level, x, A) - table.value(level, x, R)) <= 1e-12

    def test_single_pool_tweet_stays_level_one(self):
        rng = np.random.default_rng(43)
        m = random_score_matrix(rng, 1, 3)
        table = consistency_table(m, depth=8)
        assert table.max_level() == 1
        assert mean_consistency(table, 0, A, 8) == table.value(1, 0, A)


class TestMeanConsistency:
    def test_depth_one_equals_level_one(self):
        rng = np.random.default_rng(44)
        m = random_score_matrix(rng, 3, 2)
        table = consistency_table(m, depth=1)
        for x in range(3):
            assert mean_consistency(table, x, A, 1) == consistency_level1(m, f"x{x}", A)

    def test_two_level_mean(self):
        table = ConsistencyTable(levels=[np.array([[2.0, 2.0]]),
                                         np.array([[4.0, 4.0]])])
        assert mean_consistency(table, 0, A, 2) == 3.0

    def test_matches_naive_full_recomputation(self):
        rng = np.random.default_rng(45)
        for _ in range(10):
            m = random_score_matrix(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)))
            table = consistency_table(m, depth=3)
            for x in range(len(m.pool_ids)):
                for s in (A, R):
                    assert mean_consistency(table, x, s, 3) == pytest.approx(
                        naive_mean_consistency(m, 3, x, s), abs=1e-9)

    def test_depth_argmax_invariance(self):
        rng = np.random.default_rng(46)
        for _ in range(25):
            m = random_score_matrix(rng, int(rng.integers(2, 7)), int(rng.integers(1, 5)))
            table = consistency_table(m, depth=6)
            acc1, rej1 = depth_scores(table, 1)
            for depth in (2, 4, 6):
                acc, rej = depth_scores(table, depth)
                for x in range(len(m.pool_ids)):
                    if acc1[x] != rej1[x]:
                        assert (acc[x] > rej[x]) == (acc1[x] > rej1[x])

    def test_uniform_shift_moves_levels_by_closed_form(self):
        # shifting every pair score by c shifts level l by s_l, where
        # s_1 = c and s_l = 2 * (s_{l-1} + c)
        rng = np.random.default_rng(47)
        m = random_score_matrix(rng, 4, 3)
        c = 0.75
        shifted = matrix_from(m.f_graph + c, m.f_pool + c, m.graph_stances)
        for i in range(4):
            shifted.f_pool[i, i] = 0.0
        t0 = consistency_table(m, depth=4)
        t1 = consistency_table(shifted, depth=4)
        shift = c
        for level in range(1, 5):
            for x in range(4):
                got = t1.value(level, x, A) - t0.value(level, x, A)
                assert got == pytest.approx(shift, abs=1e-9)
                naive = (naive_consistency(shifted, level, x, A)
                         - naive_consistency(m, level, x, A))
                assert naive == pytest.approx(shift, abs=1e-9)
            shift = 2 * (shift + c)


class TestAssignStance:
    @pytest.mark.parametrize("acc,rej,t,expect", [
        (5.0, 3.0, 4.0, A),
        (3.5, 3.0, 4.0, N),
        (2.0, 2.0, 1.0, A),   # exact tie breaks toward Accept
        (3.0, 5.0, 4.0, R),
        (4.0, 4.0, 4.0, N),   # boundary is inclusive
    ])
    def test_examples(self, acc, rej, t, expect):
        assert assign_stance(acc, rej, t) is expect

    def test_no_stance_iff_below_threshold(self):
        rng = np.random.default_rng(48)
        for _ in range(300):
            acc, rej, t = rng.normal(size=3) * 5
            got = assign_stance(acc, rej, t)
            assert (got is N) == (max(acc, rej) <= t)


class TestSweepThreshold:
    def test_gap_midpoint(self):
        # NoStance pairs score below 1, stance pairs above 2: midpoint of the gap
        pairs = [(0.4, 0.1), (0.9, 0.3), (2.5, 0.2), (0.1, 3.0)]
        golds = [N, N, A, R]
        t = sweep_threshold(pairs, golds)
        assert 0.9 < t < 2.5
        assert t == pytest.approx((0.9 + 2.5) / 2)

    def test_single_accept_pair(self):
        t = sweep_threshold([(4.0, 1.0)], [A])
        assert t < 4.0

    def test_prefers_smallest_on_ties(self):
        # all gold carry stance: every threshold below min scores is equally good
        pairs = [(5.0, 1.0), (6.0, 1.0)]
        golds = [A, A]
        t = sweep_threshold(pairs, golds)
        assert t == pytest.approx(5.0 - 1.0)  # low sentinel: min - 1


class TestCalibrateAndInfer:
    def build_world(self, seed=51):
        rng = np.random.default_rng(seed)
        dim_in = 8
        mists = [MisinfoTarget(id="m1", text="one", theme="vaccine-unsafe"),
                 MisinfoTarget(id="m2", text="two", theme="vaccine-testing")]
        stance_graphs = {
            "m1": build_stance_graph("m1", [("g1", A), ("g2", R), ("g3", A)]),
            "m2": build_stance_graph("m2", [("g4", A), ("g5", R)]),
        }
        keys = ["m1", "m2", "g1", "g2", "g3", "g4", "g5",
                "u1", "u2", "u3", "u4", "u5"]
        store = EmbeddingStore(dim=dim_in)
        for k in keys:
            store.add(k, rng.normal(size=dim_in))
        state = init_model_state(ScoringModel.TRANSE, dim_in, 4, ["m1", "m2"], rng)
        return mists, stance_graphs, store, state

    def test_fallback_for_missing_target(self):
        mists, stance_graphs, store, state = self.build_world()
        dev = [("u1", "m1", A), ("u2", "m1", R), ("u3", "m1", N)]
        table = calibrate_thresholds(state, store, mists, stance_graphs, dev, depth=2)
        assert "m1" in table.values and "m2" not in table.values
        assert table.get("m2") == table.global_fallback
        assert table.global_fallback == table.values["m1"]  # median of one value

    def test_empty_dev_set(self):
        mists, stance_graphs, store, state = self.build_world()
        table = calibrate_thresholds(state, store, mists, stance_graphs, [], depth=2)
        assert table.values == {} and table.global_fallback == 0.0

    def test_infer_empty_pool(self):
        mists, stance_graphs, store, state = self.build_world()
        result = infer(state, store, mists, stance_graphs, [], ThresholdTable(), depth=2)
        assert result.predictions == []

    def test_infer_without_stance_graph_is_undefined(self):
        mists, _, store, state = self.build_world()
        with pytest.raises(UndefinedConsistencyError):
            infer(state, store, mists, {}, [("u1", "m1")], ThresholdTable(), depth=2)

    def test_infer_updates_graphs_once(self):
        mists, stance_graphs, store, state = self.build_world()
        pool = [("u1", "m1"), ("u2", "m1"), ("u4", "m2")]
        result = infer(state, store, mists, stance_graphs, pool,
                       ThresholdTable(global_fallback=-1e9), depth=3)
        assert len(result.predictions) == 3
        assert all(p.stance in (A, R) for p in result.predictions)  # threshold far below
        for p in result.predictions:
            assert p.tweet_id in result.updated_graphs[p.mist_id]
            assert p.tweet_id not in stance_graphs[p.mist_id]  # originals untouched

    def test_infer_jobs_match_serial(self):
        mists, stance_graphs, store, state = self.build_world()
        pool = [(f"u{i}", "m1") for i in range(1, 4)] + [("u4", "m2"), ("u5", "m2")]
        table = ThresholdTable(global_fallback=0.0)
        serial = infer(state, store, mists, stance_graphs, pool, table, depth=4, jobs=1)
        threaded = infer(state, store, mists, stance_graphs, pool, table, depth=4, jobs=4)
        assert [(p.tweet_id, p.stance, p.score_accept) for p in serial.predictions] == \
               [(p.tweet_id, p.stance, p.score_accept) for p in threaded.predictions]

    def test_predict_subset_filters_output(self):
        mists, stance_graphs, store, state = self.build_world()
        pool = [("u1", "m1"), ("u2", "m1"), ("u3", "m1")]
        result = infer(state, store, mists, stance_graphs, pool,
                       ThresholdTable(), depth=2, predict_pairs=[("u2", "m1")])
        assert [p.tweet_id for p in result.predictions] == ["u2"]
