import math

import numpy as np
import pytest

from _oracles import central_difference, reference_adam
from stancekg.encoders import EmbeddingStore
from stancekg.errors import ConfigError, DataError, TrainingDivergenceError
from stancekg.graph import (MisinfoTarget, RelationType, StanceLabel,
                            build_stance_graph, implied_relation)
from stancekg.scoring import ScoringModel
from stancekg.synth import SynthConfig, generate
from stancekg.trainer import (REL_INDEX, ModelState, TrainConfig, adam_step,
                              enumerate_positives, init_model_state,
                              learning_rate_at, margin_loss, sample_negative,
                              score_param_grads, train)

A, R, N = StanceLabel.ACCEPT, StanceLabel.REJECT, StanceLabel.NO_STANCE


class TestEnumeratePositives:
    def test_complete_graph(self):
        g = build_stance_graph("m1", [("t1", A), ("t2", A), ("t3", R)])
        out = enumerate_positives([g], cap=1000, rng=np.random.default_rng(0))
        triples = {(p.tweet_x_id, p.tweet_y_id, p.relation) for p in out}
        assert triples == {("t1", "t2", RelationType.AGREE),
                           ("t1", "t3", RelationType.DISAGREE),
                           ("t2", "t3", RelationType.DISAGREE)}

    def test_single_node(self):
        g = build_stance_graph("m1", [("t1", A)])
        assert enumerate_positives([g], 1000, np.random.default_rng(0)) == []

    def test_cap_sampling(self):
        nodes = [(f"t{i}", A if i % 2 else R) for i in range(50)]
        g = build_stance_graph("m1", nodes)
        all_pairs = enumerate_positives([g], cap=10 ** 9, rng=np.random.default_rng(0))
        assert len(all_pairs) == math.comb(50, 2) == 1225
        capped = enumerate_positives([g], cap=100, rng=np.random.default_rng(0))
        assert len(capped) == 100
        universe = {(p.tweet_x_id, p.tweet_y_id) for p in all_pairs}
        assert all((p.tweet_x_id, p.tweet_y_id) in universe for p in capped)
        assert len({(p.tweet_x_id, p.tweet_y_id) for p in capped}) == 100
        assert all(not p.violates_ac() for p in capped)


class TestSampleNegative:
    def setup_method(self):
        self.g = build_stance_graph(
            "m1", [("t1", A), ("t2", A), ("t3", R), ("t4", R), ("t5", A)])

    def test_always_violates_ac(self):
        rng = np.random.default_rng(1)
        positives = enumerate_positives([self.g], 1000, rng)
        for _ in range(2000):
            pos = positives[int(rng.integers(len(positives)))]
            neg = sample_negative(pos, self.g, rng)
            assert neg.violates_ac()
            assert neg.mist_id == pos.mist_id
            assert neg.tweet_x_id == pos.tweet_x_id

    def test_entity_corruption_keeps_relation(self):
        rng = np.random.default_rng(2)
        pos = enumerate_positives([self.g], 1000, rng)[0]
        saw_entity, saw_flip = False, False
        for _ in range(200):
            neg = sample_negative(pos, self.g, rng)
            if neg.relation is pos.relation:
                saw_entity = True
                assert neg.tweet_y_id != pos.tweet_y_id
                assert implied_relation(neg.stance_x, neg.stance_y) is not neg.relation
            else:
                saw_flip = True
                assert neg.tweet_y_id == pos.tweet_y_id
        assert saw_entity and saw_flip

    def test_forced_fallback_when_no_eligible_entity(self):
        g = build_stance_graph("m1", [("t1", A), ("t2", A), ("t3", A)])
        rng = np.random.default_rng(3)
        positives = enumerate_positives([g], 1000, rng)
        for pos in positives:
            for _ in range(50):
                neg = sample_negative(pos, g, rng)
                assert neg.relation is pos.relation.flipped()
                assert (neg.tweet_x_id, neg.tweet_y_id) == (pos.tweet_x_id, pos.tweet_y_id)


class TestMarginLoss:
    @pytest.mark.parametrize("f_pos,f_neg,margin,expect", [
        (5.0, 0.0, 4.0, 0.0),
        (0.0, 0.0, 4.0, 4.0),
        (1.0, -2.0, 4.0, 1.0),
    ])
    def test_examples(self, f_pos, f_neg, margin, expect):
        assert margin_loss(f_pos, f_neg, margin) == expect

    def test_nonnegative_zero_iff_margin_met(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            f_pos, f_neg = rng.normal(size=2) * 10
            loss = margin_loss(f_pos, f_neg, 4.0)
            assert loss >= 0.0
            assert (loss == 0.0) == (f_pos >= f_neg + 4.0)


class TestLearningRate:
    def setup_method(self):
        self.cfg = TrainConfig(peak_lr=1e-4, warmup_fraction=0.10)

    def test_endpoints_and_peak(self):
        assert learning_rate_at(0, 1000, self.cfg) == 0.0
        assert learning_rate_at(100, 1000, self.cfg) == pytest.approx(1e-4)
        assert learning_rate_at(1000, 1000, self.cfg) == 0.0

    def test_piecewise_linear_and_continuous(self):
        total = 1000
        values = [learning_rate_at(s, total, self.cfg) for s in range(total + 1)]
        assert max(values) == pytest.approx(self.cfg.peak_lr)
        deltas = np.diff(values)
        assert np.allclose(deltas[:99], deltas[0])        # constant ramp slope
        assert np.allclose(deltas[101:], deltas[-1])      # constant decay slope
        assert max(abs(np.diff(values))) < 2e-6           # no jumps

    def test_zero_total_steps(self):
        with pytest.raises(ConfigError):
            learning_rate_at(0, 0, self.cfg)


def scalar_state(value=1.0):
    """Minimal one-parameter state for optimizer tests."""
    return ModelState(kind=ScoringModel.TRANSE, dim_in=1, dim_k=1, mist_ids=[],
                      params={"w": np.array([value])},
                      m1={"w": np.zeros(1)}, m2={"w": np.zeros(1)})


class TestAdam:
    def test_zero_gradient_is_noop(self):
        state = scalar_state(3.5)
        adam_step(state, {"w": np.zeros(1)}, lr=0.1)
        assert state.params["w"][0] == 3.5
        assert state.step == 1

    def test_first_step_magnitude(self):
        state = scalar_state(1.0)
        adam_step(state, {"w": np.array([1.0])}, lr=0.1)
        # bias-corrected first step is lr * g / (sqrt(g^2) + eps) = ~lr
        assert state.params["w"][0] == pytest.approx(1.0 - 0.1, abs=1e-8)

    def test_matches_reference_implementation(self):
        state = scalar_state(0.7)
        grads = [np.array([0.3]), np.array([0.3]), np.array([-0.2])]
        for g in grads:
            adam_step(state, {"w": g}, lr=0.05)
        expected = reference_adam(np.array([0.7]), grads, lr=0.05)
        assert abs(state.params["w"][0] - expected[0]) < 1e-12

    def test_non_finite_gradient_names_parameter(self):
        state = scalar_state()
        with pytest.raises(TrainingDivergenceError, match="'w'"):
            adam_step(state, {"w": np.array([np.nan])}, lr=0.1)


def tiny_setup(kind, dim_in=6, dim_k=3, seed=0):
    rng = np.random.default_rng(seed)
    mists = [MisinfoTarget(id="m1", text="claim one", theme="vaccine-unsafe"),
             MisinfoTarget(id="m2", text="claim two", theme="vaccine-testing")]
    graphs = [
        build_stance_graph("m1", [("t1", A), ("t2", A), ("t3", R), ("t4", R)]),
        build_stance_graph("m2", [("t5", A), ("t6", R), ("t7", A)]),
    ]
    store = EmbeddingStore(dim=dim_in)
    for key in ("m1", "m2", "t1", "t2", "t3", "t4", "t5", "t6", "t7"):
        store.add(key, rng.normal(size=dim_in))
    state = init_model_state(kind, dim_in, dim_k, [m.id for m in mists], rng)
    if kind is ScoringModel.TRANSMS:
        state.params["alpha"][:] = rng.normal(size=state.params["alpha"].shape) * 0.3
    return mists, graphs, store, state


class TestComposedGradients:
    """Backpropagation through encoder + scoring matches finite differences."""

    @pytest.mark.parametrize("kind", list(ScoringModel))
    def test_parameter_gradients(self, kind):
        _, _, store, state = tiny_setup(kind, seed=21)
        tc_x, mc, tc_y = store.get("t1"), store.get("m1"), store.get("t2")

        for relation in RelationType:
            _, grads = score_param_grads(state, tc_x, mc, tc_y, relation, "m1")

            for name in state.params:
                flat = state.params[name].reshape(-1)

                def f(v, name=name):
                    saved = state.params[name].copy()
                    state.params[name][...] = v.reshape(state.params[name].shape)
                    try:
                        out, _ = score_param_grads(state, tc_x, mc, tc_y, relation, "m1")
                    finally:
                        state.params[name][...] = saved
                    return out

                fd = central_difference(f, flat, eps=1e-5)
                analytic = grads[name].reshape(-1)
                scale = max(1.0, np.abs(fd).max())
                assert np.abs(analytic - fd).max() <= 1e-4 * scale, \
                    f"{kind.value}/{relation.value}: parameter {name}"


class TestBatchLossGradients:
    """Gradients of the summed hinge loss over a batch match finite differences."""

    @pytest.mark.parametrize("kind", list(ScoringModel))
    def test_batch_loss_gradient(self, kind):
        from stancekg.trainer import (REL_INDEX, batch_score_and_grads,
                                      enumerate_positives, sample_negative)

        mists, graphs, store, state = tiny_setup(kind, seed=33)
        rng = np.random.default_rng(34)
        positives = enumerate_positives(graphs, 1000, rng)[:6]
        by_mist = {g.mist_id: g for g in graphs}
        negatives = [sample_negative(p, by_mist[p.mist_id], rng) for p in positives]
        rows = positives + negatives
        tcx = np.stack([store.get(r.tweet_x_id) for r in rows])
        tcy = np.stack([store.get(r.tweet_y_id) for r in rows])
        mc = np.stack([store.get(r.mist_id) for r in rows])
        rel_idx = np.array([REL_INDEX[r.relation] for r in rows])
        mist_idx = np.array([state.mist_row(r.mist_id) for r in rows])
        margin = 4.0
        n = len(positives)

        def batch_loss():
            f, _ = batch_score_and_grads(state, tcx, mc, tcy, rel_idx, mist_idx)
            hinge = margin - f[:n] + f[n:]
            return float(np.where(hinge > 0, hinge, 0.0).sum()), hinge

        _, hinge = batch_loss()
        assert np.all(np.abs(hinge) > 1e-3)  # away from the hinge kink
        active = hinge > 0
        # d(loss)/d(f_pos) = -1 where active, d(loss)/d(f_neg) = +1 where active
        weights = np.concatenate([-active.astype(float), active.astype(float)])
        _, grads = batch_score_and_grads(state, tcx, mc, tcy, rel_idx, mist_idx,
                                         weights=weights)

        for name in state.params:
            flat = state.params[name].reshape(-1)
            probe = np.random.default_rng(35).choice(
                flat.size, size=min(10, flat.size), replace=False)
            for i in probe:
                saved = flat[i]
                flat[i] = saved + 1e-5
                hi, _ = batch_loss()
                flat[i] = saved - 1e-5
                lo, _ = batch_loss()
                flat[i] = saved
                fd = (hi - lo) / 2e-5
                analytic = grads[name].reshape(-1)[i]
                assert abs(analytic - fd) <= 1e-4 * max(1.0, abs(fd)), \
                    f"{kind.value} batch-loss gradient for {name}"


class TestTrain:
    def test_zero_epochs_returns_untrained_state(self):
        mists, graphs, store, _ = tiny_setup(ScoringModel.TRANSE)
        cfg = TrainConfig(epochs=0, seed=5)
        state = train(cfg, graphs, store, mists)
        fresh = init_model_state(ScoringModel.TRANSE, store.dim, cfg.dim_k,
                                 [m.id for m in mists], np.random.default_rng(5))
        for name in fresh.params:
            assert np.array_equal(state.params[name], fresh.params[name])
        assert state.step == 0 and state.epoch_losses == []

    def test_deterministic_given_seed(self):
        mists, graphs, store, _ = tiny_setup(ScoringModel.TRANSE)
        cfg = TrainConfig(epochs=3, batch_size=4, seed=7)
        s1 = train(cfg, graphs, store, mists)
        s2 = train(cfg, graphs, store, mists)
        for name in s1.params:
            assert np.array_equal(s1.params[name], s2.params[name])
        assert s1.epoch_losses == s2.epoch_losses

    def test_missing_embedding_fails_before_training(self):
        mists, graphs, store, _ = tiny_setup(ScoringModel.TRANSE)
        del store.records["t3"]
        with pytest.raises(DataError, match="t3"):
            train(TrainConfig(epochs=1), graphs, store, mists)

    def test_loss_decreases_on_planted_data(self):
        # regression fixture: on the planted synthetic set (seed 13), the first
        # five epoch losses of a default TransE run strictly decrease
        mists, records, store = generate(SynthConfig(seed=13))
        graphs = {}
        for r in records:
            if r.split == "train":
                graphs.setdefault(r.mist_id, []).append((r.tweet_id, r.stance))
        stance_graphs = [build_stance_graph(mid, labeled) for mid, labeled in sorted(graphs.items())]
        state = train(TrainConfig(model=ScoringModel.TRANSE), stance_graphs, store, mists)
        losses = state.epoch_losses[:5]
        assert len(losses) == 5
        assert all(losses[i + 1] < losses[i] for i in range(4)), losses
