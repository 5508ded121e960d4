"""Margin-loss training of projection encoders and scoring-model parameters.

Positive examples are the implicit agree/disagree relations of each target's
stance graph; negatives are attitude-inconsistent corruptions of a positive
(entity replacement or relation flip).  The hinge

    max(0, margin - f(positive) + f(negative))

is summed over a batch and minimized with Adam under a warmup-then-linear-decay
learning-rate schedule.  Training is deterministic for a fixed seed in
single-threaded mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .encoders import EmbeddingStore, ProjectionWeights, init_projection_weights
from .errors import ConfigError, DataError, TrainingDivergenceError
from .graph import RelationType, StanceGraph, StanceLabel, implied_relation
from .scoring import (ModelExtras, ScoringModel, rotate_grads, rotate_scores,
                      transd_grads, transd_scores, transe_grads, transe_scores,
                      transms_grads, transms_scores, tucker_core_grad,
                      tucker_grads, tucker_scores)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

REL_INDEX = {RelationType.AGREE: 0, RelationType.DISAGREE: 1}


@dataclass(frozen=True)
class RelationInstance:
    """One (tweet, relation, tweet) training example for a target."""

    mist_id: str
    tweet_x_id: str
    tweet_y_id: str
    relation: RelationType
    stance_x: StanceLabel
    stance_y: StanceLabel

    def violates_ac(self) -> bool:
        return implied_relation(self.stance_x, self.stance_y) is not self.relation


@dataclass
class TrainConfig:
    model: ScoringModel = ScoringModel.TRANSE
    epochs: int = 36
    batch_size: int = 32
    peak_lr: float = 1e-4
    warmup_fraction: float = 0.10
    margin: float = 4.0
    negatives_per_positive: int = 1
    dim_k: int = 8
    seed: int = 0
    positive_cap_per_mist_per_epoch: int = 1000

    def validate(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        for name in ("batch_size", "peak_lr", "margin", "negatives_per_positive",
                     "dim_k", "positive_cap_per_mist_per_epoch"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not (0.0 < self.warmup_fraction < 1.0):
            raise ConfigError("warmup_fraction must lie in (0, 1)")


@dataclass
class ModelState:
    """All learnable parameters plus Adam moments and the step counter."""

    kind: ScoringModel
    dim_in: int
    dim_k: int
    mist_ids: list
    params: dict
    m1: dict
    m2: dict
    step: int = 0
    epoch_losses: list = field(default_factory=list)

    @property
    def projection(self) -> ProjectionWeights:
        p = self.params
        return ProjectionWeights(
            kind=self.kind, dim_in=self.dim_in, dim_k=self.dim_k,
            w_agree=p["w_agree"], b_agree=p["b_agree"],
            w_disagree=p["w_disagree"], b_disagree=p["b_disagree"],
            w_tweet=p["w_tweet"], b_tweet=p["b_tweet"],
        )

    def mist_row(self, mist_id: str) -> int:
        try:
            return self._mist_rows[mist_id]
        except AttributeError:
            self._mist_rows = {m: i for i, m in enumerate(self.mist_ids)}
            return self._mist_rows[mist_id]

    def extras(self) -> ModelExtras:
        alpha_table = None
        if self.kind is ScoringModel.TRANSMS:
            a = self.params["alpha"]
            alpha_table = {}
            for i, mid in enumerate(self.mist_ids):
                alpha_table[(mid, RelationType.AGREE)] = float(a[i, 0])
                alpha_table[(mid, RelationType.DISAGREE)] = float(a[i, 1])
        return ModelExtras(tucker_core=self.params.get("tucker_core"),
                           transms_alpha=alpha_table)


def init_model_state(kind: ScoringModel, dim_in: int, dim_k: int, mist_ids,
                     rng: np.random.Generator) -> ModelState:
    weights = init_projection_weights(kind, dim_in, dim_k, rng)
    params = {
        "w_agree": weights.w_agree, "b_agree": weights.b_agree,
        "w_disagree": weights.w_disagree, "b_disagree": weights.b_disagree,
        "w_tweet": weights.w_tweet, "b_tweet": weights.b_tweet,
    }
    if kind is ScoringModel.TUCKER:
        params["tucker_core"] = rng.uniform(-0.1, 0.1, size=(dim_k, dim_k, dim_k))
    if kind is ScoringModel.TRANSMS:
        params["alpha"] = np.zeros((len(mist_ids), 2))
    return ModelState(
        kind=kind, dim_in=dim_in, dim_k=dim_k, mist_ids=list(mist_ids),
        params=params,
        m1={k: np.zeros_like(v) for k, v in params.items()},
        m2={k: np.zeros_like(v) for k, v in params.items()},
    )


def enumerate_positives(stance_graphs, cap: int, rng: np.random.Generator):
    """All unordered node pairs of every stance graph, capped per target.

    Each pair becomes a RelationInstance labeled with the relation its stances
    imply.  When a graph has more than `cap` pairs, a uniform sample of size
    `cap` is drawn (kept in enumeration order).
    """
    out = []
    for g in stance_graphs:
        nodes = g.nodes
        pairs = [(i, j) for i in range(len(nodes)) for j in range(i + 1, len(nodes))]
        if len(pairs) > cap:
            keep = rng.choice(len(pairs), size=cap, replace=False)
            keep.sort()
            pairs = [pairs[k] for k in keep]
        for i, j in pairs:
            tx, sx = nodes[i]
            ty, sy = nodes[j]
            out.append(RelationInstance(g.mist_id, tx, ty, implied_relation(sx, sy), sx, sy))
    return out


def sample_negative(pos: RelationInstance, g: StanceGraph,
                    rng: np.random.Generator) -> RelationInstance:
    """Corrupt a positive into an attitude-inconsistent example.

    Uniformly picks between (1) replacing the tail tweet with a graph node whose
    stance contradicts the kept relation label and (2) flipping the relation
    type.  Falls back to (2) when no eligible replacement node exists.
    """
    mode = int(rng.integers(0, 2))
    if mode == 0:
        eligible = [(tid, s) for tid, s in g.nodes
                    if implied_relation(pos.stance_x, s) is not pos.relation
                    and tid != pos.tweet_x_id]
        if eligible:
            tid, s = eligible[int(rng.integers(0, len(eligible)))]
            return RelationInstance(pos.mist_id, pos.tweet_x_id, tid,
                                    pos.relation, pos.stance_x, s)
    return RelationInstance(pos.mist_id, pos.tweet_x_id, pos.tweet_y_id,
                            pos.relation.flipped(), pos.stance_x, pos.stance_y)


def margin_loss(f_pos: float, f_neg: float, margin: float) -> float:
    return max(margin - f_pos + f_neg, 0.0)


def learning_rate_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear ramp 0 -> peak over the warmup steps, then linear decay to 0."""
    if total_steps <= 0:
        raise ConfigError("total_steps must be positive")
    warmup = cfg.warmup_fraction * total_steps
    if step <= warmup:
        return cfg.peak_lr * step / warmup
    return cfg.peak_lr * (total_steps - step) / (total_steps - warmup)


def adam_step(state: ModelState, grads: dict, lr: float) -> ModelState:
    """One Adam update over every parameter; missing gradients count as zero."""
    t = state.step + 1
    for name, p in state.params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError(name)
        m1, m2 = state.m1[name], state.m2[name]
        m1 *= ADAM_BETA1
        m1 += (1.0 - ADAM_BETA1) * g
        m2 *= ADAM_BETA2
        m2 += (1.0 - ADAM_BETA2) * g * g
        m1_hat = m1 / (1.0 - ADAM_BETA1 ** t)
        m2_hat = m2 / (1.0 - ADAM_BETA2 ** t)
        p -= lr * m1_hat / (np.sqrt(m2_hat) + ADAM_EPS)
    state.step = t
    return state


# ---------------------------------------------------------------------------
# batched score + parameter-gradient evaluation


def _encode_rows(state: ModelState, tcx, mc, tcy, rel_idx):
    p = state.params
    ex = tcx @ p["w_tweet"].T + p["b_tweet"]
    ey = tcy @ p["w_tweet"].T + p["b_tweet"]
    m_agree = mc @ p["w_agree"].T + p["b_agree"]
    m_disagree = mc @ p["w_disagree"].T + p["b_disagree"]
    m = np.where((rel_idx == 0)[:, None], m_agree, m_disagree)
    return ex, m, ey


def _batch_scores(state: ModelState, ex, m, ey, rel_idx, mist_idx):
    kind, d = state.kind, state.dim_k
    if kind is ScoringModel.TRANSE:
        return transe_scores(ex, m, ey)
    if kind is ScoringModel.TRANSD:
        return transd_scores(ex[:, :d], ex[:, d:], m[:, :d], m[:, d:], ey[:, :d], ey[:, d:])
    if kind is ScoringModel.TRANSMS:
        alpha = state.params["alpha"][mist_idx, rel_idx]
        return transms_scores(ex, m, ey, alpha)
    if kind is ScoringModel.TUCKER:
        return tucker_scores(ex, m, ey, state.params["tucker_core"])
    return rotate_scores(ex, m, ey)


def _batch_entity_relation_grads(state: ModelState, ex, m, ey, rel_idx, mist_idx):
    """Per-row score gradients w.r.t. the raw encoded rows (plus extras)."""
    kind, d = state.kind, state.dim_k
    galpha = None
    if kind is ScoringModel.TRANSE:
        gx, gm, gy = transe_grads(ex, m, ey)
    elif kind is ScoringModel.TRANSD:
        gxv, gxp, gmv, gmp, gyv, gyp = transd_grads(
            ex[:, :d], ex[:, d:], m[:, :d], m[:, d:], ey[:, :d], ey[:, d:])
        gx = np.concatenate([gxv, gxp], axis=1)
        gm = np.concatenate([gmv, gmp], axis=1)
        gy = np.concatenate([gyv, gyp], axis=1)
    elif kind is ScoringModel.TRANSMS:
        alpha = state.params["alpha"][mist_idx, rel_idx]
        gx, gm, gy, galpha = transms_grads(ex, m, ey, alpha)
    elif kind is ScoringModel.TUCKER:
        gx, gm, gy = tucker_grads(ex, m, ey, state.params["tucker_core"])
    else:
        gx, gm, gy = rotate_grads(ex, m, ey)
    return gx, gm, gy, galpha


def batch_score_and_grads(state: ModelState, tcx, mc, tcy, rel_idx, mist_idx,
                          weights=None):
    """Scores for a batch of triples and, if `weights` is given, the gradient of
    sum(weights * score) with respect to every model parameter.

    tcx/mc/tcy are (B, dim_in) content rows; rel_idx (B,) indexes the relation
    head (0 agree, 1 disagree); mist_idx (B,) indexes rows of the alpha table.
    """
    rel_idx = np.asarray(rel_idx)
    mist_idx = np.asarray(mist_idx)
    ex, m, ey = _encode_rows(state, tcx, mc, tcy, rel_idx)
    f = _batch_scores(state, ex, m, ey, rel_idx, mist_idx)
    if weights is None:
        return f, None

    w = np.asarray(weights, dtype=float)
    gx, gm, gy, galpha = _batch_entity_relation_grads(state, ex, m, ey, rel_idx, mist_idx)
    wx = w[:, None] * gx
    wy = w[:, None] * gy
    wm = w[:, None] * gm

    grads = {
        "w_tweet": wx.T @ tcx + wy.T @ tcy,
        "b_tweet": wx.sum(axis=0) + wy.sum(axis=0),
    }
    agree_rows = rel_idx == 0
    grads["w_agree"] = wm[agree_rows].T @ mc[agree_rows]
    grads["b_agree"] = wm[agree_rows].sum(axis=0)
    grads["w_disagree"] = wm[~agree_rows].T @ mc[~agree_rows]
    grads["b_disagree"] = wm[~agree_rows].sum(axis=0)
    if state.kind is ScoringModel.TUCKER:
        grads["tucker_core"] = tucker_core_grad(ex, m, ey, w)
    if state.kind is ScoringModel.TRANSMS:
        da = np.zeros_like(state.params["alpha"])
        np.add.at(da, (mist_idx, rel_idx), w * galpha)
        grads["alpha"] = da
    return f, grads


def score_param_grads(state: ModelState, tc_x, mc, tc_y, relation: RelationType,
                      mist_id: str):
    """Score of one triple through the encoders, plus full parameter gradients."""
    rel_idx = np.array([REL_INDEX[relation]])
    mist_idx = np.array([state.mist_row(mist_id)])
    f, grads = batch_score_and_grads(
        state,
        np.asarray(tc_x, float)[None], np.asarray(mc, float)[None],
        np.asarray(tc_y, float)[None], rel_idx, mist_idx, weights=np.ones(1))
    return float(f[0]), grads


# ---------------------------------------------------------------------------
# training loop


def _check_embeddings(store: EmbeddingStore, stance_graphs, mists):
    missing = []
    for m in mists:
        if m.id not in store:
            missing.append(m.id)
    for g in stance_graphs:
        for tid in g.tweet_ids():
            if tid not in store:
                missing.append(tid)
    if missing:
        raise DataError(f"missing content embeddings for {len(missing)} keys, "
                        f"first few: {missing[:5]}")


def total_positive_count(stance_graphs, cap: int) -> int:
    total = 0
    for g in stance_graphs:
        n = len(g)
        total += min(n * (n - 1) // 2, cap)
    return total


def train(cfg: TrainConfig, stance_graphs, store: EmbeddingStore, mists,
          log: Optional[Callable[[str], None]] = None) -> ModelState:
    """Train a ModelState on the stance graphs' implicit relations.

    Deterministic for a fixed cfg.seed: initialization, positive capping,
    shuffling and negative sampling all consume one seeded generator in a
    fixed order.
    """
    cfg.validate()
    _check_embeddings(store, stance_graphs, mists)
    rng = np.random.default_rng(cfg.seed)
    state = init_model_state(cfg.model, store.dim, cfg.dim_k,
                             [m.id for m in mists], rng)

    graphs = {g.mist_id: g for g in stance_graphs}
    n_positives = total_positive_count(stance_graphs, cfg.positive_cap_per_mist_per_epoch)
    if cfg.epochs == 0 or n_positives == 0:
        return state

    content = {}
    for m in mists:
        content[m.id] = np.asarray(store.get(m.id), dtype=float)
    for g in stance_graphs:
        for tid in g.tweet_ids():
            content[tid] = np.asarray(store.get(tid), dtype=float)

    batches_per_epoch = -(-n_positives // cfg.batch_size)
    total_steps = cfg.epochs * batches_per_epoch
    k = cfg.negatives_per_positive
    global_step = 0

    for epoch in range(cfg.epochs):
        positives = enumerate_positives(stance_graphs, cfg.positive_cap_per_mist_per_epoch, rng)
        order = rng.permutation(len(positives))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [positives[i] for i in order[start:start + cfg.batch_size]]
            negatives = [sample_negative(p, graphs[p.mist_id], rng)
                         for p in batch for _ in range(k)]
            rows = batch + negatives
            tcx = np.stack([content[r.tweet_x_id] for r in rows])
            tcy = np.stack([content[r.tweet_y_id] for r in rows])
            mc = np.stack([content[r.mist_id] for r in rows])
            rel_idx = np.array([REL_INDEX[r.relation] for r in rows])
            mist_idx = np.array([state.mist_row(r.mist_id) for r in rows])

            f, _ = batch_score_and_grads(state, tcx, mc, tcy, rel_idx, mist_idx)
            n_pos = len(batch)
            f_pos = f[:n_pos]
            f_neg = f[n_pos:].reshape(n_pos, k)
            hinge = cfg.margin - f_pos[:, None] + f_neg
            active = hinge > 0.0
            epoch_loss += float(np.where(active, hinge, 0.0).sum())

            # d(loss)/d(f_pos) = -#active negatives, d(loss)/d(f_neg) = 1 if active
            weights = np.concatenate([-active.sum(axis=1).astype(float),
                                      active.astype(float).reshape(-1)])
            if np.any(weights != 0.0):
                _, grads = batch_score_and_grads(state, tcx, mc, tcy, rel_idx,
                                                 mist_idx, weights=weights)
            else:
                grads = {}
            lr = learning_rate_at(global_step, total_steps, cfg)
            adam_step(state, grads, lr)
            global_step += 1
        mean_loss = epoch_loss / len(positives)
        state.epoch_losses.append(mean_loss)
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs} mean loss {mean_loss:.6f}")
    return state
