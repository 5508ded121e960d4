"""Transitive attitude-consistency scoring and stance assignment.

For a tweet x with hypothesized stance s toward a target, the level-1
consistency score averages, over every stance-graph node (t_y, s_y), the
relation score f(te_x, me_r, te_y) where r is the relation implied by (s, s_y).
Level l > 1 extends chains through the unknown-stance pool:

    level_l(x, s) = sum over pool tweets z != x, and s_z in {Accept, Reject},
                    of (level_{l-1}(z, s_z) + f(te_x, me_{r(s, s_z)}, te_z))
                    normalized by (|pool| - 1)

The double sum is computed by dynamic programming on two precomputed sums; it
equals the naive recursion exactly.  As written, the inner sum over s_z touches
both relation types regardless of s, so levels >= 2 are identical for Accept
and Reject: chain depth moves the no-stance margin, never the argmax.

The depth-averaged score (mean of levels 1..L) is compared against a per-target
threshold: at or below it the tweet is assigned NoStance, otherwise the argmax
stance (ties toward Accept).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .encoders import EmbeddingStore
from .errors import UndefinedConsistencyError
from .graph import (AC_STANCES, MisinfoTarget, RelationType, StanceGraph,
                    StanceLabel, update_stance_graph)
from .metrics import evaluate
from .trainer import ModelState, batch_score_and_grads

REL_AXIS = {RelationType.AGREE: 0, RelationType.DISAGREE: 1}
STANCE_AXIS = {StanceLabel.ACCEPT: 0, StanceLabel.REJECT: 1}


@dataclass
class ScoreMatrix:
    """Cached pairwise relation scores for one target.

    f_graph[x, y, r] scores relation r between pool tweet x and graph node y;
    f_pool[x, z, r] scores relation r between pool tweets x and z (diagonal
    unused, kept at zero).  Axis r: 0 agree, 1 disagree.
    """

    mist_id: str
    pool_ids: list
    graph_ids: list
    graph_stances: list
    f_graph: np.ndarray
    f_pool: np.ndarray

    def pool_index(self, tweet_id: str) -> int:
        return self.pool_ids.index(tweet_id)


@dataclass
class ConsistencyTable:
    """Consistency scores per chain level; levels[l-1][x, s] holds level l."""

    levels: list = field(default_factory=list)

    def max_level(self) -> int:
        return len(self.levels)

    def value(self, level: int, x_index: int, stance: StanceLabel) -> float:
        return float(self.levels[level - 1][x_index, STANCE_AXIS[stance]])


@dataclass
class ThresholdTable:
    """Per-target no-stance thresholds with a global fallback."""

    values: dict = field(default_factory=dict)
    global_fallback: float = 0.0

    def get(self, mist_id: str) -> float:
        return self.values.get(mist_id, self.global_fallback)


@dataclass(frozen=True)
class Prediction:
    tweet_id: str
    mist_id: str
    stance: StanceLabel
    score_accept: float
    score_reject: float


@dataclass
class InferenceResult:
    predictions: list
    updated_graphs: dict  # mist_id -> StanceGraph after adding finalized tweets


def pairwise_scores(state: ModelState, store: EmbeddingStore, mist: MisinfoTarget,
                    graph: StanceGraph, pool_ids) -> ScoreMatrix:
    """Score every (pool tweet, graph node) and (pool tweet, pool tweet) pair
    under both relation embeddings of the target."""
    pool_ids = list(pool_ids)
    graph_ids = graph.tweet_ids()
    n_x, n_y = len(pool_ids), len(graph_ids)

    mc = np.asarray(store.get(mist.id), dtype=float)
    tc_pool = store.matrix(pool_ids)
    tc_graph = store.matrix(graph_ids)
    mist_idx = state.mist_row(mist.id)

    def grid(tc_a, tc_b):
        """(len_a, len_b, 2) scores of every pair under agree then disagree."""
        a, b = tc_a.shape[0], tc_b.shape[0]
        if a == 0 or b == 0:
            return np.zeros((a, b, 2))
        rows_x = np.repeat(tc_a, b, axis=0)
        rows_y = np.tile(tc_b, (a, 1))
        mc_rows = np.broadcast_to(mc, (a * b, mc.shape[0]))
        mist_rows = np.full(a * b, mist_idx)
        out = np.zeros((a, b, 2))
        for rel, axis in REL_AXIS.items():
            rel_rows = np.full(a * b, REL_AXIS[rel])
            f, _ = batch_score_and_grads(state, rows_x, mc_rows, rows_y,
                                         rel_rows, mist_rows)
            out[:, :, axis] = f.reshape(a, b)
        return out

    f_graph = grid(tc_pool, tc_graph)
    f_pool = grid(tc_pool, tc_pool)
    for i in range(n_x):
        f_pool[i, i, :] = 0.0
    return ScoreMatrix(mist_id=mist.id, pool_ids=pool_ids, graph_ids=graph_ids,
                       graph_stances=graph.stances(), f_graph=f_graph, f_pool=f_pool)


def _level_one(matrix: ScoreMatrix) -> np.ndarray:
    """(|pool|, 2) level-1 scores for Accept and Reject hypotheses."""
    n_y = len(matrix.graph_ids)
    if n_y == 0:
        raise UndefinedConsistencyError(
            f"no stance-graph nodes for target {matrix.mist_id!r}; level-1 scores undefined")
    node_is_accept = np.array([s is StanceLabel.ACCEPT for s in matrix.graph_stances])
    # relation implied by (hypothesis, node stance): agree when they match
    rel_for_accept = np.where(node_is_accept, 0, 1)
    rel_for_reject = np.where(node_is_accept, 1, 0)
    cols = np.arange(n_y)
    acc = matrix.f_graph[:, cols, rel_for_accept].mean(axis=1)
    rej = matrix.f_graph[:, cols, rel_for_reject].mean(axis=1)
    return np.stack([acc, rej], axis=1)


def consistency_level1(matrix: ScoreMatrix, tweet_id: str, stance: StanceLabel) -> float:
    """Level-1 consistency of hypothesized `stance` for one pool tweet."""
    level1 = _level_one(matrix)
    return float(level1[matrix.pool_index(tweet_id), STANCE_AXIS[stance]])


def extend_consistency(matrix: ScoreMatrix, table: ConsistencyTable, level: int) -> ConsistencyTable:
    """Extend the table to `level` via the dynamic program.

    For each pool tweet x the double sum decomposes into (sum over z of the
    previous level's Accept+Reject values, minus x's own) plus (x's row sum of
    agree+disagree pair scores), normalized by |pool| - 1.
    """
    n_x = len(matrix.pool_ids)
    if level < 2 or table.max_level() < 1:
        raise ValueError("extend_consistency requires level >= 2 with level 1 present")
    if n_x < 2:
        return table  # chains through the pool are undefined; stay at level 1
    while table.max_level() < level:
        prev = table.levels[-1]
        prev_sum = prev.sum(axis=1)          # acc + rej per pool tweet
        pair_sum = matrix.f_pool.sum(axis=2).sum(axis=1)  # agree + disagree row sums
        value = (prev_sum.sum() - prev_sum + pair_sum) / (n_x - 1)
        table.levels.append(np.stack([value, value], axis=1))
    return table


def consistency_table(matrix: ScoreMatrix, depth: int) -> ConsistencyTable:
    """Build levels 1..depth (level 1 only when the pool has fewer than 2 tweets)."""
    table = ConsistencyTable(levels=[_level_one(matrix)])
    if depth > 1 and len(matrix.pool_ids) >= 2:
        extend_consistency(matrix, table, depth)
    return table


def mean_consistency(table: ConsistencyTable, x_index: int, stance: StanceLabel,
                     depth: int) -> float:
    """Mean of consistency levels 1..depth (restricted to levels actually defined)."""
    top = min(depth, table.max_level())
    col = STANCE_AXIS[stance]
    return float(np.mean([table.levels[l][x_index, col] for l in range(top)]))


def assign_stance(score_accept: float, score_reject: float, threshold: float) -> StanceLabel:
    """NoStance when neither hypothesis clears the threshold, else the argmax
    (exact ties resolve to Accept)."""
    if max(score_accept, score_reject) <= threshold:
        return StanceLabel.NO_STANCE
    return StanceLabel.ACCEPT if score_accept >= score_reject else StanceLabel.REJECT


def depth_scores(table: ConsistencyTable, depth: int):
    """Vectorized depth-averaged scores: (accept, reject) arrays over the pool.

    Levels >= 2 are stance-independent, so their sum is accumulated once and
    shared by both hypotheses; the two means then differ exactly by the level-1
    difference, which keeps the argmax identical at every depth.
    """
    top = min(depth, table.max_level())
    level1 = table.levels[0]
    tail = np.zeros(level1.shape[0])
    for l in range(1, top):
        tail = tail + table.levels[l][:, 0]
    return (level1[:, 0] + tail) / top, (level1[:, 1] + tail) / top


def _scores_for_pool(state, store, mist, graph, pool_ids, depth):
    """Depth-averaged (accept, reject) score pairs for every pool tweet."""
    matrix = pairwise_scores(state, store, mist, graph, pool_ids)
    table = consistency_table(matrix, depth)
    acc, rej = depth_scores(table, depth)
    return list(zip(acc.tolist(), rej.tolist()))


def _macro_f1(golds, preds) -> float:
    keys = [(f"t{i}", "m") for i in range(len(golds))]
    gold = [(k[0], k[1], s) for k, s in zip(keys, golds)]
    pred = [(k[0], k[1], s) for k, s in zip(keys, preds)]
    return evaluate(gold, pred).macro_f1


def sweep_threshold(score_pairs, golds) -> float:
    """Best no-stance threshold for one target's dev tweets.

    Candidates are midpoints between consecutive sorted max-hypothesis scores
    plus sentinels below and above the observed range; the candidate maximizing
    macro F1 over Accept/Reject wins, ties resolving to the smallest value.
    """
    best = np.array([max(a, r) for a, r in score_pairs])
    argmax = [StanceLabel.ACCEPT if a >= r else StanceLabel.REJECT
              for a, r in score_pairs]

    cuts = np.unique(best)
    candidates = [cuts[0] - 1.0]
    candidates += [0.5 * (lo + hi) for lo, hi in zip(cuts[:-1], cuts[1:])]
    candidates.append(cuts[-1] + 1.0)

    best_f1, best_t = -1.0, candidates[0]
    for t in candidates:
        preds = [StanceLabel.NO_STANCE if b <= t else s
                 for b, s in zip(best, argmax)]
        f1 = _macro_f1(golds, preds)
        if f1 > best_f1:
            best_f1, best_t = f1, float(t)
    return best_t


def calibrate_thresholds(state: ModelState, store: EmbeddingStore, mists,
                         stance_graphs: dict, dev_pairs, depth: int,
                         pool_pairs=None) -> ThresholdTable:
    """Pick each target's threshold by sweeping candidate cut points on dev data.

    Chain levels >= 2 carry offsets shared by a whole pool, so the pool used
    here must be the pool used at inference: pass the full unknown population
    as `pool_pairs` (defaults to the dev pairs themselves).  Targets without
    dev data fall back to the median calibrated threshold; an empty dev set
    yields an all-fallback table at 0.
    """
    by_mist = {}
    for tweet_id, mist_id, gold in dev_pairs:
        by_mist.setdefault(mist_id, []).append((tweet_id, gold))
    pools = {}
    for tweet_id, mist_id in (pool_pairs if pool_pairs is not None
                              else [(t, m) for t, m, _ in dev_pairs]):
        pools.setdefault(mist_id, []).append(tweet_id)

    mist_lookup = {m.id: m for m in mists}
    values = {}
    for mist_id, entries in sorted(by_mist.items()):
        graph = stance_graphs.get(mist_id)
        if graph is None or len(graph) == 0:
            continue
        pool_ids = pools.get(mist_id, [])
        for tweet_id, _ in entries:
            if tweet_id not in pool_ids:
                pool_ids.append(tweet_id)
        scored = _scores_for_pool(state, store, mist_lookup[mist_id], graph,
                                  pool_ids, depth)
        index = {tid: i for i, tid in enumerate(pool_ids)}
        pairs = [scored[index[t]] for t, _ in entries]
        golds = [g for _, g in entries]
        values[mist_id] = sweep_threshold(pairs, golds)

    fallback = float(np.median(list(values.values()))) if values else 0.0
    return ThresholdTable(values=values, global_fallback=fallback)


def infer(state: ModelState, store: EmbeddingStore, mists, stance_graphs: dict,
          pool_pairs, thresholds: ThresholdTable, depth: int,
          jobs: int = 1, predict_pairs=None) -> InferenceResult:
    """Assign a stance to every (tweet, target) pair in the unknown pool.

    Per target: score the pool against the stance graph, average consistency
    levels up to `depth`, threshold, and assign.  `pool_pairs` is the full
    unknown population the chains run through; `predict_pairs` optionally
    restricts which of those pairs are emitted (default: all of them).  Once
    every stance is finalized, each target's graph is extended with its newly
    labeled tweets.
    """
    pools = {}
    for tweet_id, mist_id in pool_pairs:
        pools.setdefault(mist_id, []).append(tweet_id)
    emit = None
    if predict_pairs is not None:
        emit = set(predict_pairs)
    mist_lookup = {m.id: m for m in mists}
    ordered = [mid for mid in pools if mid in mist_lookup]

    def run_one(mist_id):
        pool_ids = pools[mist_id]
        graph = stance_graphs.get(mist_id) or StanceGraph(mist_id=mist_id)
        pairs = _scores_for_pool(state, store, mist_lookup[mist_id], graph, pool_ids, depth)
        t = thresholds.get(mist_id)
        return [Prediction(tweet_id=x, mist_id=mist_id,
                           stance=assign_stance(a, r, t),
                           score_accept=a, score_reject=r)
                for x, (a, r) in zip(pool_ids, pairs)
                if emit is None or (x, mist_id) in emit]

    if jobs > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_mist = list(pool.map(run_one, ordered))
    else:
        per_mist = [run_one(mid) for mid in ordered]

    predictions = [p for chunk in per_mist for p in chunk]
    updated = dict(stance_graphs)
    for mist_id, chunk in zip(ordered, per_mist):
        finalized = [(p.tweet_id, p.stance) for p in chunk if p.stance in AC_STANCES]
        base = stance_graphs.get(mist_id) or StanceGraph(mist_id=mist_id)
        updated[mist_id] = update_stance_graph(base, finalized)
    return InferenceResult(predictions=predictions, updated_graphs=updated)
