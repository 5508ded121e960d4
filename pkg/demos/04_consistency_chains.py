"""How chain depth shapes the consistency scores.

Level 1 compares a tweet directly against the labeled graph; deeper levels
route through other unlabeled tweets.  Two things are visible below:

  * from level 2 upward the Accept and Reject hypotheses score identically,
    so depth never changes which stance wins -- it only moves both scores
    relative to the no-stance threshold;
  * the level values grow geometrically with depth (each level sums the
    previous one over both hypotheses), which is why thresholds must be
    calibrated with the same pool and depth used at inference.
"""

import numpy as np

from stancekg import StanceLabel, consistency_table, depth_scores
from stancekg.consistency import ScoreMatrix

rng = np.random.default_rng(7)
n_pool, n_graph = 5, 3
stances = [StanceLabel.ACCEPT, StanceLabel.REJECT, StanceLabel.ACCEPT]
matrix = ScoreMatrix(
    mist_id="demo",
    pool_ids=[f"u{i}" for i in range(n_pool)],
    graph_ids=[f"g{j}" for j in range(n_graph)],
    graph_stances=stances,
    f_graph=rng.normal(-2.0, 1.0, size=(n_pool, n_graph, 2)),
    f_pool=rng.normal(-2.0, 1.0, size=(n_pool, n_pool, 2)),
)
for i in range(n_pool):
    matrix.f_pool[i, i, :] = 0.0

table = consistency_table(matrix, depth=6)
print("levels for pool tweet u0 (accept vs reject hypothesis):")
for level in range(1, 7):
    acc = table.value(level, 0, StanceLabel.ACCEPT)
    rej = table.value(level, 0, StanceLabel.REJECT)
    marker = "  <- differs" if acc != rej else ""
    print(f"  level {level}: {acc:>12.4f} / {rej:>12.4f}{marker}")

print("\ndepth-averaged scores and the argmax they induce:")
for depth in (1, 2, 4, 6):
    acc, rej = depth_scores(table, depth)
    pick = "Accept" if acc[0] >= rej[0] else "Reject"
    print(f"  depth {depth}: {acc[0]:>12.4f} / {rej[0]:>12.4f} -> {pick}")
print("\nthe winner never changes with depth; only the magnitude does")
