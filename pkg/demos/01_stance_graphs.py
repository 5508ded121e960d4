"""Stance graphs and the relations their labels imply.

Tweets that take a stance toward a misinformation claim form a complete
graph: tweets sharing a stance implicitly agree, tweets on opposite sides
implicitly disagree.  Nothing is stored for the edges; they fall out of the
node labels.
"""

from itertools import combinations

from stancekg import StanceLabel, build_stance_graph, implied_relation, update_stance_graph

A, R, N = StanceLabel.ACCEPT, StanceLabel.REJECT, StanceLabel.NO_STANCE

labeled = [
    ("tw-accept-1", A),
    ("tw-accept-2", A),
    ("tw-reject-1", R),
    ("tw-neutral-1", N),   # dropped: no-stance tweets never enter the graph
    ("tw-reject-2", R),
]
graph = build_stance_graph("claim-microchips", labeled)
print(f"graph for {graph.mist_id!r} has {len(graph)} nodes "
      f"(one input row was NoStance and was dropped)\n")

print("every pair carries an implicit relation:")
for (u, su), (v, sv) in combinations(graph.nodes, 2):
    print(f"  {u:>12} / {v:<12} -> {implied_relation(su, sv).value}")

# once inference finalizes new stances, the graph grows
grown = update_stance_graph(graph, [("tw-new-1", A), ("tw-new-2", N)])
print(f"\nafter finalizing two more tweets: {len(grown)} nodes "
      "(the NoStance one was again excluded)")
