"""Stance-labeled tweet graphs for misinformation targets.

For each misinformation target, tweets with a known Accept or Reject stance
form a complete graph: same-stance pairs share an implicit *agree* relation,
opposite-stance pairs an implicit *disagree* relation.  Relations are never
materialized as edge lists; they are derived from node stances on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .errors import DuplicateNodeError, InvalidStanceError


class StanceLabel(Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"
    NO_STANCE = "NoStance"

    @classmethod
    def parse(cls, raw: str) -> "StanceLabel":
        for member in cls:
            if member.value == raw:
                return member
        raise ValueError(f"unknown stance label {raw!r}")


#: Stance values that participate in attitude consistency.
AC_STANCES = (StanceLabel.ACCEPT, StanceLabel.REJECT)


class RelationType(Enum):
    AGREE = "Agree"
    DISAGREE = "Disagree"

    def flipped(self) -> "RelationType":
        return RelationType.DISAGREE if self is RelationType.AGREE else RelationType.AGREE


def implied_relation(stance_x: StanceLabel, stance_y: StanceLabel) -> RelationType:
    """Relation type a pair of stances implies under attitude consistency.

    Same stance implies agreement, opposite stance implies disagreement.
    Both arguments must be Accept or Reject.
    """
    if stance_x not in AC_STANCES or stance_y not in AC_STANCES:
        raise InvalidStanceError(
            f"attitude consistency is defined only over {[s.value for s in AC_STANCES]}, "
            f"got ({stance_x.value}, {stance_y.value})"
        )
    return RelationType.AGREE if stance_x is stance_y else RelationType.DISAGREE


@dataclass(frozen=True)
class MisinfoTarget:
    """A known misinformation claim tweets take a stance toward."""

    id: str
    text: str = ""
    theme: str = ""
    concern: str = ""


@dataclass(frozen=True)
class TweetNode:
    id: str
    text: Optional[str] = None
    embedding_key: str = ""

    def __post_init__(self):
        if not self.embedding_key:
            object.__setattr__(self, "embedding_key", self.id)


@dataclass(frozen=True)
class StanceGraph:
    """Per-target graph of (tweet_id, stance) nodes, stance restricted to Accept/Reject.

    Node order is insertion order; all iteration over a graph is deterministic.
    Instances are immutable and safe to share across threads.
    """

    mist_id: str
    nodes: tuple = field(default_factory=tuple)  # tuple of (tweet_id, StanceLabel)

    def __len__(self) -> int:
        return len(self.nodes)

    def tweet_ids(self) -> list:
        return [tid for tid, _ in self.nodes]

    def stances(self) -> list:
        return [s for _, s in self.nodes]

    def stance_of(self, tweet_id: str) -> StanceLabel:
        for tid, s in self.nodes:
            if tid == tweet_id:
                return s
        raise KeyError(tweet_id)

    def __contains__(self, tweet_id: str) -> bool:
        return any(tid == tweet_id for tid, _ in self.nodes)

    def relation_between(self, tweet_u: str, tweet_v: str) -> RelationType:
        return implied_relation(self.stance_of(tweet_u), self.stance_of(tweet_v))


@dataclass(frozen=True)
class UnlabeledPool:
    """Tweets with unknown stance toward one target; disjoint from its stance graph."""

    mist_id: str
    tweet_ids: tuple = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.tweet_ids)


def build_stance_graph(mist_id: str, labeled: Iterable) -> StanceGraph:
    """Build a stance graph from (tweet_id, stance) pairs.

    NoStance entries are dropped; remaining node order follows input order.
    Raises DuplicateNodeError if any tweet id repeats in the input.
    """
    seen = set()
    nodes = []
    for tweet_id, stance in labeled:
        if tweet_id in seen:
            raise DuplicateNodeError(f"tweet {tweet_id!r} listed twice for target {mist_id!r}")
        seen.add(tweet_id)
        if stance in AC_STANCES:
            nodes.append((tweet_id, stance))
    return StanceGraph(mist_id=mist_id, nodes=tuple(nodes))


def update_stance_graph(graph: StanceGraph, finalized: Iterable) -> StanceGraph:
    """Extend a stance graph with newly finalized (tweet_id, stance) pairs.

    NoStance entries are excluded.  A tweet already present in the graph (or
    repeated in `finalized`) raises DuplicateNodeError.
    """
    seen = set(graph.tweet_ids())
    nodes = list(graph.nodes)
    for tweet_id, stance in finalized:
        if tweet_id in seen:
            raise DuplicateNodeError(f"tweet {tweet_id!r} already in graph for {graph.mist_id!r}")
        seen.add(tweet_id)
        if stance in AC_STANCES:
            nodes.append((tweet_id, stance))
    return StanceGraph(mist_id=graph.mist_id, nodes=tuple(nodes))
