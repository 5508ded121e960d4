"""Synthetic dataset generator with planted stance structure.

Per target, Accept and Reject tweets form two Gaussian clusters in content
space whose centers are drawn with standard deviation `sigma` per coordinate;
NoStance tweets are scattered background points drawn from the same envelope
but with no shared center.  At sigma = 0 every center collapses to the origin
and the labels carry no recoverable signal (the negative control).

Everything (labels, split assignment, vectors) is derived from one seeded
generator, so identical parameters reproduce identical files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoders import EmbeddingStore
from .errors import ConfigError
from .graph import MisinfoTarget, StanceLabel
from .storage import DEFAULT_TAXONOMY, DatasetRecord

STANCE_PHRASES = {
    StanceLabel.ACCEPT: "totally true, sharing this claim",
    StanceLabel.REJECT: "debunked nonsense, do not believe this claim",
    StanceLabel.NO_STANCE: "unrelated chatter near this claim",
}


@dataclass
class SynthConfig:
    sigma: float = 5.0
    n_tweets: int = 200
    n_mists: int = 4
    seed: int = 13
    dim: int = 48
    noise: float = 0.5
    mist_scale: float = 5.0
    accept_fraction: float = 0.5
    reject_fraction: float = 0.3
    train_fraction: float = 0.6
    dev_fraction: float = 0.2

    def validate(self):
        if self.n_tweets < 4:
            raise ConfigError("need at least 4 tweets")
        if self.n_mists < 1:
            raise ConfigError("need at least 1 target")
        if self.dim < 2:
            raise ConfigError("content dimension must be >= 2")
        if self.sigma < 0 or self.noise <= 0:
            raise ConfigError("sigma must be >= 0 and noise > 0")
        if not (0 < self.accept_fraction and 0 < self.reject_fraction
                and self.accept_fraction + self.reject_fraction < 1):
            raise ConfigError("stance fractions must be positive and sum below 1")
        if not (0 < self.train_fraction and 0 < self.dev_fraction
                and self.train_fraction + self.dev_fraction < 1):
            raise ConfigError("split fractions must be positive and sum below 1")


def _split_sizes(n: int, cfg: SynthConfig):
    if n == 1:
        return 1, 0, 0
    if n == 2:
        return 1, 1, 0
    n_dev = max(1, int(round(n * cfg.dev_fraction)))
    n_test = max(1, int(round(n * (1 - cfg.train_fraction - cfg.dev_fraction))))
    n_train = max(1, n - n_dev - n_test)
    while n_train + n_dev + n_test > n:
        if n_dev > 1:
            n_dev -= 1
        else:
            n_test -= 1
    return n_train, n_dev, n_test


def generate(cfg: SynthConfig):
    """Returns (mists, dataset records, embedding store)."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    themes = list(DEFAULT_TAXONOMY.keys())

    mists = []
    store = EmbeddingStore(dim=cfg.dim)
    records = []

    per_mist = [cfg.n_tweets // cfg.n_mists] * cfg.n_mists
    for i in range(cfg.n_tweets - sum(per_mist)):
        per_mist[i] += 1

    tweet_counter = 0
    for mi in range(cfg.n_mists):
        theme = themes[mi % len(themes)]
        concerns = DEFAULT_TAXONOMY[theme]
        mist = MisinfoTarget(
            id=f"m{mi + 1:03d}",
            text=f"synthetic claim {mi + 1}: vaccines {theme.replace('-', ' ')}",
            theme=theme, concern=concerns[mi % len(concerns)])
        mists.append(mist)
        store.add(mist.id, rng.normal(0.0, cfg.mist_scale, size=cfg.dim))

        center_accept = rng.normal(0.0, cfg.sigma, size=cfg.dim)
        center_reject = rng.normal(0.0, cfg.sigma, size=cfg.dim)

        # stance labels for this target's tweets
        n = per_mist[mi]
        draws = rng.random(n)
        stances = []
        for u in draws:
            if u < cfg.accept_fraction:
                stances.append(StanceLabel.ACCEPT)
            elif u < cfg.accept_fraction + cfg.reject_fraction:
                stances.append(StanceLabel.REJECT)
            else:
                stances.append(StanceLabel.NO_STANCE)

        entries = []
        for stance in stances:
            tweet_counter += 1
            tid = f"t{tweet_counter:05d}"
            if stance is StanceLabel.ACCEPT:
                vec = center_accept + rng.normal(0.0, cfg.noise, size=cfg.dim)
            elif stance is StanceLabel.REJECT:
                vec = center_reject + rng.normal(0.0, cfg.noise, size=cfg.dim)
            else:
                vec = rng.normal(0.0, cfg.sigma, size=cfg.dim) \
                    + rng.normal(0.0, cfg.noise, size=cfg.dim)
            store.add(tid, vec)
            text = f"synthetic tweet {tid}: {STANCE_PHRASES[stance]} {mist.id}"
            entries.append((tid, stance, text))

        # stratified split per stance so every split sees every label
        for stance in (StanceLabel.ACCEPT, StanceLabel.REJECT, StanceLabel.NO_STANCE):
            group = [e for e in entries if e[1] is stance]
            rng.shuffle(group)
            if not group:
                continue
            n_train, n_dev, n_test = _split_sizes(len(group), cfg)
            for k, (tid, s, text) in enumerate(group):
                split = ("train" if k < n_train
                         else "dev" if k < n_train + n_dev else "test")
                records.append(DatasetRecord(tweet_id=tid, mist_id=mist.id,
                                             stance=s, split=split, text=text))

    records.sort(key=lambda r: (r.mist_id, r.tweet_id))
    return mists, records, store
