"""Relation scoring functions over knowledge embeddings, with analytic gradients.

Five standard link-prediction models score the plausibility of an
(entity, relation, entity) triple; all distance-style scores use the L1 norm:

  TransE   f = -|| x + m - y ||
  TransD   f = -|| (I + m_p x_p^T) x + m - (I + m_p y_p^T) y ||
  TransMS  f = -|| -tanh(y*m)*x + m + alpha*(x*y) - tanh(x*m)*y ||   (* elementwise)
  TuckER   f = W ×1 x ×2 m ×3 y                (core-tensor trilinear product)
  RotatE   f = -sum_k |x_k e^{i th_k} - y_k|   (componentwise complex modulus)

RotatE entities are complex vectors stored as interleaved (re, im) reals; the
relation is stored as a vector of angles and exponentiated on use, so it keeps
unit modulus under any parameter update.  At L1 kinks (a residual component of
exactly zero) gradients use the subgradient 0.

All kernels operate on a leading batch axis; the public `score`/`grad_score`
functions wrap a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import MissingParameterError, ShapeError
from .graph import RelationType


class ScoringModel(Enum):
    TRANSE = "transe"
    TRANSD = "transd"
    TRANSMS = "transms"
    TUCKER = "tucker"
    ROTATE = "rotate"

    @classmethod
    def parse(cls, raw: str) -> "ScoringModel":
        try:
            return cls(raw.lower())
        except ValueError:
            raise ValueError(f"unknown scoring model {raw!r}; expected one of "
                             f"{[m.value for m in cls]}") from None


def entity_width(kind: ScoringModel, dim_k: int) -> int:
    """Length of an entity's raw embedding vector for a model of latent size dim_k."""
    if kind is ScoringModel.TRANSD:
        return 2 * dim_k  # vector || projection
    if kind is ScoringModel.ROTATE:
        return 2 * dim_k  # interleaved re/im
    return dim_k


def relation_width(kind: ScoringModel, dim_k: int) -> int:
    """Length of a relation's raw embedding vector (angles for RotatE)."""
    if kind is ScoringModel.TRANSD:
        return 2 * dim_k
    return dim_k


@dataclass
class EntityEmbedding:
    vector: np.ndarray
    projection: Optional[np.ndarray] = None  # TransD only


@dataclass
class RelationEmbedding:
    vector: np.ndarray
    projection: Optional[np.ndarray] = None  # TransD only
    phases: bool = False                     # RotatE: vector holds angles
    mist_id: str = ""
    relation: Optional[RelationType] = None


@dataclass
class ModelExtras:
    """Model-specific learned parameters outside the embeddings themselves."""

    tucker_core: Optional[np.ndarray] = None
    # alpha scalar per (target id, relation type)
    transms_alpha: Optional[dict] = None


@dataclass
class ScoreGradients:
    """Partial derivatives of a score with respect to every input component."""

    te_x: np.ndarray
    me: np.ndarray
    te_y: np.ndarray
    te_x_projection: Optional[np.ndarray] = None
    me_projection: Optional[np.ndarray] = None
    te_y_projection: Optional[np.ndarray] = None
    tucker_core: Optional[np.ndarray] = None
    alpha: Optional[float] = None


# ---------------------------------------------------------------------------
# batched kernels; x/y/m are (B, n) float arrays


def transe_scores(x, m, y):
    return -np.abs(x + m - y).sum(axis=-1)


def transe_grads(x, m, y):
    s = np.sign(x + m - y)
    return -s, -s, s  # d/dx, d/dm, d/dy


def transd_scores(x, xp, m, mp, y, yp):
    px = (xp * x).sum(axis=-1, keepdims=True)
    py = (yp * y).sum(axis=-1, keepdims=True)
    r = x + px * mp + m - y - py * mp
    return -np.abs(r).sum(axis=-1)


def transd_grads(x, xp, m, mp, y, yp):
    px = (xp * x).sum(axis=-1, keepdims=True)
    py = (yp * y).sum(axis=-1, keepdims=True)
    s = np.sign(x + px * mp + m - y - py * mp)
    mps = (mp * s).sum(axis=-1, keepdims=True)
    gx = -(s + mps * xp)
    gxp = -mps * x
    gm = -s
    gmp = -(px - py) * s
    gy = s + mps * yp
    gyp = mps * y
    return gx, gxp, gm, gmp, gy, gyp


def transms_scores(x, m, y, alpha):
    a = np.asarray(alpha).reshape(-1, 1)
    r = -np.tanh(y * m) * x + m + a * (x * y) - np.tanh(x * m) * y
    return -np.abs(r).sum(axis=-1)


def transms_grads(x, m, y, alpha):
    a = np.asarray(alpha).reshape(-1, 1)
    t1 = np.tanh(y * m)
    t2 = np.tanh(x * m)
    s = np.sign(-t1 * x + m + a * (x * y) - t2 * y)
    gx = -s * (-t1 + a * y - (1.0 - t2 ** 2) * m * y)
    gy = -s * (-(1.0 - t1 ** 2) * m * x + a * x - t2)
    gm = -s * (-(1.0 - t1 ** 2) * y * x + 1.0 - (1.0 - t2 ** 2) * x * y)
    galpha = -(s * x * y).sum(axis=-1)
    return gx, gm, gy, galpha


def tucker_scores(x, m, y, core):
    return np.einsum("bi,ijk,bj,bk->b", x, core, m, y)


def tucker_grads(x, m, y, core):
    gx = np.einsum("ijk,bj,bk->bi", core, m, y)
    gm = np.einsum("bi,ijk,bk->bj", x, core, y)
    gy = np.einsum("bi,ijk,bj->bk", x, core, m)
    return gx, gm, gy


def tucker_core_grad(x, m, y, weights):
    """Weighted sum over the batch of per-triple core-tensor gradients."""
    return np.einsum("b,bi,bj,bk->ijk", weights, x, m, y)


def _split_complex(v):
    return v[..., 0::2], v[..., 1::2]


def rotate_scores(x, theta, y):
    xr, xi = _split_complex(x)
    yr, yi = _split_complex(y)
    c, s = np.cos(theta), np.sin(theta)
    zr = xr * c - xi * s - yr
    zi = xr * s + xi * c - yi
    return -np.hypot(zr, zi).sum(axis=-1)


def rotate_grads(x, theta, y):
    xr, xi = _split_complex(x)
    yr, yi = _split_complex(y)
    c, s = np.cos(theta), np.sin(theta)
    pr = xr * c - xi * s
    pi = xr * s + xi * c
    zr, zi = pr - yr, pi - yi
    mod = np.hypot(zr, zi)
    # unit residual direction; subgradient 0 where the modulus vanishes
    with np.errstate(invalid="ignore", divide="ignore"):
        ur = np.where(mod > 0, zr / np.where(mod > 0, mod, 1.0), 0.0)
        ui = np.where(mod > 0, zi / np.where(mod > 0, mod, 1.0), 0.0)
    gxr = -(ur * c + ui * s)
    gxi = -(-ur * s + ui * c)
    gyr = ur
    gyi = ui
    gtheta = ur * pi - ui * pr
    gx = np.empty_like(x)
    gx[..., 0::2], gx[..., 1::2] = gxr, gxi
    gy = np.empty_like(y)
    gy[..., 0::2], gy[..., 1::2] = gyr, gyi
    return gx, gtheta, gy


# ---------------------------------------------------------------------------
# single-triple API


def _check_triple(kind, te_x, me_r, te_y, extras):
    x, m, y = np.asarray(te_x.vector, float), np.asarray(me_r.vector, float), np.asarray(te_y.vector, float)
    if x.ndim != 1 or m.ndim != 1 or y.ndim != 1:
        raise ShapeError("embeddings must be 1-d vectors")

    if kind is ScoringModel.ROTATE:
        if not me_r.phases:
            raise ShapeError("RotatE relation embedding must be phase-valued")
        if x.shape[0] != y.shape[0] or x.shape[0] != 2 * m.shape[0]:
            raise ShapeError(
                f"RotatE expects entities of length 2*{m.shape[0]}, got {x.shape[0]} and {y.shape[0]}")
        return x, None, m, None, y, None, None, None

    if kind is ScoringModel.TUCKER:
        if extras is None or extras.tucker_core is None:
            raise MissingParameterError("TuckER requires a core tensor in ModelExtras")
        core = np.asarray(extras.tucker_core, float)
        if core.shape != (x.shape[0], m.shape[0], y.shape[0]):
            raise ShapeError(f"core tensor shape {core.shape} does not match "
                             f"({x.shape[0]}, {m.shape[0]}, {y.shape[0]})")
        return x, None, m, None, y, None, core, None

    if x.shape != m.shape or x.shape != y.shape:
        raise ShapeError(f"dimension mismatch: x{x.shape}, m{m.shape}, y{y.shape}")

    if kind is ScoringModel.TRANSD:
        if te_x.projection is None or te_y.projection is None or me_r.projection is None:
            raise ShapeError("TransD requires projection vectors on both entities and the relation")
        xp = np.asarray(te_x.projection, float)
        yp = np.asarray(te_y.projection, float)
        mp = np.asarray(me_r.projection, float)
        if xp.shape != x.shape or yp.shape != y.shape or mp.shape != m.shape:
            raise ShapeError("TransD projection vectors must match embedding dimension")
        return x, xp, m, mp, y, yp, None, None

    if kind is ScoringModel.TRANSMS:
        if extras is None or extras.transms_alpha is None:
            raise MissingParameterError("TransMS requires the alpha table in ModelExtras")
        key = (me_r.mist_id, me_r.relation)
        if key not in extras.transms_alpha:
            raise MissingParameterError(f"no TransMS alpha for {key!r}")
        return x, None, m, None, y, None, None, float(extras.transms_alpha[key])

    return x, None, m, None, y, None, None, None


def score(kind: ScoringModel, te_x: EntityEmbedding, me_r: RelationEmbedding,
          te_y: EntityEmbedding, extras: Optional[ModelExtras] = None) -> float:
    """Plausibility score of a triple under the given model."""
    x, xp, m, mp, y, yp, core, alpha = _check_triple(kind, te_x, me_r, te_y, extras)
    if kind is ScoringModel.TRANSE:
        return float(transe_scores(x[None], m[None], y[None])[0])
    if kind is ScoringModel.TRANSD:
        return float(transd_scores(x[None], xp[None], m[None], mp[None], y[None], yp[None])[0])
    if kind is ScoringModel.TRANSMS:
        return float(transms_scores(x[None], m[None], y[None], np.array([alpha]))[0])
    if kind is ScoringModel.TUCKER:
        return float(tucker_scores(x[None], m[None], y[None], core)[0])
    return float(rotate_scores(x[None], m[None], y[None])[0])


def grad_score(kind: ScoringModel, te_x: EntityEmbedding, me_r: RelationEmbedding,
               te_y: EntityEmbedding, extras: Optional[ModelExtras] = None) -> ScoreGradients:
    """Analytic partial derivatives of `score` with respect to every input."""
    x, xp, m, mp, y, yp, core, alpha = _check_triple(kind, te_x, me_r, te_y, extras)
    if kind is ScoringModel.TRANSE:
        gx, gm, gy = transe_grads(x[None], m[None], y[None])
        return ScoreGradients(te_x=gx[0], me=gm[0], te_y=gy[0])
    if kind is ScoringModel.TRANSD:
        gx, gxp, gm, gmp, gy, gyp = transd_grads(
            x[None], xp[None], m[None], mp[None], y[None], yp[None])
        return ScoreGradients(te_x=gx[0], me=gm[0], te_y=gy[0],
                              te_x_projection=gxp[0], me_projection=gmp[0],
                              te_y_projection=gyp[0])
    if kind is ScoringModel.TRANSMS:
        gx, gm, gy, galpha = transms_grads(x[None], m[None], y[None], np.array([alpha]))
        return ScoreGradients(te_x=gx[0], me=gm[0], te_y=gy[0], alpha=float(galpha[0]))
    if kind is ScoringModel.TUCKER:
        gx, gm, gy = tucker_grads(x[None], m[None], y[None], core)
        gcore = tucker_core_grad(x[None], m[None], y[None], np.ones(1))
        return ScoreGradients(te_x=gx[0], me=gm[0], te_y=gy[0], tucker_core=gcore)
    gx, gtheta, gy = rotate_grads(x[None], m[None], y[None])
    return ScoreGradients(te_x=gx[0], me=gtheta[0], te_y=gy[0])
