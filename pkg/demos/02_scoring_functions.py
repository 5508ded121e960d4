"""The five relation scoring functions, side by side.

Each model scores how plausible a relation embedding is between two entity
embeddings.  Translation-style models peak at 0 (perfect fit) and go negative
with L1 distance; the bilinear core-tensor model is unbounded in sign.
"""

import numpy as np

from stancekg import (EntityEmbedding, ModelExtras, RelationEmbedding,
                      RelationType, ScoringModel, grad_score, score)

x = EntityEmbedding(np.array([1.0, 0.5]))
y = EntityEmbedding(np.array([0.2, -0.3]))
m = RelationEmbedding(np.array([-0.5, -0.5]), mist_id="m1", relation=RelationType.AGREE)

print("translation: f = -||x + m - y||_1")
print(f"  score = {score(ScoringModel.TRANSE, x, m, y):.4f}")
g = grad_score(ScoringModel.TRANSE, x, m, y)
print(f"  df/dx = {g.te_x}, df/dy = {g.te_y}   (L1 signs)\n")

xd = EntityEmbedding(np.array([1.0, 0.5]), projection=np.array([0.3, 0.0]))
yd = EntityEmbedding(np.array([0.2, -0.3]), projection=np.array([0.0, 0.1]))
md = RelationEmbedding(np.array([-0.5, -0.5]), projection=np.array([0.2, 0.2]))
print("dynamic projection: entities are mapped by (I + m_p e_p^T) first")
print(f"  score = {score(ScoringModel.TRANSD, xd, md, yd):.4f}\n")

extras = ModelExtras(transms_alpha={("m1", RelationType.AGREE): 0.5,
                                    ("m1", RelationType.DISAGREE): 0.5})
print("multi-shift: tanh cross terms plus a learned per-target scalar")
print(f"  score = {score(ScoringModel.TRANSMS, x, m, y, extras):.4f}\n")

core = np.zeros((2, 2, 2))
core[0, 0, 0] = core[1, 1, 1] = 1.0
print("core tensor: trilinear form, sign-unbounded")
print(f"  score = {score(ScoringModel.TUCKER, x, m, y, ModelExtras(tucker_core=core)):.4f}\n")

xr = EntityEmbedding(np.array([1.0, 0.0, 0.5, 0.5]))       # two complex dims
yr = EntityEmbedding(np.array([0.0, 1.0, -0.5, 0.5]))
theta = RelationEmbedding(np.array([np.pi / 2, np.pi]), phases=True)
print("rotation: relation acts as unit-modulus complex factors")
print(f"  score = {score(ScoringModel.ROTATE, xr, theta, yr):.4f}")
print("  (a quarter turn maps 1+0i onto 0+1i, so the first dim fits exactly)")
