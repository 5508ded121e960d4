"""Stance identification over misinformation knowledge graphs.

Tweets with known Accept/Reject stance toward a misinformation target span a
complete graph of implicit agree/disagree relations.  Knowledge embeddings of
those relations are trained with a margin loss, and unlabeled tweets are
assigned stances by transitive attitude-consistency scoring against the graph.
"""

from .consistency import (ConsistencyTable, InferenceResult, Prediction,
                          ScoreMatrix, ThresholdTable, assign_stance,
                          calibrate_thresholds, consistency_level1,
                          consistency_table, depth_scores, extend_consistency,
                          infer, mean_consistency, pairwise_scores,
                          sweep_threshold)
from .encoders import (EmbeddingStore, ProjectionWeights, encode_mist,
                       encode_tweet, hash_encode, init_projection_weights)
from .graph import (AC_STANCES, MisinfoTarget, RelationType, StanceGraph,
                    StanceLabel, TweetNode, UnlabeledPool, build_stance_graph,
                    implied_relation, update_stance_graph)
from .metrics import EvalReport, ThemeReport, evaluate, evaluate_by_theme, macro_average
from .scoring import (EntityEmbedding, ModelExtras, RelationEmbedding,
                      ScoreGradients, ScoringModel, grad_score, score)
from .trainer import (ModelState, RelationInstance, TrainConfig, adam_step,
                      enumerate_positives, init_model_state, learning_rate_at,
                      margin_loss, sample_negative, train)

__version__ = "0.1.0"
