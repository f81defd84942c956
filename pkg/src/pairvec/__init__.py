"""Co-occurrence pair embeddings with softmax-family losses and
score-adaptive negative sampling."""

from .errors import ConfigError, DataError, NumericalAbort
from .estimator import CooccurrenceEmbedding
from .evaluation import (MetricsReport, analogy_eval, approx_mpr, precision_at_k,
                         similarity_eval, test_likelihood)
from .ingest import (PairDataset, load_analogy_file, load_pair_cache,
                     load_similarity_file, pairs_from_ratings, pairs_from_text,
                     save_pair_cache, split_dataset)
from .losses import (LossGrad, NegativeSet, bce_loss_grad, conditional_softmax,
                     consistency_gradient, expected_negative_distribution,
                     mle_loss_grad, relaxed_softmax_loss_grad,
                     sampled_softmax_loss_grad)
from .model import (ModelParams, Vocab, export_word2vec, init_params,
                    load_checkpoint, save_checkpoint, score, score_all_targets)
from .sampling import (CategoricalTable, SamplerSpec, boltzmann_probs,
                       draw_negatives, popularity_distribution)
from .synthetic import (GroundTruth, build_mixture, conditional, kl_conditional,
                        kl_joint, load_ground_truth, mean_empirical_conditional_kl,
                        mean_true_conditional_kl, mixture_joint, oracle_degeneracy,
                        sample_pairs, save_ground_truth)
from .training import (RunRecord, TrainConfig, grid_search_temperature,
                       run_experiment_suite, train)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
