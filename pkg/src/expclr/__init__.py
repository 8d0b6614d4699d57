"""Contrastive time-series representation learning from continuous expert
features, with bilipschitz and PAC audits of the learned embedding."""

from .audit import (BilipschitzReport, PacCurve, PacReport, RescalingReport,
                    empirical_violation_rate, fit_linear_decoder,
                    optimize_free_embeddings, pac_bound_one_sided,
                    pac_bound_training_interval, pac_bound_validation_interval,
                    pac_curve, pac_report, pair_lipschitz, pairwise_z,
                    rescaling_counterexample, sample_disjoint_pairs,
                    tau_limit_probe)
from .data import (Dataset, DatasetIOError, InconsistencyError,
                   MagicMismatchError, SyntheticSpec, TruncatedFileError,
                   VersionMismatchError, expert_feature_map,
                   generate_synthetic, load_dataset, one_hot,
                   reference_dataset, reference_spec, save_dataset, split,
                   standardize_features, subsample_labels)
from .diffcore import (AdamState, ParamDict, adam_step, grad_check,
                       init_adam_state, lse_mean)
from .encoder import (EncoderConfig, EncoderParams, encode, encode_backward,
                      init_encoder, load_params, parameter_count, save_params)
from .evaluation import LinearProbe, fit_linear_probe, knn_accuracy, probe_accuracy
from .geometry import (DistanceMatrix, SimilaritySpec,
                       distance_gradient_to_embeddings, pairwise_distances,
                       row_mean_norms, similarity_matrix)
from .losses import (LinearMap, LossOutput, MarginSpec, bin_pseudo_labels,
                     binned_pair_loss, expclr_loss, mse_decode_loss,
                     pair_loss, quad_loss, softmax_weights)
from .trainer import (EpochRecord, TrainConfig, TrainHistory, fine_tune,
                      train, train_cross_entropy)

__version__ = "0.1.0"
