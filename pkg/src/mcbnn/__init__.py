"""Bayesian neural network classification with MCMC-sampled weights.

Network weights are treated as random variables: a Gaussian prior plus a
softmax likelihood define an unnormalized posterior, and random-walk
Metropolis-Hastings or Hamiltonian Monte Carlo draw weight samples from
it. Predictions average the network forward pass over those samples, so
every prediction carries a posterior-predictive distribution and an
entropy-based uncertainty score. Supporting pieces: a fixed random
convolutional feature extractor for grayscale images, deterministic
augmentation, evaluation metrics with ROC/AUC, convergence diagnostics,
dataset ingestion (CSV and binary PGM), and a reproducible CLI.
"""

__version__ = "0.1.0"

from .augmentation import AugmentPolicy, augment_dataset, flip, rotate, scale
from .data import (
    SplitSpec,
    StandardizationParams,
    apply_standardizer,
    fit_standardizer,
    load_csv,
    load_image_dir,
    read_pgm,
    save_csv,
    split_indices,
    stratified_split,
    synth_blobs,
    write_pgm,
)
from .diagnostics import (
    ChainDiagnostics,
    acceptance_rate,
    chain_diagnostics,
    ess,
    split_rhat,
)
from .errors import ConfigError, DataError, DivergenceError
from .estimators import BnnClassifier, RandomConvFeatures, Standardizer
from .evaluation import (
    MetricsReport,
    RocCurve,
    auc_mann_whitney,
    confusion_matrix,
    f1_score,
    metrics_from_confusion,
    roc_curve,
)
from .features import ConvStackSpec, extract_features, extract_features_batch
from .model import (
    Dataset,
    NetworkSpec,
    PriorSpec,
    forward,
    forward_batch,
    grad_log_posterior,
    log_likelihood,
    log_posterior_unnorm,
    log_prior,
    pack_weights,
    param_count,
    unpack_weights,
)
from .samplers import (
    Chain,
    HmcConfig,
    RandomWalkProposal,
    TargetDensity,
    hamiltonian,
    hmc_step,
    leapfrog,
    mh_acceptance_log_prob,
    mh_step,
    posterior_predict,
    posterior_predict_batch,
    posterior_target,
    run_chain,
    run_chains,
)

__all__ = [
    "__version__",
    "AugmentPolicy", "augment_dataset", "flip", "rotate", "scale",
    "SplitSpec", "StandardizationParams", "apply_standardizer",
    "fit_standardizer", "load_csv", "load_image_dir", "read_pgm", "save_csv",
    "split_indices", "stratified_split", "synth_blobs", "write_pgm",
    "ChainDiagnostics", "acceptance_rate", "chain_diagnostics", "ess",
    "split_rhat",
    "ConfigError", "DataError", "DivergenceError",
    "BnnClassifier", "RandomConvFeatures", "Standardizer",
    "MetricsReport", "RocCurve", "auc_mann_whitney", "confusion_matrix",
    "f1_score", "metrics_from_confusion", "roc_curve",
    "ConvStackSpec", "extract_features", "extract_features_batch",
    "Dataset", "NetworkSpec", "PriorSpec", "forward", "forward_batch",
    "grad_log_posterior", "log_likelihood", "log_posterior_unnorm",
    "log_prior", "pack_weights", "param_count", "unpack_weights",
    "Chain", "HmcConfig", "RandomWalkProposal", "TargetDensity",
    "hamiltonian", "hmc_step", "leapfrog", "mh_acceptance_log_prob",
    "mh_step", "posterior_predict", "posterior_predict_batch",
    "posterior_target", "run_chain", "run_chains",
]
