"""Scikit-learn style wrappers around the sampling pipeline.

These adapters add fit/predict/transform surfaces (and get_params, so the
objects compose with model selection utilities) on top of the functional
core. Only the estimator plumbing comes from scikit-learn; every algorithm
underneath is implemented in this package.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from . import data as data_mod
from . import features as features_mod
from .diagnostics import ChainDiagnostics, chain_diagnostics
from .model import Dataset, NetworkSpec, PriorSpec, param_count
from .samplers import (
    HmcConfig,
    RandomWalkProposal,
    posterior_predict_batch,
    posterior_target,
    run_chains,
)
from ._validation import as_matrix, check_fitted


class BnnClassifier(ClassifierMixin, BaseEstimator):
    """Classifier whose weights are posterior samples, not point estimates.

    ``fit`` runs MCMC over the weight posterior of a small feedforward
    network (Gaussian prior, softmax likelihood); ``predict_proba`` averages
    the forward pass over the retained samples. ``kernel`` selects
    Hamiltonian Monte Carlo ("hmc", gradient-based) or random-walk
    Metropolis-Hastings ("rw").
    """

    def __init__(
        self,
        hidden_dims=(8,),
        activation="relu",
        prior_variance=1.0,
        kernel="hmc",
        step_size=0.05,
        n_leapfrog=20,
        step_scale=0.05,
        n_iter=2500,
        burn_in=None,
        thin=1,
        n_chains=1,
        seed=0,
    ):
        self.hidden_dims = hidden_dims
        self.activation = activation
        self.prior_variance = prior_variance
        self.kernel = kernel
        self.step_size = step_size
        self.n_leapfrog = n_leapfrog
        self.step_scale = step_scale
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.n_chains = n_chains
        self.seed = seed

    def _kernel(self):
        if self.kernel == "hmc":
            return HmcConfig(step_size=self.step_size, n_leapfrog=self.n_leapfrog)
        if self.kernel == "rw":
            return RandomWalkProposal(step_scale=self.step_scale)
        raise ValueError(f"kernel must be 'hmc' or 'rw', got {self.kernel!r}")

    def fit(self, X, y):
        X = as_matrix(X)
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise ValueError(
                f"y has shape {y.shape}, expected ({X.shape[0]},)"
            )
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ValueError("need at least 2 classes to fit a classifier")
        spec = NetworkSpec(
            input_dim=X.shape[1],
            hidden_dims=tuple(self.hidden_dims),
            n_classes=self.classes_.shape[0],
            activation=self.activation,
        )
        dataset = Dataset(
            features=X,
            labels=encoded.astype(np.int64),
            n_classes=spec.n_classes,
        )
        target = posterior_target(spec, dataset, PriorSpec(variance=self.prior_variance))
        init = np.zeros(param_count(spec))
        self.chains_ = run_chains(
            target,
            self._kernel(),
            init,
            n_iter=self.n_iter,
            burn_in=self.burn_in,
            thin=self.thin,
            seed=self.seed,
            n_chains=self.n_chains,
        )
        self.spec_ = spec
        self.samples_ = np.vstack([c.samples for c in self.chains_])
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X) -> np.ndarray:
        check_fitted(self, "samples_")
        X = as_matrix(X)
        probs, _ = posterior_predict_batch(self.spec_, self.samples_, X)
        return probs

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]

    def predict_entropy(self, X) -> np.ndarray:
        """Entropy of the posterior-predictive distribution per row, in nats."""
        check_fitted(self, "samples_")
        X = as_matrix(X)
        _, entropy = posterior_predict_batch(self.spec_, self.samples_, X)
        return entropy

    def diagnostics(self) -> ChainDiagnostics:
        check_fitted(self, "chains_")
        return chain_diagnostics(self.chains_)


class Standardizer(TransformerMixin, BaseEstimator):
    """Z-scoring with training-set statistics; constant columns map to 0."""

    def fit(self, X, y=None):
        X = as_matrix(X)
        self.params_ = data_mod.fit_standardizer_matrix(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "params_")
        return data_mod.standardize_matrix(self.params_, as_matrix(X))


class RandomConvFeatures(TransformerMixin, BaseEstimator):
    """Fixed (untrained) random convolutional feature map over gray images.

    Kernels are drawn once from ``kernel_seed`` and never updated; the
    transform is deterministic and identical across fits. Input is a list
    of 2-D arrays in [0, 1] or one (n, h, w) array.
    """

    def __init__(self, stages=features_mod.DEFAULT_STAGES, output_dim=256, kernel_seed=0):
        self.stages = stages
        self.output_dim = output_dim
        self.kernel_seed = kernel_seed

    def _spec(self) -> features_mod.ConvStackSpec:
        return features_mod.ConvStackSpec(
            stages=tuple(tuple(s) for s in self.stages),
            output_dim=self.output_dim,
            kernel_seed=self.kernel_seed,
        )

    def fit(self, X=None, y=None):
        self.spec_ = self._spec()
        return self

    def transform(self, X) -> np.ndarray:
        check_fitted(self, "spec_")
        return features_mod.extract_features_batch(list(X), self.spec_)
