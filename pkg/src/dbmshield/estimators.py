"""scikit-learn compatible wrappers around the functional training API."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_array, check_n_features
from .inference import meanfield, reconstruction_error
from .models import hidden_probability
from .sampling import samples
from .training import TrainSpec, fitdbm, fitrbm


def _rng(random_state):
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


class BernoulliRBMEstimator(TransformerMixin, BaseEstimator):
    """Binary RBM trained with CD-k.

    ``transform`` returns hidden-unit probabilities; ``score`` is the negative
    reconstruction error so that larger is better.
    """

    def __init__(self, n_hidden=10, epochs=10, learningrate=0.005, batchsize=20,
                 cdsteps=1, random_state=None):
        self.n_hidden = n_hidden
        self.epochs = epochs
        self.learningrate = learningrate
        self.batchsize = batchsize
        self.cdsteps = cdsteps
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_binary_array(X)
        spec = TrainSpec(nhiddens=(self.n_hidden,), epochs=self.epochs,
                         learningrate=self.learningrate, batchsize=self.batchsize,
                         cdsteps=self.cdsteps)
        self._rng = _rng(self.random_state)
        self.model_, self.monitoring_ = fitrbm(X, spec, rng=self._rng)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_binary_array(X)
        check_n_features(X, self.n_features_in_)
        return hidden_probability(self.model_, X)

    def sample(self, n_samples, burnin=None, conditioned_on=None):
        check_is_fitted(self, "model_")
        return samples(self.model_, n_samples, burnin, conditioned_on, rng=self._rng).values

    def score(self, X, y=None):
        check_is_fitted(self, "model_")
        return -reconstruction_error(self.model_, check_binary_array(X))


class DeepBoltzmannMachine(TransformerMixin, BaseEstimator):
    """Binary DBM: greedy pretraining plus mean-field/persistent-chain fine-tuning.

    ``transform`` returns the mean-field activations of the top hidden layer.
    """

    def __init__(self, nhiddens=(50, 25, 15), epochs=100, learningrate=0.05,
                 epochspretraining=30, learningratepretraining=0.005, batchsize=20,
                 n_particles=100, random_state=None):
        self.nhiddens = nhiddens
        self.epochs = epochs
        self.learningrate = learningrate
        self.epochspretraining = epochspretraining
        self.learningratepretraining = learningratepretraining
        self.batchsize = batchsize
        self.n_particles = n_particles
        self.random_state = random_state

    def _spec(self):
        return TrainSpec(
            nhiddens=tuple(self.nhiddens), epochs=self.epochs, learningrate=self.learningrate,
            epochspretraining=self.epochspretraining,
            learningratepretraining=self.learningratepretraining,
            batchsize=self.batchsize, n_particles=self.n_particles,
        )

    def fit(self, X, y=None):
        X = check_binary_array(X)
        self._rng = _rng(self.random_state)
        self.model_, self.monitoring_ = fitdbm(X, self._spec(), rng=self._rng)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_binary_array(X)
        check_n_features(X, self.n_features_in_)
        return meanfield(self.model_, X)[-1]

    def sample(self, n_samples, burnin=None, conditioned_on=None):
        check_is_fitted(self, "model_")
        return samples(self.model_, n_samples, burnin, conditioned_on, rng=self._rng).values

    def score(self, X, y=None):
        check_is_fitted(self, "model_")
        return -reconstruction_error(self.model_, check_binary_array(X))
