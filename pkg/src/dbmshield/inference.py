"""Deterministic inference: mean-field posteriors and reconstruction error."""

import numpy as np

from .models import Dbm, Rbm, as_chain, check_data_for, hidden_probability, logistic, visible_probability

MEANFIELD_TOL = 1e-5
MEANFIELD_MAX_ITER = 50


def meanfield(model, data, tol=MEANFIELD_TOL, max_iter=MEANFIELD_MAX_ITER):
    """Factorised posterior means of every hidden layer given visible rows.

    Starts from a bottom-up pass (inputs from below doubled for intermediate
    layers, which stand in for the missing top-down signal) and then updates
    the layers in order until no component moves by more than ``tol``.

    Returns a list with one ``(n_rows, n_hidden_l)`` matrix per hidden layer.
    """
    X = check_data_for(model, data)
    if isinstance(model, Rbm):
        return [hidden_probability(model, X)]
    if not isinstance(model, Dbm):
        raise TypeError(f"expected an Rbm or Dbm, got {type(model).__name__}")
    return _meanfield_chain(as_chain(model), X, tol, max_iter)


def _meanfield_chain(chain, X, tol=MEANFIELD_TOL, max_iter=MEANFIELD_MAX_ITER):
    n_layers = chain.n_layers
    states = [X]
    for l in range(1, n_layers):
        factor = 2.0 if l < n_layers - 1 else 1.0
        states.append(logistic(factor * (states[l - 1] @ chain.weights[l - 1]) + chain.biases[l]))
    for _ in range(max_iter):
        delta = 0.0
        for l in range(1, n_layers):
            new = logistic(chain.potential(l, states))
            delta = max(delta, float(np.max(np.abs(new - states[l]), initial=0.0)))
            states[l] = new
        if delta < tol:
            break
    return states[1:]


def _first_layer_rbm(model):
    if isinstance(model, Rbm):
        return model
    return model.layers[0]


def reconstruction_error(model, data):
    """Mean absolute difference between rows and their one-step reconstruction.

    Reconstruction is ``visible_probability(hidden_probability(v))``, computed
    on probabilities only, so the value is deterministic and lies in [0, 1].
    For a DBM the first layer is used.
    """
    rbm = _first_layer_rbm(model)
    X = check_data_for(rbm, data)
    recon = visible_probability(rbm, hidden_probability(rbm, X))
    return float(np.mean(np.abs(X - recon)))
