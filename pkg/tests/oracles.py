"""Brute-force reference computations by full joint enumeration.

Written directly from the energy definition with explicit loops so that it
shares no code with the package's layered-chain machinery.
"""

import itertools
import math

import numpy as np


def layered_params(model):
    """(biases, weights) of an Rbm or Dbm, summing the biases of shared layers."""
    layers = [model] if hasattr(model, "weights") else list(model.layers)
    biases = [np.array(layers[0].visbias)]
    for i, rbm in enumerate(layers):
        b = np.array(rbm.hidbias)
        if i + 1 < len(layers):
            b = b + layers[i + 1].visbias
        biases.append(b)
    return biases, [np.array(r.weights) for r in layers]


def joint_energy(biases, weights, states):
    e = 0.0
    for b, x in zip(biases, states):
        for i in range(len(b)):
            e -= b[i] * x[i]
    for l, w in enumerate(weights):
        lo, hi = states[l], states[l + 1]
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                e -= lo[i] * w[i, j] * hi[j]
    return e


def enumerate_joint(model):
    """All joint states with their unnormalised log weights ``-E``."""
    biases, weights = layered_params(model)
    sizes = [len(b) for b in biases]
    out = []
    for bits in itertools.product((0, 1), repeat=sum(sizes)):
        states, k = [], 0
        for n in sizes:
            states.append(bits[k:k + n])
            k += n
        out.append((states, -joint_energy(biases, weights, states)))
    return out


def logsumexp(values):
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


def log_partition(model):
    return logsumexp([lw for _, lw in enumerate_joint(model)])


def boltzmann_distribution(model):
    """Dict joint-state tuple -> probability."""
    joint = enumerate_joint(model)
    logz = logsumexp([lw for _, lw in joint])
    return {tuple(b for s in states for b in s): math.exp(lw - logz) for states, lw in joint}


def log_marginal_visible(model, v):
    v = tuple(int(x) for x in v)
    return logsumexp([lw for states, lw in enumerate_joint(model) if tuple(states[0]) == v]) \
        - log_partition(model)


def conditional_hidden_marginals(model, v):
    """Exact p(h_lj = 1 | v) for every hidden layer."""
    v = tuple(int(x) for x in v)
    rows = [(states, lw) for states, lw in enumerate_joint(model) if tuple(states[0]) == v]
    logz = logsumexp([lw for _, lw in rows])
    n_layers = len(rows[0][0])
    out = []
    for l in range(1, n_layers):
        probs = np.zeros(len(rows[0][0][l]))
        for states, lw in rows:
            probs += np.array(states[l]) * math.exp(lw - logz)
        out.append(probs)
    return out
