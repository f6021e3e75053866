"""Block Gibbs sampling for RBMs and DBMs, including clamped sampling."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int
from .data import BinaryDataset
from .models import Dbm, Rbm, _sample, as_chain, logistic
from .rng import get_rng

DEFAULT_BURNIN_RBM = 100
DEFAULT_BURNIN_DBM = 200


@dataclass(frozen=True, eq=False)
class Particles:
    """States of Gibbs chains: one ``(n_particles, layer_size)`` array per layer."""

    states: tuple

    def __post_init__(self):
        states = tuple(np.asarray(s, dtype=np.float64) for s in self.states)
        n = {s.shape[0] for s in states}
        if len(n) != 1 or any(s.ndim != 2 for s in states):
            raise ValueError("every layer needs the same number of particles")
        for s in states:
            if not np.all((s == 0) | (s == 1)):
                raise ValueError("particle states must be binary")
        object.__setattr__(self, "states", states)

    @property
    def n_particles(self):
        return self.states[0].shape[0]

    @property
    def layer_sizes(self):
        return [s.shape[1] for s in self.states]


def layer_sizes(model):
    if isinstance(model, Rbm):
        return [model.n_visible, model.n_hidden]
    if isinstance(model, Dbm):
        return model.layer_sizes
    raise TypeError(f"expected an Rbm or Dbm, got {type(model).__name__}")


def init_particles(model, n_particles, rng=None):
    """Chains started from independent fair coin flips in every layer."""
    rng = get_rng(rng)
    n_particles = check_positive_int(n_particles, "n_particles")
    return Particles(tuple(
        (rng.random((n_particles, n)) < 0.5).astype(np.float64) for n in layer_sizes(model)
    ))


def resample_layers(chain, states, layers, rng, beta=1.0):
    """Resample the given layers in place, each conditioned on its neighbours."""
    for l in layers:
        states[l] = _sample(logistic(chain.potential(l, states, beta)), rng)
    return states


def gibbs_order(n_layers):
    """Update order of one sweep.

    An RBM resamples hidden given visible, then visible given hidden. A DBM
    resamples the even-indexed layers given the odd ones and then the odd
    layers given the even ones.
    """
    if n_layers == 2:
        return [1], [0]
    return list(range(0, n_layers, 2)), list(range(1, n_layers, 2))


def _sweep(chain, states, rng, beta=1.0):
    first, second = gibbs_order(chain.n_layers)
    resample_layers(chain, states, first, rng, beta)
    resample_layers(chain, states, second, rng, beta)
    return states


def gibbs_transition(model, particles, rng=None):
    """One block Gibbs sweep over all particles; returns new particles."""
    rng = get_rng(rng)
    sizes = layer_sizes(model)
    if particles.layer_sizes != sizes:
        raise ValueError(
            f"particle layer sizes {particles.layer_sizes} do not match model {sizes}"
        )
    states = [s.copy() for s in particles.states]
    _sweep(as_chain(model), states, rng)
    return Particles(tuple(states))


def _check_clamp(conditioned_on, n_visible):
    if conditioned_on is None:
        return None, None
    idx, vals = conditioned_on
    idx = np.asarray(idx, dtype=int).reshape(-1)
    vals = np.asarray(vals, dtype=np.float64).reshape(-1)
    if idx.size != vals.size:
        raise ValueError("clamp indices and values differ in length")
    if np.unique(idx).size != idx.size:
        raise ValueError("duplicate clamp indices")
    if idx.size and (idx.min() < 0 or idx.max() >= n_visible):
        raise ValueError(f"clamp index out of range for {n_visible} visible units")
    if not np.all((vals == 0) | (vals == 1)):
        raise ValueError("clamp values must be 0 or 1")
    return idx, vals


def samples(model, n, burnin=None, conditioned_on=None, rng=None, column_names=None):
    """Draw ``n`` visible rows from independent Gibbs chains.

    Parameters
    ----------
    model : Rbm or Dbm
    n : int
        Number of rows (one chain per row).
    burnin : int, optional
        Gibbs sweeps before the final draw; 100 for RBMs and 200 for DBMs
        when omitted.
    conditioned_on : (indices, values), optional
        Zero-based visible indices held fixed at the given 0/1 values during
        every sweep.
    """
    rng = get_rng(rng)
    n = check_positive_int(n, "n")
    if burnin is None:
        burnin = DEFAULT_BURNIN_RBM if isinstance(model, Rbm) else DEFAULT_BURNIN_DBM
    burnin = check_positive_int(burnin, "burnin", minimum=0)
    chain = as_chain(model)
    idx, vals = _check_clamp(conditioned_on, chain.sizes[0])
    states = list(init_particles(model, n, rng).states)

    def clamp():
        if idx is not None:
            states[0][:, idx] = vals

    clamp()
    for _ in range(burnin):
        _sweep(chain, states, rng)
        clamp()
    resample_layers(chain, states, [0], rng)
    clamp()
    return BinaryDataset(states[0], column_names)


def dbn_samples(rbms, n, burnin=None, rng=None, column_names=None):
    """Sample a deep belief network: Gibbs in the top RBM, then one downward pass."""
    rng = get_rng(rng)
    rbms = list(rbms)
    top = samples(rbms[-1], n, burnin, rng=rng).values
    for rbm in reversed(rbms[:-1]):
        top = _sample(logistic(top @ rbm.weights.T + rbm.visbias), rng)
    return BinaryDataset(top, column_names)
