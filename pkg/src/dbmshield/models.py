"""Restricted and deep Boltzmann machines on binary units.

Energy of an RBM with weights ``W``, visible bias ``a`` and hidden bias ``b``::

    E(v, h) = -a.v - b.h - v.W.h

A DBM is a stack of RBM layers. Its energy is the sum of the layer energies,
so the effective bias of an intermediate hidden layer is the hidden bias of
the layer below plus the visible bias of the layer above. Internally both
model types are handled as a :class:`LayerChain` (one bias vector per layer of
units, one weight matrix between each consecutive pair).
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._validation import check_binary_array, check_probabilities
from .rng import get_rng

FORMAT_VERSION = 1


def logistic(x):
    return expit(x)


def softplus(x):
    return np.logaddexp(0.0, x)


@dataclass(frozen=True, eq=False)
class Rbm:
    """Binary RBM. ``weights`` has shape ``(n_visible, n_hidden)``.

    ``mask`` optionally fixes a sparsity pattern (1 = trainable, 0 = held at
    zero); partitioned layers use it to stay block-diagonal.
    """

    weights: np.ndarray
    visbias: np.ndarray
    hidbias: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        a = np.array(self.visbias, dtype=np.float64).reshape(-1)
        b = np.array(self.hidbias, dtype=np.float64).reshape(-1)
        if w.ndim != 2:
            raise ValueError("weights must be a matrix")
        if w.shape != (a.size, b.size):
            raise ValueError(
                f"weights shape {w.shape} does not match biases ({a.size}, {b.size})"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("RBM parameters must be finite")
        for arr in (w, a, b):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "visbias", a)
        object.__setattr__(self, "hidbias", b)
        if self.mask is not None:
            m = np.array(self.mask, dtype=np.float64)
            if m.shape != w.shape:
                raise ValueError("mask must have the same shape as weights")
            if np.any(w[m == 0] != 0):
                raise ValueError("weights outside the mask must be zero")
            m.setflags(write=False)
            object.__setattr__(self, "mask", m)

    @property
    def n_visible(self):
        return self.weights.shape[0]

    @property
    def n_hidden(self):
        return self.weights.shape[1]

    @property
    def n_nodes(self):
        return self.n_visible + self.n_hidden

    @classmethod
    def zeros(cls, n_visible, n_hidden):
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    def transposed(self):
        """The same machine with the roles of visible and hidden swapped."""
        mask = None if self.mask is None else self.mask.T
        return Rbm(self.weights.T, self.hidbias, self.visbias, mask)

    def to_chain(self):
        return LayerChain([self.visbias, self.hidbias], [self.weights])

    def __eq__(self, other):
        if not isinstance(other, Rbm):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.visbias, other.visbias)
            and np.array_equal(self.hidbias, other.hidbias)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dbm:
    """Deep Boltzmann machine given as an ordered list of at least two RBMs."""

    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if len(layers) < 2:
            raise ValueError("a DBM needs at least two layers")
        for i, (lower, upper) in enumerate(zip(layers, layers[1:])):
            if not isinstance(lower, Rbm) or not isinstance(upper, Rbm):
                raise TypeError("DBM layers must be Rbm instances")
            if lower.n_hidden != upper.n_visible:
                raise ValueError(
                    f"layer {i} has {lower.n_hidden} hidden units but layer {i + 1} "
                    f"has {upper.n_visible} visible units"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def n_visible(self):
        return self.layers[0].n_visible

    @property
    def layer_sizes(self):
        return [self.layers[0].n_visible] + [rbm.n_hidden for rbm in self.layers]

    @property
    def n_nodes(self):
        return sum(self.layer_sizes)

    @classmethod
    def zeros(cls, sizes):
        return cls(tuple(Rbm.zeros(n, m) for n, m in zip(sizes, sizes[1:])))

    def effective_biases(self):
        biases = [self.layers[0].visbias.copy()]
        for i, rbm in enumerate(self.layers):
            b = rbm.hidbias.copy()
            if i + 1 < len(self.layers):
                b = b + self.layers[i + 1].visbias
            biases.append(b)
        return biases

    def to_chain(self):
        return LayerChain(self.effective_biases(), [rbm.weights for rbm in self.layers])

    def __eq__(self, other):
        if not isinstance(other, Dbm):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a == b for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None


class LayerChain:
    """Layered Boltzmann machine: biases ``b[0..L]``, weights ``W[1..L]``.

    ``W[l]`` couples layer ``l - 1`` (rows) with layer ``l`` (columns). The
    energy is ``-sum_l b[l].x[l] - sum_l x[l-1].W[l].x[l]``.
    """

    def __init__(self, biases, weights):
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        if len(self.weights) != len(self.biases) - 1:
            raise ValueError("need exactly one weight matrix per pair of layers")
        for l, w in enumerate(self.weights):
            if w.shape != (self.biases[l].size, self.biases[l + 1].size):
                raise ValueError(f"weight matrix {l} has inconsistent shape {w.shape}")

    @property
    def sizes(self):
        return [b.size for b in self.biases]

    @property
    def n_layers(self):
        return len(self.biases)

    def potential(self, l, states, beta=1.0):
        """Input to layer ``l`` given the (batched) states of its neighbours."""
        pot = np.broadcast_to(self.biases[l], self._batch_shape(states) + (self.sizes[l],)).copy()
        if l > 0:
            pot += states[l - 1] @ self.weights[l - 1]
        if l + 1 < self.n_layers:
            pot += states[l + 1] @ self.weights[l].T
        if beta != 1.0:
            pot *= beta
        return pot

    @staticmethod
    def _batch_shape(states):
        for s in states:
            if s is not None:
                return np.shape(s)[:-1]
        return ()

    def energy(self, states):
        e = 0.0
        for l, b in enumerate(self.biases):
            e = e - states[l] @ b
        for l, w in enumerate(self.weights):
            e = e - np.sum((states[l] @ w) * states[l + 1], axis=-1)
        return e

    def clamp_first(self, v):
        """Chain over layers ``1..L`` with layer 0 fixed to the vector ``v``.

        Returns ``(chain, offset)`` where ``offset = b[0].v``, so that
        ``full.energy([v, *h]) == chain.energy(h) - offset``.
        """
        v = np.asarray(v, dtype=np.float64)
        offset = float(v @ self.biases[0])
        first = self.biases[1] + v @ self.weights[0]
        return LayerChain([first] + self.biases[2:], self.weights[1:]), offset


def as_chain(model):
    if isinstance(model, LayerChain):
        return model
    if isinstance(model, (Rbm, Dbm)):
        return model.to_chain()
    raise TypeError(f"expected an Rbm or Dbm, got {type(model).__name__}")


def _vector(x, n, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1:] != (n,):
        raise ValueError(f"{name} has {arr.shape[-1] if arr.ndim else 0} entries, expected {n}")
    return arr


def energy(model, v, h):
    """Energy ``E(v, h)`` of an RBM (vectors or row-aligned batches)."""
    if not isinstance(model, Rbm):
        raise TypeError("energy(v, h) is defined for Rbm models; use LayerChain.energy for DBMs")
    v = _vector(v, model.n_visible, "v")
    h = _vector(h, model.n_hidden, "h")
    e = -(v @ model.visbias) - (h @ model.hidbias) - np.sum((v @ model.weights) * h, axis=-1)
    return float(e) if np.ndim(e) == 0 else e


def hidden_probability(model, v, factor=1.0):
    """``p(h_j = 1 | v)`` for each hidden unit, vectorised over rows of ``v``."""
    v = _vector(v, model.n_visible, "v")
    return logistic(factor * (v @ model.weights) + model.hidbias)


def visible_probability(model, h, factor=1.0):
    """``p(v_i = 1 | h)`` for each visible unit, vectorised over rows of ``h``."""
    h = _vector(h, model.n_hidden, "h")
    return logistic(factor * (h @ model.weights.T) + model.visbias)


def bernoulli_sample(probs, rng=None):
    """Independent Bernoulli draws, one per entry of ``probs``."""
    probs = check_probabilities(probs)
    rng = get_rng(rng)
    return (rng.random(probs.shape) < probs).astype(np.float64)


def _sample(probs, rng):
    # hot path: probabilities come from logistic() and need no validation
    return (rng.random(probs.shape) < probs).astype(np.float64)


def check_data_for(model, data, name="data"):
    X = check_binary_array(getattr(data, "values", data), name=name)
    if X.shape[1] != model.n_visible:
        raise ValueError(
            f"{name} has {X.shape[1]} variables but the model has {model.n_visible} visible units"
        )
    return X


# -- serialization -----------------------------------------------------------


def _rbm_to_dict(rbm):
    d = {
        "n_visible": rbm.n_visible,
        "n_hidden": rbm.n_hidden,
        "weights": rbm.weights.reshape(-1).tolist(),
        "visbias": rbm.visbias.tolist(),
        "hidbias": rbm.hidbias.tolist(),
    }
    if rbm.mask is not None:
        d["mask"] = rbm.mask.reshape(-1).astype(int).tolist()
    return d


def _rbm_from_dict(d):
    shape = (int(d["n_visible"]), int(d["n_hidden"]))
    mask = d.get("mask")
    return Rbm(
        np.asarray(d["weights"], dtype=np.float64).reshape(shape),
        d["visbias"],
        d["hidbias"],
        None if mask is None else np.asarray(mask, dtype=np.float64).reshape(shape),
    )


def model_to_dict(model):
    """Versioned plain-data container: dimensions plus row-major float64 values."""
    if isinstance(model, Rbm):
        return {"format": "dbmshield-model", "version": FORMAT_VERSION, "type": "rbm",
                "layers": [_rbm_to_dict(model)]}
    if isinstance(model, Dbm):
        return {"format": "dbmshield-model", "version": FORMAT_VERSION, "type": "dbm",
                "layers": [_rbm_to_dict(r) for r in model.layers]}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(d):
    if d.get("format") != "dbmshield-model":
        raise ValueError("not a dbmshield model container")
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')}")
    layers = [_rbm_from_dict(x) for x in d["layers"]]
    if d["type"] == "rbm":
        return layers[0]
    if d["type"] == "dbm":
        return Dbm(tuple(layers))
    raise ValueError(f"unknown model type {d['type']!r}")


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
