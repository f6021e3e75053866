"""Partition functions and likelihoods: exact enumeration and AIS estimates."""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from ._validation import check_positive_int
from .inference import meanfield
from .models import Dbm, Rbm, as_chain, check_data_for, softplus
from .rng import get_rng
from .sampling import resample_layers

MAX_EXACT_NODES = 25
LN2 = np.log(2.0)


class ModelTooLargeError(ValueError):
    """Raised when exact enumeration would exceed the configured node cap."""


@dataclass(frozen=True)
class AisConfig:
    """Annealing schedule for AIS.

    ``burnin`` is the number of Gibbs sweeps at each intermediate temperature;
    ``None`` means 1 for RBMs and 5 for DBMs.
    """

    ntemperatures: int = 100
    nparticles: int = 100
    burnin: int = None

    def __post_init__(self):
        check_positive_int(self.ntemperatures, "ntemperatures", minimum=2)
        check_positive_int(self.nparticles, "nparticles")
        if self.burnin is not None:
            check_positive_int(self.burnin, "burnin", minimum=0)

    def burnin_for(self, model):
        if self.burnin is not None:
            return self.burnin
        return 1 if isinstance(model, Rbm) else 5


def _check_model(model):
    if not isinstance(model, (Rbm, Dbm)):
        raise TypeError(f"expected an Rbm or Dbm, got {type(model).__name__}")


def _check_exact_size(model, max_nodes):
    if model.n_nodes > max_nodes:
        raise ModelTooLargeError(
            f"model has {model.n_nodes} nodes; exact enumeration is capped at {max_nodes}"
        )


def _binary_configs(m, start, stop):
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(m)) & 1).astype(np.float64)


def _split_parity(sizes):
    even = list(range(0, len(sizes), 2))
    odd = list(range(1, len(sizes), 2))
    if sum(sizes[l] for l in odd) < sum(sizes[l] for l in even):
        return odd, even
    return even, odd


def _log_marginal(chain, states, summed, batch, beta=1.0):
    """Log of the unnormalised weight of the non-``summed`` layers in ``states``.

    Layers listed in ``summed`` are summed out analytically; they are
    conditionally independent given their neighbours.
    """
    out = np.zeros(batch)
    for l in range(chain.n_layers):
        if l in summed:
            pot = chain.potential(l, states, beta) if chain.n_layers > 1 else \
                np.broadcast_to(beta * chain.biases[l], (batch, chain.sizes[l]))
            out += np.sum(softplus(pot), axis=-1)
        else:
            out += beta * (states[l] @ chain.biases[l])
    return out


def chain_logpartition(chain, chunk=1 << 15):
    """Exact ``log Z`` of a layer chain.

    Enumerates the layers of one parity (whichever has fewer units) and sums
    the other parity out in closed form.
    """
    sizes = chain.sizes
    enum, summed = _split_parity(sizes)
    m = sum(sizes[l] for l in enum)
    total = 1 << m
    parts = []
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        configs = _binary_configs(m, start, stop)
        states = [None] * chain.n_layers
        offset = 0
        for l in enum:
            states[l] = configs[:, offset:offset + sizes[l]]
            offset += sizes[l]
        parts.append(logsumexp(_log_marginal(chain, states, summed, stop - start)))
    return float(logsumexp(parts))


def exact_logpartition(model, max_nodes=MAX_EXACT_NODES):
    """Exact log partition function by enumeration (exponential cost)."""
    _check_model(model)
    _check_exact_size(model, max_nodes)
    return chain_logpartition(as_chain(model))


def _unnormalized_logprob(model, X):
    """``log sum_h exp(-E(v, h))`` for every row of ``X`` (exact)."""
    if isinstance(model, Rbm):
        return X @ model.visbias + np.sum(softplus(X @ model.weights + model.hidbias), axis=1)
    chain = as_chain(model)
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    vals = np.empty(len(uniq))
    for i, v in enumerate(uniq):
        sub, offset = chain.clamp_first(v)
        vals[i] = chain_logpartition(sub) + offset
    return vals[np.asarray(inverse).reshape(-1)]


def exact_loglikelihood(model, data, max_nodes=MAX_EXACT_NODES):
    """Mean exact log-likelihood of the rows of ``data``."""
    _check_model(model)
    _check_exact_size(model, max_nodes)
    X = check_data_for(model, data)
    return float(np.mean(_unnormalized_logprob(model, X)) - exact_logpartition(model, max_nodes))


def chain_ais(chain, cfg, burnin, rng):
    """AIS from the all-zero chain (uniform distribution) to ``chain``.

    The even-indexed layers are the sampled state; the odd layers are summed
    out analytically in the importance weights. Returns ``(log Z estimate,
    log weights)``.
    """
    sizes = chain.sizes
    n_layers = chain.n_layers
    kept = list(range(0, n_layers, 2))
    summed = list(range(1, n_layers, 2))
    base = sum(sizes) * LN2
    betas = np.linspace(0.0, 1.0, cfg.ntemperatures)
    n = cfg.nparticles
    states = [None] * n_layers
    for l in kept:
        states[l] = (rng.random((n, sizes[l])) < 0.5).astype(np.float64)
    logw = np.zeros(n)
    prev = _log_marginal(chain, states, summed, n, betas[0])
    for k in range(1, len(betas)):
        cur = _log_marginal(chain, states, summed, n, betas[k])
        logw += cur - prev
        if k == len(betas) - 1:
            break
        for _ in range(burnin):
            resample_layers(chain, states, summed, rng, betas[k])
            resample_layers(chain, states, kept, rng, betas[k])
        for l in summed:
            states[l] = None
        prev = _log_marginal(chain, states, summed, n, betas[k])
    estimate = float(logsumexp(logw) - np.log(n) + base)
    return estimate, logw


def ais_logpartition(model, cfg=None, rng=None):
    """AIS estimate of ``log Z``; returns ``(estimate, logweights)``."""
    _check_model(model)
    cfg = cfg or AisConfig()
    return chain_ais(as_chain(model), cfg, cfg.burnin_for(model), get_rng(rng))


def loglikelihood_rbm(model, data, cfg=None, rng=None):
    """Mean log-likelihood of an RBM with an AIS estimate of ``log Z``."""
    if not isinstance(model, Rbm):
        raise TypeError("loglikelihood_rbm expects an Rbm")
    X = check_data_for(model, data)
    logz, _ = ais_logpartition(model, cfg, rng)
    return float(np.mean(_unnormalized_logprob(model, X)) - logz)


def loglikelihood_dbm(model, data, cfg=None, rng=None, logpartition=None):
    """Mean log-likelihood of a DBM with one AIS run per distinct row.

    Each row's ``log sum_h exp(-E(v, h))`` is estimated by annealing over the
    hidden layers with ``v`` clamped; a shared AIS estimate of ``log Z`` is
    subtracted (or ``logpartition`` if given).
    """
    if not isinstance(model, Dbm):
        raise TypeError("loglikelihood_dbm expects a Dbm")
    X = check_data_for(model, data)
    cfg = cfg or AisConfig()
    rng = get_rng(rng)
    burnin = cfg.burnin_for(model)
    if logpartition is None:
        logpartition, _ = chain_ais(as_chain(model), cfg, burnin, rng)
    chain = as_chain(model)
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    vals = np.empty(len(uniq))
    for i, v in enumerate(uniq):
        sub, offset = chain.clamp_first(v)
        vals[i] = chain_ais(sub, cfg, burnin, rng)[0] + offset
    return float(np.mean(vals[np.asarray(inverse).reshape(-1)]) - logpartition)


def _binary_entropy(mu):
    return -np.sum(xlogy(mu, mu) + xlogy(1.0 - mu, 1.0 - mu), axis=-1)


def logproblowerbound(model, data, cfg=None, rng=None, logpartition=None):
    """Mean variational lower bound of ``log p(v)`` under mean-field posteriors.

    Per row: ``-<E>_q + H(q) - log Z`` with ``q`` the factorised mean-field
    posterior. ``log Z`` is estimated with AIS unless ``logpartition`` is given
    (pass the exact value to obtain a deterministic, guaranteed lower bound).
    """
    if not isinstance(model, Dbm):
        raise TypeError("logproblowerbound expects a Dbm")
    X = check_data_for(model, data)
    if logpartition is None:
        logpartition, _ = ais_logpartition(model, cfg, rng)
    mus = meanfield(model, X)
    chain = as_chain(model)
    expected_energy = chain.energy([X] + mus)
    entropy = sum(_binary_entropy(mu) for mu in mus)
    return float(np.mean(-expected_energy + entropy) - logpartition)


def top2latentdims(model, data):
    """Two-dimensional summary of the top-layer mean-field activations.

    The activations are centred and projected onto their two leading
    principal directions; each direction's sign is fixed so that its largest
    loading is positive.
    """
    if not isinstance(model, Dbm):
        raise TypeError("top2latentdims expects a Dbm")
    X = check_data_for(model, data)
    if X.shape[0] < 2:
        raise ValueError("top2latentdims needs at least 2 rows")
    top = meanfield(model, X)[-1]
    centred = top - top.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    comps = vt[:2]
    for i in range(comps.shape[0]):
        if comps[i, np.argmax(np.abs(comps[i]))] < 0:
            comps[i] = -comps[i]
    out = centred @ comps.T
    if out.shape[1] < 2:
        out = np.hstack([out, np.zeros((out.shape[0], 2 - out.shape[1]))])
    return out
