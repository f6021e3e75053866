"""Training: CD-k for RBMs, greedy layer-wise stacking, DBM fine-tuning."""

import csv
import io
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ._validation import check_binary_array, check_positive_float, check_positive_int
from .evaluation import AisConfig, exact_loglikelihood, logproblowerbound
from .inference import _meanfield_chain
from .models import Dbm, LayerChain, Rbm, _sample, logistic
from .rng import get_rng
from .sampling import _sweep, init_particles

METRICS = ("reconstruction_error", "exact_loglikelihood", "ais_loglikelihood", "logproblowerbound")
INIT_WEIGHT_STD = 0.01


@dataclass(frozen=True)
class LayerSpec:
    """Per-layer training settings.

    ``learningrate`` and ``epochs`` override the stack-wide values for this
    layer. A partitioned layer lists its ``parts``; each part sees a
    consecutive block of ``n_visible`` input columns and the layer is the
    block-diagonal union of the parts.
    """

    n_hidden: int = None
    learningrate: float = None
    epochs: int = None
    parts: tuple = ()
    n_visible: int = None

    def __post_init__(self):
        parts = tuple(self.parts or ())
        object.__setattr__(self, "parts", parts)
        if parts:
            for p in parts:
                if not isinstance(p, LayerSpec):
                    raise TypeError("parts must be LayerSpec instances")
                if p.n_visible is None:
                    raise ValueError("every part needs n_visible to fix its column block")
                if p.parts:
                    raise ValueError("parts cannot be partitioned again")
            total = sum(p.n_hidden for p in parts)
            if self.n_hidden is None:
                object.__setattr__(self, "n_hidden", total)
            elif self.n_hidden != total:
                raise ValueError(
                    f"partitioned layer has n_hidden={self.n_hidden} but parts sum to {total}"
                )
        if self.n_hidden is None:
            raise ValueError("n_hidden is required")
        check_positive_int(self.n_hidden, "n_hidden")
        if self.learningrate is not None:
            check_positive_float(self.learningrate, "learningrate", allow_zero=True)
        if self.epochs is not None:
            check_positive_int(self.epochs, "epochs", minimum=0)
        if self.n_visible is not None:
            check_positive_int(self.n_visible, "n_visible")


def define_layer(n_hidden, learningrate=None, epochs=None, n_visible=None):
    return LayerSpec(n_hidden=n_hidden, learningrate=learningrate, epochs=epochs, n_visible=n_visible)


def define_partitioned_layer(parts):
    return LayerSpec(parts=tuple(parts))


@dataclass(frozen=True)
class TrainSpec:
    """Hyperparameters for RBM, RBM-stack and DBM training.

    ``epochs``/``learningrate`` apply to :func:`fitrbm`, :func:`stackrbms` and
    DBM fine-tuning; the ``*pretraining`` pair applies to the greedy stage of
    :func:`fitdbm`. ``n_particles`` persistent chains drive DBM fine-tuning.
    RBM learning rates are per training sample (the CD gradient is summed over
    each minibatch); fine-tuning averages over the minibatch.
    A learning rate of zero is accepted and leaves parameters unchanged.
    """

    nhiddens: tuple = (10,)
    epochs: int = 10
    learningrate: float = 0.005
    epochspretraining: int = 10
    learningratepretraining: float = 0.005
    batchsize: int = 20
    cdsteps: int = 1
    n_particles: int = 100
    monitoring_datasets: tuple = ()
    monitoring_metrics: tuple = ("reconstruction_error",)
    seed: int = None

    def __post_init__(self):
        nh = self.nhiddens
        if isinstance(nh, (int, np.integer, LayerSpec)):
            nh = (nh,)
        layers = tuple(x if isinstance(x, LayerSpec) else LayerSpec(n_hidden=int(x)) for x in nh)
        if not layers:
            raise ValueError("nhiddens must contain at least one layer")
        object.__setattr__(self, "nhiddens", layers)
        check_positive_int(self.epochs, "epochs", minimum=0)
        check_positive_int(self.epochspretraining, "epochspretraining", minimum=0)
        check_positive_float(self.learningrate, "learningrate", allow_zero=True)
        check_positive_float(self.learningratepretraining, "learningratepretraining", allow_zero=True)
        check_positive_int(self.batchsize, "batchsize")
        check_positive_int(self.cdsteps, "cdsteps")
        check_positive_int(self.n_particles, "n_particles")
        if self.seed is not None:
            check_positive_int(self.seed, "seed", minimum=0)
        object.__setattr__(self, "monitoring_datasets", tuple(self.monitoring_datasets))
        metrics = tuple(self.monitoring_metrics)
        for m in metrics:
            if m not in METRICS:
                raise ValueError(f"unknown monitoring metric {m!r}")
        object.__setattr__(self, "monitoring_metrics", metrics)

    @property
    def layers(self):
        return self.nhiddens


class MonitorEntry(NamedTuple):
    epoch: int
    metric: str
    dataset_label: str
    value: float


@dataclass
class MonitoringLog:
    """Scalar training metrics, one entry per (epoch, metric, dataset)."""

    entries: list = field(default_factory=list)

    def add(self, epoch, metric, dataset_label, value):
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}")
        self.entries.append(MonitorEntry(int(epoch), metric, str(dataset_label), float(value)))

    def extend(self, other, prefix=""):
        for e in other.entries:
            self.entries.append(e._replace(dataset_label=prefix + e.dataset_label))

    def labels(self):
        return sorted({e.dataset_label for e in self.entries})

    def series(self, metric, dataset_label):
        pts = [(e.epoch, e.value) for e in self.entries
               if e.metric == metric and e.dataset_label == dataset_label]
        return [p[0] for p in pts], [p[1] for p in pts]

    def to_records(self):
        return [e._asdict() for e in self.entries]

    @classmethod
    def from_records(cls, records):
        log = cls()
        for r in records:
            log.add(r["epoch"], r["metric"], r["dataset_label"], r["value"])
        return log

    def to_csv(self):
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(MonitorEntry._fields)
        for e in self.entries:
            writer.writerow([e.epoch, e.metric, e.dataset_label, repr(e.value)])
        return out.getvalue()

    def __len__(self):
        return len(self.entries)


def _resolve_monitoring(monitoring, n_features):
    if not monitoring:
        return {}
    out = {}
    for label, data in dict(monitoring).items():
        X = check_binary_array(getattr(data, "values", data), name=f"monitoring data {label!r}")
        if X.shape[1] != n_features:
            raise ValueError(
                f"monitoring data {label!r} has {X.shape[1]} variables, training data has {n_features}"
            )
        out[label] = X
    return out


def _training_matrix(data):
    X = check_binary_array(getattr(data, "values", data), name="data")
    if X.shape[0] == 0:
        raise ValueError("training data is empty")
    return X


def _recon_error(w, a, b, X):
    recon = logistic(logistic(X @ w + b) @ w.T + a)
    return float(np.mean(np.abs(X - recon)))


def _log_rbm_epoch(log, epoch, rbm, monitoring, metrics):
    for label, X in monitoring.items():
        if "reconstruction_error" in metrics:
            log.add(epoch, "reconstruction_error", label, _recon_error(rbm.weights, rbm.visbias, rbm.hidbias, X))
        if "exact_loglikelihood" in metrics:
            log.add(epoch, "exact_loglikelihood", label, exact_loglikelihood(rbm, X))


def _train_rbm(X, n_hidden, epochs, learningrate, batchsize, cdsteps, rng,
               monitoring=None, metrics=("reconstruction_error",), init=None,
               upfactor=1.0, downfactor=1.0, mask=None):
    """CD-k on inputs in [0, 1] (binary data or hidden probabilities)."""
    n, n_visible = X.shape
    if init is not None:
        if (init.n_visible, init.n_hidden) != (n_visible, n_hidden):
            raise ValueError("initial model does not match the layer dimensions")
        w, a, b = init.weights.copy(), init.visbias.copy(), init.hidbias.copy()
        if mask is None:
            mask = init.mask
    else:
        w = rng.normal(0.0, INIT_WEIGHT_STD, size=(n_visible, n_hidden))
        a = np.zeros(n_visible)
        b = np.zeros(n_hidden)
    if mask is not None:
        w *= mask
    log = MonitoringLog()
    monitoring = monitoring or {}
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batchsize):
            v0 = X[order[start:start + batchsize]]
            ph0 = logistic(upfactor * (v0 @ w) + b)
            h = _sample(ph0, rng)
            for _ in range(cdsteps):
                vk = _sample(logistic(downfactor * (h @ w.T) + a), rng)
                phk = logistic(upfactor * (vk @ w) + b)
                h = _sample(phk, rng)
            # summed, not averaged: the rate is per training sample
            grad_w = v0.T @ ph0 - vk.T @ phk
            if mask is not None:
                grad_w *= mask
            w += learningrate * grad_w
            a += learningrate * np.sum(v0 - vk, axis=0)
            b += learningrate * np.sum(ph0 - phk, axis=0)
        if monitoring:
            _log_rbm_epoch(log, epoch, Rbm(w, a, b), monitoring, metrics)
    return Rbm(w, a, b, mask), log


def fitrbm(data, spec=None, monitoring=None, rng=None, init=None):
    """Train an RBM with contrastive divergence.

    Parameters
    ----------
    data : BinaryDataset or array of 0/1
    spec : TrainSpec
        Uses the first entry of ``nhiddens`` as the hidden layer size and
        ``epochs``, ``learningrate``, ``batchsize`` and ``cdsteps``.
    monitoring : mapping of label to dataset, optional
        Evaluated after every epoch with ``spec.monitoring_metrics``.
    init : Rbm, optional
        Starting parameters; otherwise weights ~ N(0, 0.01^2) and zero biases.

    Returns
    -------
    (Rbm, MonitoringLog)
    """
    spec = spec or TrainSpec()
    rng = get_rng(spec.seed if rng is None else rng)
    X = _training_matrix(data)
    mon = _resolve_monitoring(monitoring, X.shape[1])
    layer = spec.layers[0]
    return _train_rbm(
        X, layer.n_hidden,
        spec.epochs if layer.epochs is None else layer.epochs,
        spec.learningrate if layer.learningrate is None else layer.learningrate,
        spec.batchsize, spec.cdsteps, rng, mon, spec.monitoring_metrics, init=init,
    )


def _dbm_factors(i, n_layers):
    if n_layers < 2:
        return 1.0, 1.0
    if i == 0:
        return 2.0, 1.0
    if i == n_layers - 1:
        return 1.0, 2.0
    return 2.0, 2.0


def _train_layer(X, layer, spec, rng, monitoring, up, down):
    epochs = spec.epochs if layer.epochs is None else layer.epochs
    lr = spec.learningrate if layer.learningrate is None else layer.learningrate
    if not layer.parts:
        return _train_rbm(X, layer.n_hidden, epochs, lr, spec.batchsize, spec.cdsteps, rng,
                          monitoring, spec.monitoring_metrics, upfactor=up, downfactor=down)
    widths = [p.n_visible for p in layer.parts]
    if sum(widths) != X.shape[1]:
        raise ValueError(
            f"partition parts cover {sum(widths)} inputs but the layer input has {X.shape[1]}"
        )
    n_hidden = layer.n_hidden
    w = np.zeros((X.shape[1], n_hidden))
    mask = np.zeros_like(w)
    a = np.zeros(X.shape[1])
    b = np.zeros(n_hidden)
    log = MonitoringLog()
    r0 = c0 = 0
    for j, part in enumerate(layer.parts):
        rows = slice(r0, r0 + part.n_visible)
        cols = slice(c0, c0 + part.n_hidden)
        part_spec = replace(
            spec,
            epochs=epochs if part.epochs is None else part.epochs,
            learningrate=lr if part.learningrate is None else part.learningrate,
        )
        part_mon = {k: v[:, rows] for k, v in monitoring.items()}
        rbm, part_log = _train_layer(X[:, rows], replace(part, n_visible=None), part_spec,
                                     rng, part_mon, up, down)
        w[rows, cols] = rbm.weights
        mask[rows, cols] = 1.0
        a[rows] = rbm.visbias
        b[cols] = rbm.hidbias
        log.extend(part_log, prefix=f"part{j + 1}/")
        r0 += part.n_visible
        c0 += part.n_hidden
    return Rbm(w, a, b, mask), log


def stackrbms(data, spec=None, for_dbm=False, monitoring=None, rng=None):
    """Greedy layer-wise training of a stack of RBMs.

    Layer 1 is trained on ``data``; each further layer on the hidden
    probabilities of the layer below. With ``for_dbm`` the potentials are
    doubled on the sides that will have two neighbours in the assembled DBM
    (upward for the bottom layer, downward for the top layer, both ways in
    between).

    Returns
    -------
    (list of Rbm, MonitoringLog)
        Monitoring labels are prefixed with ``layer<i>/``.
    """
    spec = spec or TrainSpec()
    rng = get_rng(spec.seed if rng is None else rng)
    X = _training_matrix(data)
    mon = _resolve_monitoring(monitoring, X.shape[1])
    layers = spec.layers
    rbms = []
    log = MonitoringLog()
    inputs = X
    for i, layer in enumerate(layers):
        up, down = _dbm_factors(i, len(layers)) if for_dbm else (1.0, 1.0)
        rbm, layer_log = _train_layer(inputs, layer, spec, rng, mon, up, down)
        rbms.append(rbm)
        log.extend(layer_log, prefix=f"layer{i + 1}/")
        inputs = logistic(up * (inputs @ rbm.weights) + rbm.hidbias)
        mon = {k: logistic(up * (v @ rbm.weights) + rbm.hidbias) for k, v in mon.items()}
    return rbms, log


def assemble_dbm(rbms):
    """Combine pretrained RBMs into a DBM.

    Each intermediate hidden layer has a bias from the RBM below and one from
    the RBM above; they are averaged and kept as the hidden bias of the lower
    RBM while the upper visible bias is set to zero.
    """
    if len(rbms) < 2:
        raise ValueError("a DBM needs at least two layers")
    layers = []
    for i, rbm in enumerate(rbms):
        vis = rbm.visbias if i == 0 else np.zeros(rbm.n_visible)
        hid = rbm.hidbias
        if i + 1 < len(rbms):
            hid = (rbm.hidbias + rbms[i + 1].visbias) / 2.0
        layers.append(Rbm(rbm.weights, vis, hid, rbm.mask))
    return Dbm(tuple(layers))


def _dbm_from_arrays(weights, biases, masks):
    layers = []
    for i, w in enumerate(weights):
        vis = biases[0] if i == 0 else np.zeros(w.shape[0])
        layers.append(Rbm(w, vis, biases[i + 1], masks[i]))
    return Dbm(tuple(layers))


def _log_dbm_epoch(log, epoch, dbm, monitoring, metrics, ais_config, rng):
    for label, X in monitoring.items():
        if "reconstruction_error" in metrics:
            first = dbm.layers[0]
            log.add(epoch, "reconstruction_error", label,
                    _recon_error(first.weights, first.visbias, first.hidbias, X))
        if "exact_loglikelihood" in metrics:
            log.add(epoch, "exact_loglikelihood", label, exact_loglikelihood(dbm, X))
        if "logproblowerbound" in metrics:
            log.add(epoch, "logproblowerbound", label,
                    logproblowerbound(dbm, X, ais_config, rng=rng))


def finetuning_learningrate(base, epoch):
    """Decaying step size ``base * 11 / (10 + epoch)`` for epoch 1, 2, ...

    Persistent-chain gradient estimates need a shrinking step to settle.
    """
    return base * 11.0 / (10.0 + epoch)


def finetune(dbm, X, epochs, learningrate, batchsize, n_particles, rng,
             monitoring=None, metrics=("reconstruction_error",), ais_config=None):
    """Stochastic-approximation fine-tuning of a DBM.

    Mean-field posteriors give the data-dependent statistics and persistent
    Gibbs chains give the model statistics; parameters move by plain SGD on
    the difference.
    """
    chain = LayerChain(dbm.effective_biases(), [r.weights.copy() for r in dbm.layers])
    masks = [r.mask for r in dbm.layers]
    particles = list(init_particles(dbm, n_particles, rng).states)
    log = MonitoringLog()
    monitoring = monitoring or {}
    n = X.shape[0]
    n_layers = chain.n_layers
    for epoch in range(1, epochs + 1):
        lr = finetuning_learningrate(learningrate, epoch)
        order = rng.permutation(n)
        for start in range(0, n, batchsize):
            v = X[order[start:start + batchsize]]
            pos = [v] + _meanfield_chain(chain, v)
            _sweep(chain, particles, rng)
            for l in range(n_layers - 1):
                grad = pos[l].T @ pos[l + 1] / v.shape[0] - particles[l].T @ particles[l + 1] / n_particles
                if masks[l] is not None:
                    grad *= masks[l]
                chain.weights[l] += lr * grad
            for l in range(n_layers):
                chain.biases[l] += lr * (pos[l].mean(axis=0) - particles[l].mean(axis=0))
        if monitoring:
            _log_dbm_epoch(log, epoch, _dbm_from_arrays(chain.weights, chain.biases, masks),
                           monitoring, metrics, ais_config, rng)
    return _dbm_from_arrays(chain.weights, chain.biases, masks), log


def fitdbm(data, spec=None, monitoring=None, rng=None, ais_config=None):
    """Train a DBM: greedy pretraining followed by fine-tuning.

    Pretraining runs :func:`stackrbms` with ``for_dbm=True`` using
    ``epochspretraining`` and ``learningratepretraining`` (per-layer overrides
    still apply). Fine-tuning then runs for ``epochs`` at ``learningrate``.

    Returns
    -------
    (Dbm, MonitoringLog)
        Fine-tuning entries carry the plain dataset labels; pretraining
        entries are prefixed with ``pretraining/layer<i>/``.
    """
    spec = spec or TrainSpec()
    if len(spec.layers) < 2:
        raise ValueError("a DBM needs at least two hidden layers")
    rng = get_rng(spec.seed if rng is None else rng)
    X = _training_matrix(data)
    mon = _resolve_monitoring(monitoring, X.shape[1])
    pre_spec = replace(spec, epochs=spec.epochspretraining,
                       learningrate=spec.learningratepretraining, seed=None)
    rbms, pre_log = stackrbms(X, pre_spec, for_dbm=True, monitoring=mon, rng=rng)
    dbm = assemble_dbm(rbms)
    dbm, fine_log = finetune(dbm, X, spec.epochs, spec.learningrate, spec.batchsize,
                             spec.n_particles, rng, mon, spec.monitoring_metrics,
                             ais_config or AisConfig())
    log = MonitoringLog()
    log.extend(pre_log, prefix="pretraining/")
    log.extend(fine_log)
    return dbm, log
