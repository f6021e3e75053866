"""Multi-site scenario: partition the benchmark data, train one DBM per site, pool samples."""

from dataclasses import dataclass

import numpy as np

from ..data import BinaryDataset
from ..federation.client import login, payload_dataset, pool_samples
from ..federation.local import local_sites
from ..sampling import samples
from ..training import MonitoringLog, TrainSpec, fitdbm
from .metrics import pattern_metrics
from .snp import SnpDataSpec, gen_snp_data, partition_sites

MODES = ("in-process", "networked")


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    n_sites: int
    original: object
    synthetic: BinaryDataset
    per_site_logs: dict
    metrics: tuple
    mode: str = "in-process"


def site_labels(n_sites):
    width = len(str(n_sites))
    return [f"site{i + 1:0{width}d}" for i in range(n_sites)]


def _layer_args(handle, spec):
    """Translate ``spec.layers`` into a remote ``nhiddens`` list, defining custom layers remotely."""
    out = []
    for i, layer in enumerate(spec.layers):
        plain = not layer.parts and layer.learningrate is None and layer.epochs is None \
            and layer.n_visible is None
        if plain:
            out.append(layer.n_hidden)
            continue
        label = f"layer{i + 1}"
        if layer.parts:
            names = []
            for j, p in enumerate(layer.parts):
                names.append(f"{label}_part{j + 1}")
                handle.call("define_layer", {"label": names[-1], "n_hidden": p.n_hidden,
                                             "learningrate": p.learningrate,
                                             "epochs": p.epochs, "n_visible": p.n_visible})
            handle.call("define_partitioned_layer", {"label": label, "parts": names})
        else:
            handle.call("define_layer", {"label": label, "n_hidden": layer.n_hidden,
                                         "learningrate": layer.learningrate,
                                         "epochs": layer.epochs, "n_visible": layer.n_visible})
        out.append(label)
    return out


def _train_in_process(parts, labels, train, base_seed, monitor):
    synthetic, logs = {}, {}
    for i, (label, part) in enumerate(zip(labels, parts)):
        rng = np.random.default_rng(base_seed + i)
        mon = {"D": part.data} if monitor else None
        dbm, log = fitdbm(part.data, train, monitoring=mon, rng=rng)
        synthetic[label] = samples(dbm, part.n_rows, rng=rng, column_names=part.data.column_names)
        logs[label] = log
    return synthetic, logs


def _train_networked(parts, labels, train, base_seed, monitor):
    with local_sites({lbl: p.data for lbl, p in zip(labels, parts)}) as records:
        with login(records, assign=True) as h:
            h.call("set_seed", per_site_args={lbl: {"seed": base_seed + i}
                                              for i, lbl in enumerate(labels)})
            args = {
                "data": "D",
                "label": "dbm",
                "nhiddens": _layer_args(h, train),
                "epochs": train.epochs,
                "learningrate": train.learningrate,
                "epochspretraining": train.epochspretraining,
                "learningratepretraining": train.learningratepretraining,
                "batchsize": train.batchsize,
                "cdsteps": train.cdsteps,
                "n_particles": train.n_particles,
                "monitoringdata": ["D"] if monitor else [],
                "monitoring_metrics": list(train.monitoring_metrics),
            }
            fitted = h.call("fitdbm", args)
            drawn = h.call("samples", {"model": "dbm"},
                           per_site_args={lbl: {"n": p.n_rows} for lbl, p in zip(labels, parts)})
    logs = {lbl: MonitoringLog.from_records(fitted[lbl]["monitoring"]) for lbl in labels}
    return {lbl: payload_dataset(drawn[lbl]) for lbl in labels}, logs


def run_scenario(spec=None, n_sites=1, train=None, mode="in-process", seed=None, monitor=False):
    """Generate data, split it over ``n_sites`` sites, train, sample and score.

    The partition uses ``seed`` (default: ``train.seed``, else ``spec.seed``)
    and site ``i`` trains and samples with its own stream seeded ``seed + i``.
    Each site draws as many synthetic rows as it holds originals; parts are
    pooled in site-label order.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    spec = spec or SnpDataSpec()
    train = train or TrainSpec(nhiddens=(50, 25, 15))
    if seed is None:
        seed = train.seed if train.seed is not None else spec.seed
    original = gen_snp_data(spec)
    parts = partition_sites(original, n_sites, seed)
    labels = site_labels(n_sites)
    runner = _train_in_process if mode == "in-process" else _train_networked
    per_site, logs = runner(parts, labels, train, seed, monitor)
    synthetic = pool_samples(per_site)
    return ScenarioResult(n_sites, original, synthetic, logs,
                          pattern_metrics(original, synthetic), mode)
