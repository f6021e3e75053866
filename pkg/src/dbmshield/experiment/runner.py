"""Experiment configuration files, scenario sweeps and the on-disk artifact set."""

import configparser
import csv
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..data import read_csv, write_csv
from ..training import TrainSpec
from .clustering import hierarchical_order, read_ppm, render_heatmap
from .metrics import PatternMetrics, noise_baseline_recovery
from .scenario import MODES, run_scenario
from .snp import SnpDataSpec, gen_snp_data

REFERENCE_TRAINING = dict(nhiddens=(50, 25, 15), epochs=100, learningrate=0.05,
                     epochspretraining=30, learningratepretraining=0.005)

_DATA_KEYS = {"n_samples": int, "n_variables": int, "n_patterns": int,
              "pattern_size": int, "noise_p": float}
_TRAIN_KEYS = {"epochs": int, "learningrate": float, "epochspretraining": int,
               "learningratepretraining": float, "batchsize": int, "cdsteps": int,
               "n_particles": int}


def _int_list(text):
    return tuple(int(x) for x in str(text).replace(" ", "").split(",") if x)


@dataclass(frozen=True)
class ExperimentConfig:
    data: SnpDataSpec = field(default_factory=SnpDataSpec)
    train: TrainSpec = field(default_factory=lambda: TrainSpec(**REFERENCE_TRAINING))
    sites: tuple = (1, 2, 20)
    mode: str = "in-process"
    seed: int = 0
    monitor: bool = False
    output_dir: Path = Path("experiment-output")

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        sites = tuple(int(s) for s in self.sites)
        if not sites or min(sites) < 1:
            raise ValueError("sites must be a non-empty list of positive integers")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    def to_dict(self):
        d = {k: getattr(self.data, k) for k in _DATA_KEYS}
        d["data_seed"] = self.data.seed
        d["nhiddens"] = ",".join(str(layer.n_hidden) for layer in self.train.layers)
        d.update({k: getattr(self.train, k) for k in _TRAIN_KEYS})
        d.update(sites=",".join(map(str, self.sites)), mode=self.mode, seed=self.seed,
                 monitor=self.monitor, output_dir=str(self.output_dir))
        return d


def parse_experiment_config(text, base_dir=None, overrides=None):
    """Parse ``key = value`` lines; unknown keys are rejected.

    Keys cover the data spec (``n_samples``, ``n_variables``, ``n_patterns``,
    ``pattern_size``, ``noise_p``, ``data_seed``), training (``nhiddens``,
    ``epochs``, ``learningrate``, ``epochspretraining``,
    ``learningratepretraining``, ``batchsize``, ``cdsteps``, ``n_particles``)
    and the run (``sites``, ``mode``, ``seed``, ``monitor``, ``output_dir``).
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string("[experiment]\n" + (text or ""))
    raw = dict(parser["experiment"])
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    known = set(_DATA_KEYS) | set(_TRAIN_KEYS) | {
        "data_seed", "nhiddens", "sites", "mode", "seed", "monitor", "output_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
    data_kw = {k: conv(raw[k]) for k, conv in _DATA_KEYS.items() if k in raw}
    if "data_seed" in raw:
        data_kw["seed"] = int(raw["data_seed"])
    train_kw = dict(REFERENCE_TRAINING)
    train_kw.update({k: conv(raw[k]) for k, conv in _TRAIN_KEYS.items() if k in raw})
    if "nhiddens" in raw:
        train_kw["nhiddens"] = _int_list(raw["nhiddens"])
    run_kw = {}
    if "sites" in raw:
        run_kw["sites"] = _int_list(raw["sites"])
    if "mode" in raw:
        run_kw["mode"] = raw["mode"].strip()
    if "seed" in raw:
        run_kw["seed"] = int(raw["seed"])
    if "monitor" in raw:
        run_kw["monitor"] = raw["monitor"].strip().lower() in ("1", "true", "yes", "on")
    if "output_dir" in raw:
        out = Path(raw["output_dir"])
        if base_dir is not None and not out.is_absolute():
            out = Path(base_dir) / out
        run_kw["output_dir"] = out
    return ExperimentConfig(SnpDataSpec(**data_kw), TrainSpec(**train_kw), **run_kw)


def format_experiment_config(cfg):
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())


METRICS_HEADER = ("n_sites", "mode") + PatternMetrics._fields


def write_metrics_csv(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in results:
            w.writerow([r.n_sites, r.mode] + [repr(float(v)) for v in r.metrics])


def read_metrics_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [(int(r["n_sites"]), r["mode"],
             PatternMetrics(*(float(r[k]) for k in PatternMetrics._fields))) for r in rows]


def write_monitoring_csv(per_site_logs, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("site", "epoch", "metric", "dataset_label", "value"))
        for site in sorted(per_site_logs):
            for e in per_site_logs[site].entries:
                w.writerow([site, e.epoch, e.metric, e.dataset_label, repr(e.value)])


def synthetic_path(outdir, n_sites):
    return Path(outdir) / f"synthetic_{n_sites}sites.csv"


def run_experiment(cfg):
    """Run every scenario in ``cfg.sites`` and write the artifact set.

    Files: ``original.csv``, ``synthetic_<n>sites.csv``,
    ``monitoring_<n>sites.csv``, ``metrics.csv`` and the report of
    :func:`render_report`.
    """
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_csv(gen_snp_data(cfg.data).data, out / "original.csv")
    results = []
    for n_sites in cfg.sites:
        r = run_scenario(cfg.data, n_sites, cfg.train, cfg.mode, seed=cfg.seed, monitor=cfg.monitor)
        write_csv(r.synthetic, synthetic_path(out, n_sites))
        write_monitoring_csv(r.per_site_logs, out / f"monitoring_{n_sites}sites.csv")
        results.append(r)
    write_metrics_csv(results, out / "metrics.csv")
    (out / "experiment.cfg").write_text(format_experiment_config(cfg))
    render_report(out, cfg.data)
    return results


def _panels(outdir):
    out = Path(outdir)
    panels = [("original", out / "original.csv")]
    synth = sorted(out.glob("synthetic_*sites.csv"),
                   key=lambda p: int(p.stem[len("synthetic_"):-len("sites")]))
    panels += [(p.stem, p) for p in synth]
    return panels


def write_panels(images, path, gap=4):
    """Place heatmaps side by side, separated by white ``gap``-pixel columns."""
    height = images[0].shape[0]
    spacer = np.full((height, gap, 3), 255, dtype=np.uint8)
    pieces = []
    for img in images:
        pieces += [img, spacer]
    canvas = np.concatenate(pieces[:-1], axis=1)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{canvas.shape[1]} {height}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(canvas).tobytes())
    return Path(path)


def render_report(outdir, data_spec=None):
    """Render one clustered heatmap per dataset and a markdown metrics table.

    Equal-height heatmaps are also combined into ``heatmap_panels.ppm``
    (original first, then synthetic sets by increasing site count).
    Returns the list of files written.
    """
    out = Path(outdir)
    if not (out / "original.csv").is_file():
        raise FileNotFoundError(f"{out / 'original.csv'} not found; run the experiment first")
    if data_spec is None and (out / "experiment.cfg").is_file():
        data_spec = parse_experiment_config((out / "experiment.cfg").read_text()).data
    written, images = [], []
    for name, path in _panels(out):
        data = read_csv(path)
        target = render_heatmap(data, hierarchical_order(data), out / f"heatmap_{name}.ppm")
        written.append(target)
        images.append(read_ppm(target))
    if len(images) > 1 and len({img.shape[0] for img in images}) == 1:
        written.append(write_panels(images, out / "heatmap_panels.ppm"))
    lines = ["# Synthetic data report", ""]
    if (out / "metrics.csv").is_file():
        lines += ["| sites | mode | marginal max diff | recovery rate | within-set lift "
                  "| between-set lift | noise rate |",
                  "|---|---|---|---|---|---|---|"]
        for n_sites, mode, m in read_metrics_csv(out / "metrics.csv"):
            lines.append(f"| {n_sites} | {mode} | " + " | ".join(f"{v:.4f}" for v in m) + " |")
        lines.append("")
    if data_spec is not None:
        base = noise_baseline_recovery(data_spec.noise_p, data_spec.n_patterns, data_spec.pattern_size)
        lines.append(f"Pure-noise recovery rate baseline: {base:.3g}")
        lines.append("")
    lines.append("Heatmaps (rows clustered, dark = 1):")
    lines += [f"- {p.name}" for p in written]
    report = out / "report.md"
    report.write_text("\n".join(lines) + "\n")
    return written + [report]
