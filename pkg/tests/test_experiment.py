import numpy as np
import pytest

from dbmshield.data import BinaryDataset
from dbmshield.experiment.clustering import hierarchical_order, order_path, read_ppm, render_heatmap
from dbmshield.experiment.metrics import (
    cooccurrence_lifts, noise_baseline_recovery, noise_rate, pattern_metrics,
)
from dbmshield.experiment.runner import (
    format_experiment_config, parse_experiment_config, read_metrics_csv, run_experiment,
)
from dbmshield.experiment.scenario import run_scenario, site_labels
from dbmshield.experiment.snp import (
    CASE, CONTROL, SnpDataSpec, gen_snp_data, partition_sites,
)
from dbmshield.training import TrainSpec

TINY_SPEC = SnpDataSpec(n_samples=80, n_variables=12, n_patterns=2, pattern_size=3, seed=4)
TINY_TRAIN = TrainSpec(nhiddens=(6, 3), epochs=3, epochspretraining=3, learningrate=0.05,
                       n_particles=10)


def test_default_snp_data_shape_and_labels():
    d = gen_snp_data(SnpDataSpec())
    assert d.data.values.shape == (500, 50)
    assert d.labels.count(CASE) == 250 and d.labels.count(CONTROL) == 250
    assert d.pattern_columns == tuple(tuple(range(5 * i, 5 * i + 5)) for i in range(5))


def test_noise_free_data():
    d = gen_snp_data(SnpDataSpec(noise_p=0.0, seed=3))
    X = d.data.values
    cases = np.array([lbl == CASE for lbl in d.labels])
    assert not X[~cases].any()
    assert (X[cases].sum(axis=1) == 5).all()
    for row in X[cases]:
        hits = [row[list(cols)].all() for cols in d.pattern_columns]
        assert sum(hits) == 1


def test_noise_rate_in_controls():
    d = gen_snp_data(SnpDataSpec(noise_p=0.1, seed=7))
    controls = d.data.values[250:]
    assert abs(controls.mean() - 0.1) < 0.02


def test_noise_never_erases_pattern_bits():
    d = gen_snp_data(SnpDataSpec(noise_p=0.5, seed=1))
    X = d.data.values[:250]
    assert all(any(row[list(c)].all() for c in d.pattern_columns) for row in X)


def test_gen_deterministic_and_spec_checks():
    assert gen_snp_data(SnpDataSpec(seed=9)).data == gen_snp_data(SnpDataSpec(seed=9)).data
    assert gen_snp_data(SnpDataSpec(seed=9)).data != gen_snp_data(SnpDataSpec(seed=8)).data
    with pytest.raises(ValueError):
        SnpDataSpec(n_variables=20, n_patterns=5, pattern_size=5)
    with pytest.raises(ValueError):
        SnpDataSpec(noise_p=1.5)


def test_partition_sites():
    d = gen_snp_data(SnpDataSpec())
    parts = partition_sites(d, 20, seed=1)
    assert [p.n_rows for p in parts] == [25] * 20
    pooled = BinaryDataset(np.vstack([p.data.values for p in parts]))
    np.testing.assert_array_equal(pooled.sorted_rows(), d.data.sorted_rows())
    assert partition_sites(d, 1)[0] is d
    uneven = partition_sites(d.take(np.arange(23)), 5, seed=0)
    assert [p.n_rows for p in uneven] == [5, 5, 5, 4, 4]
    with pytest.raises(ValueError):
        partition_sites(d.take(np.arange(3)), 4)


def test_metrics_self_comparison():
    d = gen_snp_data(SnpDataSpec(seed=2))
    m = pattern_metrics(d, d.data)
    assert m.marginal_max_abs_diff == 0
    assert m.pattern_recovery_rate >= 0.5
    assert m.within_set_cooccurrence > m.between_set_cooccurrence


def test_pure_noise_recovery_below_one_percent():
    d = gen_snp_data(SnpDataSpec(seed=2))
    noise = (np.random.default_rng(0).random((20000, 50)) < 0.1).astype(np.int8)
    m = pattern_metrics(d, BinaryDataset(noise))
    base = noise_baseline_recovery(0.1, 5, 5)
    assert m.pattern_recovery_rate < 0.01
    assert abs(m.pattern_recovery_rate - base) < 5 * np.sqrt(base / 20000) + 1e-4
    assert abs(m.noise_rate - 0.1) < 0.01


def test_noise_rate_ignores_pattern_columns_and_complete_rows():
    sets = ((0, 1),)
    X = np.array([[1, 1, 1, 1], [1, 0, 0, 1], [0, 0, 0, 0]])
    assert noise_rate(X, sets) == pytest.approx(0.25)


def test_lifts_skip_zero_marginals():
    X = np.zeros((4, 4))
    assert cooccurrence_lifts(X, ((0, 1), (2, 3))) == (0.0, 0.0)


def test_metrics_column_mismatch():
    d = gen_snp_data(TINY_SPEC)
    with pytest.raises(ValueError):
        pattern_metrics(d, BinaryDataset(np.zeros((3, 5))))


def test_hierarchical_order_contract():
    X = np.array([[1, 1, 0, 0], [0, 0, 1, 1], [1, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, 0]])
    order = hierarchical_order(BinaryDataset(X))
    assert sorted(order) == list(range(5))
    pos = {r: i for i, r in enumerate(order)}
    assert abs(pos[0] - pos[2]) == 1
    assert (hierarchical_order(BinaryDataset(X)) == order).all()
    with pytest.raises(ValueError):
        hierarchical_order(BinaryDataset(X[:1]))


def test_noise_free_patterns_form_contiguous_blocks():
    d = gen_snp_data(SnpDataSpec(noise_p=0.0, seed=5))
    order = hierarchical_order(d.data)
    X = d.data.values[order]
    keys = [tuple(row) for row in X]
    seen, prev = set(), None
    for k in keys:
        if k != prev:
            assert k not in seen
            seen.add(k)
        prev = k
    assert len(seen) == 6


def test_render_heatmap(tmp_path):
    d = gen_snp_data(SnpDataSpec())
    path = render_heatmap(d.data, hierarchical_order(d.data), tmp_path / "h.ppm")
    img = read_ppm(path)
    assert img.shape == (500, 50, 3)
    order = [int(x) for x in order_path(path).read_text().split()]
    assert sorted(order) == list(range(500))
    X = d.data.values[order]
    assert (img[X == 1].mean(axis=1) < img[X == 0].mean(axis=1).min()).all()
    zeros = render_heatmap(np.zeros((4, 3)), [3, 2, 1, 0], tmp_path / "z.ppm")
    assert len(np.unique(read_ppm(zeros).reshape(-1, 3), axis=0)) == 1
    with pytest.raises(ValueError):
        render_heatmap(np.zeros((3, 3)), [0, 0, 1], tmp_path / "bad.ppm")


def test_site_labels_sort_in_index_order():
    labels = site_labels(20)
    assert labels == sorted(labels) and len(set(labels)) == 20


def test_scenario_counts_and_reproducibility():
    a = run_scenario(TINY_SPEC, 3, TINY_TRAIN, seed=1)
    b = run_scenario(TINY_SPEC, 3, TINY_TRAIN, seed=1)
    assert a.synthetic.n_rows == TINY_SPEC.n_samples
    assert a.synthetic == b.synthetic and a.metrics == b.metrics
    assert sorted(a.per_site_logs) == site_labels(3)
    assert 0 <= a.metrics.pattern_recovery_rate <= 1
    assert 0 <= a.metrics.marginal_max_abs_diff <= 1


def test_scenario_transport_equivalence():
    a = run_scenario(TINY_SPEC, 2, TINY_TRAIN, mode="in-process", seed=2, monitor=True)
    b = run_scenario(TINY_SPEC, 2, TINY_TRAIN, mode="networked", seed=2, monitor=True)
    assert a.metrics == b.metrics
    assert a.synthetic == b.synthetic
    for site in a.per_site_logs:
        assert a.per_site_logs[site].entries == b.per_site_logs[site].entries


def test_scenario_rejects_unknown_mode():
    with pytest.raises(ValueError):
        run_scenario(TINY_SPEC, 1, TINY_TRAIN, mode="carrier-pigeon")


def test_experiment_config_roundtrip_and_errors(tmp_path):
    cfg = parse_experiment_config("sites = 1, 4\nnoise_p = 0.2\nnhiddens = 8,4\nmonitor = yes\n",
                                  base_dir=tmp_path)
    assert cfg.sites == (1, 4) and cfg.data.noise_p == 0.2 and cfg.monitor
    assert [l.n_hidden for l in cfg.train.layers] == [8, 4]
    assert parse_experiment_config(format_experiment_config(cfg)) == cfg
    default = parse_experiment_config("")
    assert default.train.epochs == 100 and default.sites == (1, 2, 20)
    with pytest.raises(ValueError):
        parse_experiment_config("nonsense = 1\n")
    with pytest.raises(ValueError):
        parse_experiment_config("mode = pigeon\n")


def test_run_experiment_artifacts(tmp_path):
    text = ("n_samples = 60\nn_variables = 10\nn_patterns = 2\npattern_size = 3\n"
            "nhiddens = 6,3\nepochs = 2\nepochspretraining = 2\nn_particles = 10\n"
            f"sites = 1,2\noutput_dir = {tmp_path}\n")
    results = run_experiment(parse_experiment_config(text))
    rows = read_metrics_csv(tmp_path / "metrics.csv")
    assert [r[0] for r in rows] == [1, 2]
    assert rows[0][2] == results[0].metrics
    for name in ("original", "synthetic_1sites", "synthetic_2sites", "panels"):
        assert (tmp_path / f"heatmap_{name}.ppm").is_file()
    assert read_ppm(tmp_path / "heatmap_panels.ppm").shape == (60, 3 * 10 + 2 * 4, 3)
    assert "| 2 | in-process |" in (tmp_path / "report.md").read_text()
