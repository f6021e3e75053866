import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_dbm, random_rbm
import oracles
from dbmshield.models import (
    Dbm, Rbm, bernoulli_sample, energy, hidden_probability, load_model,
    model_from_dict, model_to_dict, save_model, visible_probability,
)


def test_energy_zero_model():
    rbm = Rbm.zeros(3, 2)
    assert energy(rbm, [1, 0, 1], [1, 1]) == 0.0


def test_energy_single_product_term():
    rbm = Rbm([[1.0]], [0.0], [0.0])
    assert energy(rbm, [1], [1]) == -1.0


def test_energy_matches_hand_evaluation(rng):
    rbm = random_rbm(rng, 3, 2)
    v = np.array([1.0, 0.0, 1.0])
    h = np.array([0.0, 1.0])
    expected = 0.0
    for i in range(3):
        expected -= rbm.visbias[i] * v[i]
        for j in range(2):
            expected -= v[i] * rbm.weights[i, j] * h[j]
    for j in range(2):
        expected -= rbm.hidbias[j] * h[j]
    assert energy(rbm, v, h) == pytest.approx(expected, abs=1e-12)


def test_energy_dimension_mismatch():
    with pytest.raises(ValueError):
        energy(Rbm.zeros(3, 2), [1, 0], [1, 1])


def test_hidden_probability_zero_model_is_half():
    p = hidden_probability(Rbm.zeros(4, 3), np.ones((5, 4)))
    np.testing.assert_array_equal(p, 0.5)


def test_hidden_probability_bias_only():
    b = np.array([-1.0, 0.3])
    rbm = Rbm(np.zeros((3, 2)), np.zeros(3), b)
    expected = 1 / (1 + np.exp(-b))
    for v in ([0, 0, 0], [1, 1, 0]):
        np.testing.assert_allclose(hidden_probability(rbm, v), expected, rtol=0, atol=1e-15)


def test_visible_probability_zero_model():
    np.testing.assert_array_equal(visible_probability(Rbm.zeros(4, 3), [1, 0, 1]), 0.5)


def test_visible_probability_is_transposed_hidden_probability(rng):
    rbm = random_rbm(rng, 5, 3)
    x = rng.integers(0, 2, (7, 5)).astype(float)
    np.testing.assert_array_equal(
        visible_probability(rbm.transposed(), x), hidden_probability(rbm, x)
    )


@settings(max_examples=25, deadline=None)
@given(
    n_visible=st.integers(1, 5),
    n_hidden=st.integers(1, 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_conditionals_agree_with_enumeration(n_visible, n_hidden, seed):
    rng = np.random.default_rng(seed)
    rbm = random_rbm(rng, n_visible, n_hidden, scale=2.0)
    dist = oracles.boltzmann_distribution(rbm)
    v = rng.integers(0, 2, n_visible)
    h = rng.integers(0, 2, n_hidden)
    p_v = {k: p for k, p in dist.items() if k[:n_visible] == tuple(v)}
    z_v = sum(p_v.values())
    exact_h = [sum(p for k, p in p_v.items() if k[n_visible + j]) / z_v for j in range(n_hidden)]
    np.testing.assert_allclose(hidden_probability(rbm, v), exact_h, atol=1e-9)
    p_h = {k: p for k, p in dist.items() if k[n_visible:] == tuple(h)}
    z_h = sum(p_h.values())
    exact_v = [sum(p for k, p in p_h.items() if k[i]) / z_h for i in range(n_visible)]
    np.testing.assert_allclose(visible_probability(rbm, h), exact_v, atol=1e-9)


def test_bernoulli_sample_extremes(rng):
    np.testing.assert_array_equal(bernoulli_sample(np.zeros(50), rng), 0)
    np.testing.assert_array_equal(bernoulli_sample(np.ones(50), rng), 1)


def test_bernoulli_sample_mean(rng):
    draws = bernoulli_sample(np.full(100_000, 0.1), rng)
    assert abs(draws.mean() - 0.1) < 0.01


@pytest.mark.parametrize("bad", [[-0.1], [1.5], [np.nan]])
def test_bernoulli_sample_rejects_invalid(bad):
    with pytest.raises(ValueError):
        bernoulli_sample(bad)


def test_rbm_rejects_inconsistent_and_nonfinite():
    with pytest.raises(ValueError):
        Rbm(np.zeros((3, 2)), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        Rbm([[np.inf]], [0.0], [0.0])


def test_dbm_requires_matching_layers():
    with pytest.raises(ValueError):
        Dbm((Rbm.zeros(4, 3), Rbm.zeros(2, 2)))
    with pytest.raises(ValueError):
        Dbm((Rbm.zeros(4, 3),))


def test_dbm_effective_biases_sum_shared_layers(rng):
    dbm = random_dbm(rng, [3, 2, 2])
    b = dbm.effective_biases()
    np.testing.assert_array_equal(b[1], dbm.layers[0].hidbias + dbm.layers[1].visbias)
    assert [x.size for x in b] == [3, 2, 2]


def test_chain_energy_matches_oracle(rng):
    dbm = random_dbm(rng, [3, 2, 2])
    states = [rng.integers(0, 2, n).astype(float) for n in (3, 2, 2)]
    biases, weights = oracles.layered_params(dbm)
    assert dbm.to_chain().energy(states) == pytest.approx(
        oracles.joint_energy(biases, weights, states), abs=1e-12
    )


def test_mask_forbids_nonzero_entries():
    with pytest.raises(ValueError):
        Rbm([[1.0, 1.0]], [0.0], [0.0, 0.0], mask=[[1.0, 0.0]])


@pytest.mark.parametrize("kind", ["rbm", "dbm"])
def test_serialization_round_trip(tmp_path, rng, kind):
    model = random_rbm(rng, 4, 3) if kind == "rbm" else random_dbm(rng, [4, 3, 2])
    path = tmp_path / "model.json"
    save_model(model, path)
    assert load_model(path) == model
    d = model_to_dict(model)
    assert d["version"] == 1
    d["version"] = 99
    with pytest.raises(ValueError):
        model_from_dict(d)


def test_models_are_immutable(rng):
    rbm = random_rbm(rng, 2, 2)
    with pytest.raises(ValueError):
        rbm.weights[0, 0] = 1.0
    assert math.isfinite(energy(rbm, [1, 1], [1, 1]))
