import numpy as np
import pytest

from crossbar_bnn import crossbar as xb
from crossbar_bnn import inference as inf
from crossbar_bnn import ternary
from crossbar_bnn.device import DeviceParams
from crossbar_bnn.mapping import extract_weights, map_weights
from crossbar_bnn.ternary import TernarySolution


def ideal_map(net, g_off=9.0, g_on=18.0):
    return np.where(map_weights(net).states == 1, g_on, g_off)


def test_ideal_array_reproduces_software(data, few_solutions):
    full, _, _ = data
    for net in few_solutions:
        out, pred = inf.hw_forward(ideal_map(net), 9.0, (net.b1, net.b2), full.features)
        assert np.allclose(out, ternary.logits(net, full.features), atol=1e-12)
        assert np.array_equal(pred, ternary.predict(net, full.features))


def test_all_off_array_hidden_layer_is_bias(rng):
    from conftest import random_ternary

    net = random_ternary(rng)
    x = rng.random((5, 13))
    out, _ = inf.hw_forward(np.full((15, 15), 9.0), 4.0, (net.b1, net.b2), x)
    # all differences cancel in both layers, so the outputs are the output biases
    assert np.allclose(out, net.b2)


def test_single_sample_and_gnorm_check(rng):
    from conftest import random_ternary

    net = random_ternary(rng)
    out, pred = inf.hw_forward(ideal_map(net), 9.0, (net.b1, net.b2), rng.random(13))
    assert out.shape == (3,) and pred.shape == ()
    with pytest.raises(ValueError):
        inf.hw_forward(ideal_map(net), 0.0, (net.b1, net.b2), rng.random(13))


def test_rms_deviation_sum_of_roots():
    net = TernarySolution.zeros()
    w1, w2 = np.zeros((13, 6)), np.zeros((6, 3))
    assert inf.rms_deviation(net, (w1, w2)) == 0.0
    w1[2, 3] = 1.0
    assert inf.rms_deviation(net, (w1, w2)) == 1.0
    w2[0, 1] = -1.0
    assert inf.rms_deviation(net, (w1, w2)) == 2.0
    w1[0, 0] = 1.0
    assert inf.rms_deviation(net, (w1, w2)) == pytest.approx(np.sqrt(2) + 1)
    with pytest.raises(ValueError):
        inf.rms_deviation(net, (w2, w1))


def test_grid_metrics_agree_with_per_point_evaluation(data, few_solutions, rng):
    _, train, _ = data
    net = few_solutions[1]
    g = ideal_map(net) + rng.normal(0, 1.0, (15, 15))
    grid = np.array([3.0, 6.5, 9.0, 11.2])
    acc, rms = inf.grid_metrics(g, net, train, grid)
    for k, gn in enumerate(grid):
        assert acc[k] == inf.solution_accuracy(g, gn, net, train)
        assert rms[k] == pytest.approx(inf.rms_deviation(net, extract_weights(g, gn)), rel=1e-12)


def test_prediction_depends_on_gnorm_through_biases(data, few_solutions):
    full, _, _ = data
    changed = 0
    for net in few_solutions:
        g = ideal_map(net)
        preds = {tuple(inf.hw_forward(g, gn, (net.b1, net.b2), full.features)[1]) for gn in (2.0, 9.0, 12.0)}
        changed += len(preds) > 1
    assert changed > 0


def test_rms_curve_unimodal_with_unique_minimizer(data, few_solutions, p30):
    _, train, _ = data
    from crossbar_bnn.study import DEFAULT_GRID

    for k, net in enumerate(few_solutions):
        g_off, g_on = xb.sample_arrays(p30, np.random.default_rng(k), (15, 15))[:2]
        g = np.where(map_weights(net).states == 1, g_on, g_off)
        _, rms = inf.grid_metrics(g, net, train, DEFAULT_GRID)
        i = int(np.argmin(rms))
        assert np.all(np.diff(rms[: i + 1]) < 0) and np.all(np.diff(rms[i:]) > 0)


def test_evaluate_and_trace_csv(data, few_solutions):
    _, train, test = data
    net = few_solutions[0]
    res = inf.evaluate(ideal_map(net), 9.0, net, train, test, trace=True)
    assert res.train_accuracy == net.train_accuracy and res.test_accuracy == net.test_accuracy
    assert res.rms_deviation == 0.0
    lines = res.trace_csv().splitlines()
    assert lines[0] == "sample,I_out1,I_out2,I_out3,label" and len(lines) == 179
    # three class bands: each class's own output is the largest on average
    for c in range(3):
        rows = res.outputs[res.labels == c]
        assert np.argmax(rows.mean(axis=0)) == c


def test_random_array_accuracy_near_chance(data, few_solutions):
    _, train, _ = data
    accs = []
    for k, net in enumerate(few_solutions):
        g = np.random.default_rng(k).uniform(8, 18, (15, 15))
        accs.append(inf.solution_accuracy(g, 9.0, net, train))
    assert np.mean(accs) < 0.8


def test_superposition_ideal_is_zero():
    p = DeviceParams(9.0, 1.5, 1.0, 0.25, 2.2, 0.12, read_noise_std=0.0)
    bar = xb.build_crossbar(p, 0.0, seed=0, lead_amplitude=0.0)
    bar.set_states(np.random.default_rng(0).integers(0, 2, (15, 15)))
    res = inf.superposition_check(bar, n_vectors=20, seed=1)
    assert set(res) == {0.1, 0.2, 0.3, 0.4, 0.5}
    assert max(r["stats"]["max"] for r in res.values()) < 1e-12


def test_superposition_with_lines_and_noise(p30):
    bar = xb.build_crossbar(p30, seed=5)
    bar.set_states(np.random.default_rng(2).integers(0, 2, (15, 15)))
    res = inf.superposition_check(bar, n_vectors=30, seed=3)
    meds = [r["stats"]["median"] for r in res.values()]
    assert max(meds) <= 0.03 and meds[1] <= 0.015
    assert all(r["stats"]["min"] > 0 for r in res.values())
