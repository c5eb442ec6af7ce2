import copy
import json

import numpy as np
import pytest

from crossbar_bnn import crossbar as xb
from crossbar_bnn.device import OFF, ON, DeviceParams
from crossbar_bnn.mapping import map_weights


def ideal(params, **kw):
    return xb.build_crossbar(params, 0.0, seed=0, lead_amplitude=0.0, **kw)


def test_build_identical_devices_all_off(flat_params):
    bar = ideal(flat_params)
    assert np.all(bar.state == OFF) and np.all(bar.g_off == 9.0) and np.all(bar.g_on == 18.0)
    d = bar.device(3, 4)
    assert d.g_on == 18.0 and d.state == OFF


def test_build_seed_determinism(p30):
    a, b = xb.build_crossbar(p30, seed=7), xb.build_crossbar(p30, seed=7)
    assert np.array_equal(a.g_off, b.g_off) and np.array_equal(a.v_on, b.v_on)
    assert not np.array_equal(a.g_off, xb.build_crossbar(p30, seed=8).g_off)


def test_single_row_drive_without_line_resistance(rng, p30):
    bar = ideal(p30)
    bar.set_states(rng.integers(0, 2, (15, 15)))
    drive = np.zeros(30)
    drive[6] = 0.4
    sol = xb.solve_network(bar, drive)
    assert np.allclose(-sol.port_currents[15:], bar.conductances()[6] * 0.4, rtol=1e-13, atol=0)


def test_noiseless_ideal_read_is_intrinsic(rng, p30):
    bar = ideal(p30.__class__(**{**p30.to_dict(), "read_noise_std": 0.0}))
    bar.set_states(rng.integers(0, 2, (15, 15)))
    g = xb.read_all(bar).values
    assert np.allclose(g, bar.conductances(), rtol=1e-13, atol=0)


def test_read_noise_level(p30):
    bar = xb.build_crossbar(p30, seed=1)
    reads = np.array([xb.read_all(bar).values for _ in range(100)])
    std = reads.std(axis=0, ddof=1)
    # 10 nA at 0.2 V -> 0.05 uS
    assert abs(np.mean(std) - 0.05) < 0.003


def test_center_reads_lower_than_corner(flat_params):
    bar = xb.build_crossbar(flat_params, 20.0, seed=0)
    bar.set_states(np.ones((15, 15), int))
    assert xb.read_device(bar, 7, 7) < xb.read_device(bar, 14, 0)
    g = xb.read_all(bar).values
    assert np.unravel_index(g.argmin(), g.shape) == (7, 7)


def test_read_is_non_destructive(p30, rng):
    bar = xb.build_crossbar(p30, seed=2)
    bar.set_states(rng.integers(0, 2, (15, 15)))
    before = bar.state.copy()
    xb.read_all(bar)
    assert np.array_equal(before, bar.state)


def uniform(th, **kw):
    return DeviceParams(9.0, 0.0, 1.0, 0.0, th, 0.0, read_noise_std=0.0, **kw)


def test_v_half_pulse_switches_only_target():
    bar = ideal(uniform(1.5))
    assert xb.write_pulse(bar, 4, 9, 1.6) == [(4, 9)]
    assert bar.state.sum() == 1
    assert xb.write_pulse(bar, 2, 2, 0.0) == []


def test_low_threshold_half_selected_device_disturbs():
    bar = ideal(uniform(1.5))
    bar.v_on[4, 2] = 0.7  # shares row 4 with the target
    dv = xb.device_voltages_for_pulse(bar, 4, 9, 1.6)
    assert dv[4, 9] == pytest.approx(1.6) and dv[4, 2] == pytest.approx(0.8) and dv[0, 0] == 0
    assert sorted(xb.write_pulse(bar, 4, 9, 1.6)) == [(4, 2), (4, 9)]


def test_write_verify_uniform_array_succeeds_with_ratio_two(p30):
    bar = xb.build_crossbar(uniform(2.2), seed=0)
    out = xb.write_verify(bar, 7, 7, ON)
    assert out.ok and bar.state[7, 7] == ON
    assert 1.9 < out.ratio < 2.01
    assert out.v_apply >= 2.2 and out.attempts == round((out.v_apply - 1.0) / 0.1) + 1


def test_write_verify_fails_above_cap():
    bar = xb.build_crossbar(uniform(2.2), seed=0)
    bar.v_on[3, 3] = 5.0  # above the 4.4 V cap
    out = xb.write_verify(bar, 3, 3, ON)
    assert out.status == "failed" and bar.state[3, 3] == OFF
    assert out.v_apply == pytest.approx(4.4) and out.attempts == 35


def test_ladder_respects_cap():
    lad = xb.ladder(xb.VerifyConfig(), 2.45)
    assert lad[0] == 1.0 and lad[-1] == 2.4 and len(lad) == 15
    assert len(xb.ladder(xb.VerifyConfig(v_start=3.0), 2.0)) == 0


def test_clear_random_states_30nm(p30):
    accs = []
    for k in range(3):
        bar = xb.build_crossbar(p30, seed=100 + k)
        bar.set_states(np.random.default_rng(k).integers(0, 2, (15, 15)))
        rep = xb.clear_array(bar)
        accs.append(rep.clear_accuracy)
        assert len(rep.clear_passes) == 2 and rep.write_accuracy is None
    assert np.mean(accs) >= 0.99


def test_program_all_off_is_clear_only(p30):
    bar = xb.build_crossbar(p30, seed=3)
    rep = xb.program_solution(bar, np.zeros((15, 15), int))
    assert rep.write_accuracy is None and all(o.status == "skipped" for o in rep.writes)
    assert bar.state.sum() == 0


def test_program_solution_30nm_and_report(p30, few_solutions, tmp_path):
    net = few_solutions[0]
    targets = map_weights(net)
    bar = xb.build_crossbar(p30, seed=4)
    rep = xb.program_solution(bar, targets)
    attempted = [o for o in rep.writes if o.status != "skipped"]
    assert len(attempted) == targets.n_on
    assert rep.write_accuracy == sum(o.ok for o in attempted) / len(attempted) == 1.0
    assert np.array_equal(bar.state, targets.states)
    d = rep.to_dict()
    json.dumps(d)
    assert d["n_attempted_writes"] == targets.n_on and d["failed_writes"] == []
    g = xb.read_all(bar)
    on, off = g.values[targets.states == 1], g.values[targets.states == 0]
    assert on.mean() > 1.6 * off.mean()
    g.save_csv(tmp_path / "g.csv")
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert len(rows) == 15 and all(len(r.split(",")) == 15 for r in rows)
    assert xb.ConductanceMap.from_dict(g.to_dict()).values.tolist() == g.values.tolist()


def test_spatial_trend_of_effective_switching_voltage():
    params = DeviceParams(9.0, 0.0, 1.0, 0.0, 2.2, 0.0, read_noise_std=0.0)
    bar = xb.build_crossbar(params, 20.0, seed=0)
    eff = xb.effective_switching_map(bar, xb.VerifyConfig(v_start=2.15, v_step=0.001))
    corners = [eff[0, 0], eff[0, 14], eff[14, 0], eff[14, 14]]
    assert eff[7, 7] == np.nanmax(eff)
    assert np.nanmin(eff) == min(corners) and max(corners) < eff[7, 7]
    assert bar.state.sum() == 0


def test_exact_route_matches_cached_route(p30):
    base = xb.build_crossbar(p30, seed=11)
    base.set_states(np.random.default_rng(0).integers(0, 2, (15, 15)))
    cfg = xb.VerifyConfig(v_start=1.8)
    cells = [(0, 0), (7, 7), (14, 3), (5, 12), (9, 1), (2, 14)]
    fast, slow = copy.deepcopy(base), copy.deepcopy(base)
    fast._cache = None
    for (i, j), tgt in zip(cells, [ON, OFF, ON, ON, OFF, ON]):
        a = xb.write_verify(fast, i, j, tgt, cfg)
        b = xb.write_verify(slow, i, j, tgt, cfg, exact=True)
        assert (a.status, a.attempts, a.v_apply) == (b.status, b.attempts, b.v_apply)
        assert a.ratio == pytest.approx(b.ratio, rel=1e-9)
        assert np.array_equal(fast.state, slow.state)
    assert xb.read_device(fast, 3, 3) == pytest.approx(xb.read_device(slow, 3, 3, exact=True), rel=1e-9)


def test_nonlinear_devices_use_full_solve():
    bar = xb.build_crossbar(uniform(2.2, nonlinearity=0.2), seed=0, lead_amplitude=0.0, r_segment=0.0)
    bar.set_states(np.ones((15, 15), int))
    assert xb.read_device(bar, 2, 2) == pytest.approx(18.0 / (1 + 0.2 * 0.04))


def test_set_states_validation(p30):
    bar = xb.build_crossbar(p30)
    with pytest.raises(ValueError):
        bar.set_states(np.full((15, 15), 2))
    with pytest.raises(ValueError):
        xb.VerifyConfig(v_step=0)
