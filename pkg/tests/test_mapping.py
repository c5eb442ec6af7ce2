import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossbar_bnn import mapping
from crossbar_bnn.mapping import TargetStateMap, extract_weights, map_weights
from crossbar_bnn.ternary import TernarySolution


def net_with(w1=None, w2=None):
    z = TernarySolution.zeros()
    return TernarySolution(z.w1 if w1 is None else w1, z.b1, z.w2 if w2 is None else w2, z.b2)


def test_all_zero_network_maps_to_all_off():
    assert map_weights(TernarySolution.zeros()).states.sum() == 0


def test_layout_spot_checks():
    w1 = np.zeros((13, 6), int)
    w1[0, 0] = 1
    s = map_weights(net_with(w1=w1)).states
    assert s.sum() == 1 and s[0, 0] == 1  # row 1, column 1
    w2 = np.zeros((6, 3), int)
    w2[0, 0] = -1
    s = map_weights(net_with(w2=w2)).states
    assert s.sum() == 1 and s[1, 12] == 1  # row 2, column 13
    w1 = np.zeros((13, 6), int)
    w1[12, 5] = -1
    s = map_weights(net_with(w1=w1)).states
    assert s[12, 11] == 1 and s.sum() == 1  # row 13, column 12


def test_unused_cells_must_be_off():
    s = np.zeros((15, 15), int)
    s[13, 0] = 1
    with pytest.raises(ValueError):
        TargetStateMap(s)
    s = np.zeros((15, 15), int)
    s[12, 13] = 1
    with pytest.raises(ValueError):
        TargetStateMap(s)
    assert mapping.used_cells().sum() == 13 * 12 + 12 * 3


ternary = st.integers(-1, 1)


@given(st.lists(ternary, min_size=78, max_size=78), st.lists(ternary, min_size=18, max_size=18))
@settings(max_examples=100, deadline=None)
def test_mapping_properties(w1, w2):
    net = net_with(np.array(w1).reshape(13, 6), np.array(w2).reshape(6, 3))
    s = map_weights(net).states
    assert s.sum() == np.count_nonzero(net.w1) + np.count_nonzero(net.w2)
    # exact round trip from an ideal array
    g = np.where(s == 1, 14.0, 7.0)
    e1, e2 = extract_weights(g, 7.0)
    assert np.array_equal(e1, net.w1) and np.array_equal(e2, net.w2)
    f1, f2 = extract_weights(g, 3.5)
    assert np.allclose(f1, 2 * e1) and np.array_equal(np.sign(f2), np.sign(e2))


def test_extract_values_and_errors():
    g = np.full((15, 15), 9.0)
    assert all(np.all(w == 0) for w in extract_weights(g, 5.0))
    g[0, 0], g[0, 1] = 14.0, 7.0
    assert extract_weights(g, 7.0)[0][0, 0] == 1.0
    with pytest.raises(ValueError):
        extract_weights(g, 0.0)


def test_alternative_zero_encoding():
    s = map_weights(TernarySolution.zeros(), zero_encoding=(1, 1)).states
    assert s.sum() == 13 * 12 + 12 * 3


def test_csv_roundtrip(rng):
    from conftest import random_ternary

    t = map_weights(random_ternary(rng))
    back = TargetStateMap.from_csv(t.to_csv())
    assert np.array_equal(back.states, t.states)
    assert len(t.to_csv().splitlines()) == 15
